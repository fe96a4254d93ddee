#include "reni/dataset.hpp"
#include "reni/render.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace reni {
namespace {

constexpr double kPi = std::numbers::pi;

RenderScene scene(int size, double ks, double shininess = 16.0) {
  RenderScene s;
  s.size = size;
  s.material.diffuse = Eigen::Vector3d(0.8, 0.5, 0.3);
  s.material.specular = ks;
  s.material.shininess = shininess;
  return s;
}

Checkpoint small_checkpoint(std::uint64_t seed) {
  Checkpoint ck;
  ck.config.mode = Equivariance::SO2;
  ck.config.latent_count = 2;
  ck.config.hidden_layers = 2;
  ck.config.hidden_width = 16;
  FieldArchitecture arch;
  arch.input_width = input_width(Equivariance::SO2, 2);
  arch.hidden_layers = 2;
  arch.hidden_width = 16;
  ck.params = init_params(arch, seed);
  ck.stats = {-2.0, 2.0};
  return ck;
}

// Direct per-pixel evaluation with the light directions supplied explicitly.
Eigen::Vector3d reference_pixel(const RenderScene& s, const Eigen::Vector3d& n, const Eigen::Matrix<double, -1, 3>& lights,
                                const Eigen::VectorXd& omega, const RgbArray& env) {
  const double alpha = bp_normalization(s.material.shininess);
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (Eigen::Index j = 0; j < lights.rows(); ++j) {
    const Eigen::Vector3d l = lights.row(j).transpose();
    const double cl = std::max(0.0, n.dot(l));
    const Eigen::Vector3d h = (l + Eigen::Vector3d::UnitZ()).normalized();
    const double ch = std::max(0.0, n.dot(h));
    const Eigen::Vector3d e = env.row(j).transpose();
    out += omega[j] * (s.material.diffuse.cwiseProduct(e) / kPi * cl +
                       s.material.specular * alpha * std::pow(ch, s.material.shininess) * cl * e);
  }
  return out;
}

TEST(BpNormalization, Examples) {
  EXPECT_NEAR(bp_normalization(0.0), 1.0 / (2.0 * kPi), 1e-15);
  EXPECT_NEAR(bp_normalization(2.0), 4.0 / (4.0 * kPi * (2.0 - std::exp(-1.0))), 1e-15);
  double prev = bp_normalization(0.0);
  for (double n = 0.5; n < 200.0; n += 0.5) {
    EXPECT_GT(bp_normalization(n), prev);
    prev = bp_normalization(n);
  }
}

TEST(Shade, UniformEnvironmentGivesAlbedoTimesRadiance) {
  const RenderScene s = scene(32, 0.0);
  EnvironmentMap env = EnvironmentMap::zeros(64);
  env.rgb.setConstant(2.5);
  const RenderImage img = shade(s, env);
  ASSERT_EQ(img.size, 32);
  double worst = 0.0;
  for (std::size_t p = 0; p < img.coverage.size(); ++p) {
    if (!img.coverage[p]) {
      EXPECT_EQ(img.rgb.row(static_cast<Eigen::Index>(p)).norm(), 0.0);
      continue;
    }
    for (int c = 0; c < 3; ++c)
      worst = std::max(worst, std::abs(img.rgb(static_cast<Eigen::Index>(p), c) / (2.5 * s.material.diffuse[c]) - 1.0));
  }
  EXPECT_LT(worst, 0.01);
}

TEST(Shade, BlackEnvironmentGivesBlackImage) {
  const RenderImage img = shade(scene(16, 1.0), EnvironmentMap::zeros(8));
  EXPECT_EQ(img.rgb.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Shade, LinearInEnvironment) {
  std::mt19937_64 rng(1);
  const DirectionGrid g = equirect_grid(8);
  const ShadingOperator op(scene(16, 0.6), g);
  const RgbArray e1 = testing::random_matrix(128, 3, rng).cwiseAbs(), e2 = testing::random_matrix(128, 3, rng).cwiseAbs();
  const RgbArray lhs = op.apply(1.7 * e1 + 0.3 * e2);
  const RgbArray rhs = 1.7 * op.apply(e1) + 0.3 * op.apply(e2);
  EXPECT_LT((lhs - rhs).norm() / rhs.norm(), 1e-9);
  EXPECT_LT((op.apply(2.0 * e1) - 2.0 * op.apply(e1)).norm(), 1e-12 * op.apply(e1).norm());
}

TEST(Shade, DenseAndOnTheFlyAgreeAndTransposeIsAdjoint) {
  std::mt19937_64 rng(2);
  const DirectionGrid g = equirect_grid(8);
  const ShadingOperator dense(scene(12, 0.4), g, true), lazy(scene(12, 0.4), g, false);
  ASSERT_TRUE(dense.dense());
  ASSERT_FALSE(lazy.dense());
  const RgbArray e = testing::random_matrix(128, 3, rng);
  const RgbArray u = testing::random_matrix(static_cast<Eigen::Index>(dense.covered().size()), 3, rng);
  EXPECT_LT((dense.apply(e) - lazy.apply(e)).norm(), 1e-12);
  EXPECT_LT((dense.apply_transpose(u) - lazy.apply_transpose(u)).norm(), 1e-12);
  // <A e, u> = <e, A^T u>
  EXPECT_NEAR((dense.apply(e).array() * u.array()).sum(), (e.array() * dense.apply_transpose(u).array()).sum(), 1e-10);
}

TEST(Shade, MatchesDirectEvaluation) {
  std::mt19937_64 rng(3);
  const RenderScene s = scene(8, 0.7, 8.0);
  const DirectionGrid g = equirect_grid(6);
  const RgbArray env = testing::random_matrix(72, 3, rng).cwiseAbs();
  const ShadingOperator op(s, g);
  const RgbArray out = op.apply(env);
  Eigen::VectorXd omega(72);
  for (std::size_t j = 0; j < 72; ++j) omega[static_cast<Eigen::Index>(j)] = g.solid_angle(j);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Eigen::Vector3d want = reference_pixel(s, op.normals().row(i).transpose(), g.directions, omega, env);
    EXPECT_LT((out.row(i).transpose() - want).norm(), 1e-12);
  }
}

TEST(Shade, RotatingEnvironmentRotatesLights) {
  std::mt19937_64 rng(4);
  const RenderScene s = scene(8, 0.5, 12.0);
  const int h = 8, shift = 3;
  const double psi = 2.0 * kPi * shift / (2 * h);
  EnvironmentMap env = EnvironmentMap::zeros(h);
  env.rgb = testing::random_matrix(2 * h * h, 3, rng).cwiseAbs();
  const RenderImage rotated = shade(s, rotate_map(env, psi));
  // The rotated map holds E_j at direction R l_j.
  Eigen::Matrix<double, -1, 3> lights(env.rgb.rows(), 3);
  Eigen::VectorXd omega(env.rgb.rows());
  for (std::size_t j = 0; j < env.grid.size(); ++j) {
    lights.row(static_cast<Eigen::Index>(j)) = rotate_direction(YRotation(psi), env.grid.direction(j)).transpose();
    omega[static_cast<Eigen::Index>(j)] = env.grid.solid_angle(j);
  }
  const ShadingOperator op(s, env.grid);
  for (std::size_t k = 0; k < op.covered().size(); ++k) {
    const Eigen::Index i = static_cast<Eigen::Index>(k);
    const Eigen::Vector3d want = reference_pixel(s, op.normals().row(i).transpose(), lights, omega, env.rgb);
    EXPECT_LT((rotated.rgb.row(op.covered()[k]).transpose() - want).norm(), 1e-10);
  }
}

TEST(RenderLoss, GradientMatchesFiniteDifferences) {
  const Checkpoint ck = small_checkpoint(5);
  const ShadingOperator op(scene(8, 0.8), equirect_grid(4));
  std::mt19937_64 rng(6);
  const RgbArray target = testing::random_matrix(static_cast<Eigen::Index>(op.covered().size()), 3, rng).cwiseAbs();
  const LatentCode z = testing::random_matrix(3, 2, rng, 0.5);
  const RenderLoss loss = render_loss(ck, op, target, z, 3.0, 1e-2);
  auto f = [&](const Eigen::VectorXd& v) {
    return render_loss(ck, op, target, Eigen::Map<const LatentCode>(v.data(), 3, 2), 3.0, 1e-2).total;
  };
  const Eigen::VectorXd num = testing::numeric_gradient(f, Eigen::Map<const Eigen::VectorXd>(z.data(), 6), 1e-6);
  EXPECT_LT(testing::max_relative_error(Eigen::Map<const Eigen::VectorXd>(loss.grad.data(), 6), num, 1e-6), 1e-3);
}

TEST(InvertLighting, ReducesLossOnOwnRender) {
  const Checkpoint ck = small_checkpoint(7);
  const RenderScene s = scene(12, 1.0);
  std::mt19937_64 rng(8);
  const LatentCode truth = testing::random_matrix(3, 2, rng, 0.4);
  const ShadingOperator op(s, equirect_grid(8));
  const RenderImage target = op.shade(denormalize_log(decode(ck, truth, op.env_grid()), ck.stats));
  InvertConfig cfg;
  cfg.epochs = 300;
  cfg.env_height = 8;
  const InvertResult r = invert_lighting(ck, target, s, cfg);
  EXPECT_LT(r.loss_trace.back(), 0.1 * r.loss_trace.front());
  EXPECT_GT(r.psnr, 30.0);
  EXPECT_EQ(r.env.height(), 8);
}

TEST(InvertLightingSh, ReproducesBandLimitedShading) {
  const RenderScene s = scene(12, 0.0);
  const DirectionGrid g = equirect_grid(8);
  const ShadingOperator op(s, g);
  SHCoeffs truth{1, Eigen::MatrixXd::Zero(4, 3)};
  truth.coeffs.row(0).setConstant(3.0);
  truth.coeffs(2, 0) = 1.0;
  const RenderImage target = op.shade(sh_render(truth, g));
  const SHCoeffs fit = invert_lighting_sh(op, target, 2);
  const RenderImage again = op.shade(sh_render(fit, g));
  EXPECT_GT(render_psnr(again, target), 60.0);
}

TEST(RenderImage, FloatImageRoundTrip) {
  const RenderImage img = shade(scene(8, 0.2), [] {
    EnvironmentMap e = EnvironmentMap::zeros(4);
    e.rgb.setConstant(1.0);
    return e;
  }());
  const RenderImage back = RenderImage::from_float_image(img.to_float_image());
  EXPECT_EQ(back.coverage, img.coverage);
  EXPECT_LT((back.rgb - img.rgb).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(RenderScene, Validation) {
  RenderScene s = scene(8, 1.5);
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = scene(8, 0.5, 0.0);
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = scene(0, 0.5);
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace reni
