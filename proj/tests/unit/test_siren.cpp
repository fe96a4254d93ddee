#include "reni/siren.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace reni {
namespace {

FieldArchitecture small_arch(int input, int layers = 3, int width = 8) {
  FieldArchitecture a;
  a.input_width = input;
  a.hidden_layers = layers;
  a.hidden_width = width;
  return a;
}

TEST(InitParams, DeterministicAndShaped) {
  FieldArchitecture arch = small_arch(input_width(Equivariance::SO2, 9), 5, 128);
  const FieldParams a = init_params(arch, 3), b = init_params(arch, 3), c = init_params(arch, 4);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_NE(a.values(), c.values());
  ASSERT_EQ(arch.linear_layers(), 6);
  EXPECT_EQ(a.weight(0).rows(), 128);
  EXPECT_EQ(a.weight(0).cols(), 9 + 2 + 9 + 81);
  for (int k = 1; k < 5; ++k) {
    EXPECT_EQ(a.weight(k).rows(), 128);
    EXPECT_EQ(a.weight(k).cols(), 128);
  }
  EXPECT_EQ(a.weight(5).rows(), 3);
  Eigen::Index total = 0;
  for (int k = 0; k < 6; ++k) total += arch.fan_in(k) * arch.fan_out(k) + arch.fan_out(k);
  EXPECT_EQ(arch.parameter_count(), total);
  EXPECT_EQ(a.values().size(), total);
}

TEST(InitParams, WeightBounds) {
  const FieldArchitecture arch = small_arch(20, 4, 64);
  const FieldParams p = init_params(arch, 11);
  EXPECT_LE(p.weight(0).cwiseAbs().maxCoeff(), 1.0 / 20);
  for (int k = 1; k < arch.linear_layers(); ++k) {
    const double bound = std::sqrt(6.0 / arch.fan_in(k)) / arch.omega0;
    EXPECT_LE(p.weight(k).cwiseAbs().maxCoeff(), bound);
    // Uniform draws should come close to the edge of the range.
    EXPECT_GT(p.weight(k).cwiseAbs().maxCoeff(), 0.8 * bound);
    EXPECT_LE(p.bias(k).cwiseAbs().maxCoeff(), 1.0 / std::sqrt(arch.fan_in(k)));
  }
}

TEST(Forward, ZeroParamsGiveZero) {
  FieldParams p(small_arch(5));
  p.values().setZero();
  std::mt19937_64 rng(1);
  EXPECT_EQ(forward(p, testing::random_matrix(4, 5, rng)), Eigen::MatrixXd::Zero(4, 3));
}

TEST(Forward, HandComputedTwoLayerNet) {
  // One sine layer of width 2 then the linear head; omega0 = 1 keeps the
  // arithmetic readable.
  FieldArchitecture arch = small_arch(2, 1, 2);
  arch.omega0 = 1.0;
  FieldParams p(arch);
  p.weight(0) << 1.0, 0.0, 0.0, 2.0;
  p.bias(0) << 0.5, -0.25;
  p.weight(1) << 1.0, 1.0, 2.0, 0.0, 0.0, -1.0;
  p.bias(1) << 0.0, 1.0, 3.0;
  Eigen::MatrixXd x(1, 2);
  x << 0.3, 0.4;
  const double h0 = std::sin(0.3 + 0.5), h1 = std::sin(0.8 - 0.25);
  const Eigen::MatrixXd y = forward(p, x);
  EXPECT_NEAR(y(0, 0), h0 + h1, 1e-15);
  EXPECT_NEAR(y(0, 1), 2 * h0 + 1.0, 1e-15);
  EXPECT_NEAR(y(0, 2), -h1 + 3.0, 1e-15);
}

TEST(Forward, BatchMatchesPerSample) {
  const FieldArchitecture arch = small_arch(input_width(Equivariance::SO3, 3), 3, 16);
  const FieldParams p = init_params(arch, 5);
  std::mt19937_64 rng(2);
  const LatentCode z = testing::random_matrix(3, 3, rng);
  const auto dirs = testing::random_directions(10, rng);
  const Eigen::MatrixXd batch = forward(p, field_inputs(Equivariance::SO3, dirs, z));
  for (Eigen::Index i = 0; i < dirs.rows(); ++i) {
    const Eigen::Vector3d one = forward(p, transform_so3(dirs.row(i).transpose(), z));
    EXPECT_LT((batch.row(i).transpose() - one).norm(), 1e-12);
  }
  // Bit-identical on repetition.
  EXPECT_EQ(forward(p, field_inputs(Equivariance::SO3, dirs, z)), batch);
}

TEST(Forward, RejectsShapeMismatch) {
  const FieldParams p = init_params(small_arch(4), 1);
  EXPECT_THROW(forward(p, Eigen::MatrixXd::Zero(2, 5)), std::invalid_argument);
}

TEST(Backward, ZeroUpstreamGivesZero) {
  const FieldParams p = init_params(small_arch(4), 1);
  std::mt19937_64 rng(3);
  ForwardCache cache;
  forward(p, testing::random_matrix(5, 4, rng), &cache);
  const FieldGradients g = backward(p, cache, Eigen::MatrixXd::Zero(5, 3));
  EXPECT_EQ(g.params, Eigen::VectorXd::Zero(p.values().size()));
  EXPECT_EQ(g.inputs, Eigen::MatrixXd::Zero(5, 4));
}

TEST(Backward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const FieldArchitecture arch = small_arch(3 + trial % 4, 3, 8);
    const FieldParams p = init_params(arch, static_cast<std::uint64_t>(trial));
    const Eigen::MatrixXd x = testing::random_matrix(3, arch.input_width, rng, 0.5);
    const Eigen::MatrixXd up = testing::random_matrix(3, 3, rng);
    ForwardCache cache;
    forward(p, x, &cache);
    const FieldGradients g = backward(p, cache, up);

    auto loss_params = [&](const Eigen::VectorXd& v) {
      FieldParams q = p;
      q.values() = v;
      return (forward(q, x).array() * up.array()).sum();
    };
    worst = std::max(worst, testing::max_relative_error(g.params, testing::numeric_gradient(loss_params, p.values(), 1e-6),
                                                        1e-5));
    auto loss_inputs = [&](const Eigen::VectorXd& v) {
      return (forward(p, Eigen::Map<const Eigen::MatrixXd>(v.data(), x.rows(), x.cols())).array() * up.array()).sum();
    };
    const Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
    worst = std::max(worst, testing::max_relative_error(Eigen::Map<const Eigen::VectorXd>(g.inputs.data(), g.inputs.size()),
                                                        testing::numeric_gradient(loss_inputs, xv, 1e-6), 1e-5));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Backward, ChainsThroughSo2FeaturesToLatent) {
  std::mt19937_64 rng(5);
  const int n = 3;
  const FieldArchitecture arch = small_arch(input_width(Equivariance::SO2, n), 3, 8);
  const FieldParams p = init_params(arch, 9);
  const auto dirs = testing::random_directions(7, rng);
  const LatentCode z = testing::random_matrix(3, n, rng, 0.5);
  const Eigen::MatrixXd up = testing::random_matrix(7, 3, rng);
  ForwardCache cache;
  forward(p, field_inputs(Equivariance::SO2, dirs, z), &cache);
  const FieldGradients g = backward(p, cache, up, false);
  EXPECT_EQ(g.params.size(), 0);
  const LatentCode dz = field_inputs_backward(Equivariance::SO2, dirs, z, g.inputs);
  auto f = [&](const Eigen::VectorXd& v) {
    const LatentCode zz = Eigen::Map<const LatentCode>(v.data(), 3, n);
    return (forward(p, field_inputs(Equivariance::SO2, dirs, zz)).array() * up.array()).sum();
  };
  const Eigen::VectorXd num = testing::numeric_gradient(f, Eigen::Map<const Eigen::VectorXd>(z.data(), z.size()), 1e-6);
  EXPECT_LT(testing::max_relative_error(Eigen::Map<const Eigen::VectorXd>(dz.data(), dz.size()), num, 1e-5), 1e-4);
}

}  // namespace
}  // namespace reni
