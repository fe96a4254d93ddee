#include "reni/checkpoint.hpp"
#include "reni/fitting.hpp"
#include "reni/vad.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <numbers>

namespace reni {
namespace {

VariationalLatent make_latent(std::mt19937_64& rng, int n) {
  VariationalLatent v;
  v.mean = testing::random_matrix(3 * n, 1, rng);
  v.log_var = testing::random_matrix(3 * n, 1, rng, 0.3).array() - 1.0;
  return v;
}

TEST(SampleLatent, ZeroVarianceIsDeterministic) {
  VariationalLatent v{Eigen::VectorXd::LinSpaced(6, 0.0, 5.0), Eigen::VectorXd::Constant(6, -1e4)};
  Rng rng(1);
  const LatentCode z = sample_latent(v, rng);
  ASSERT_EQ(z.cols(), 2);
  for (int n = 0; n < 2; ++n)
    for (int r = 0; r < 3; ++r) EXPECT_DOUBLE_EQ(z(r, n), 3 * n + r);
}

TEST(SampleLatent, StandardNormalMoments) {
  VariationalLatent v{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)};
  Rng rng(2);
  const int draws = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const LatentCode z = sample_latent(v, rng);
    sum += z.sum();
    sq += z.squaredNorm();
  }
  const double count = 3.0 * draws;
  const double mean = sum / count;
  const double var = sq / count - mean * mean;
  EXPECT_LT(std::abs(mean), 3.0 / std::sqrt(count));
  EXPECT_LT(std::abs(var - 1.0), 3.0 * std::sqrt(2.0 / count));
}

TEST(SampleLatent, SeedReproducible) {
  std::mt19937_64 g(3);
  const VariationalLatent v = make_latent(g, 4);
  Rng a(7), b(7);
  EXPECT_EQ(sample_latent(v, a), sample_latent(v, b));
}

TEST(KldLoss, ClosedForms) {
  const VariationalLatent standard{Eigen::VectorXd::Zero(6), Eigen::VectorXd::Zero(6)};
  EXPECT_EQ(kld_loss(standard), 0.0);
  VariationalLatent shifted{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)};
  shifted.mean[0] = 1.0;
  EXPECT_EQ(kld_loss(shifted), 0.5);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 500; ++t) EXPECT_GT(kld_loss(make_latent(rng, 2)), 0.0);
  const std::vector<VariationalLatent> both{shifted, shifted};
  EXPECT_EQ(kld_loss(both), 1.0);
}

TEST(ReconLoss, Examples) {
  const DirectionGrid g = equirect_grid(4);
  RgbArray a = RgbArray::Random(32, 3);
  EXPECT_EQ(recon_loss(a, a, g.sin_weights), 0.0);
  const RgbArray b = (a.array() + 0.1).matrix();
  EXPECT_NEAR(recon_loss(a, b, g.sin_weights), g.sin_weights.sum() / 32.0 * 3 * 0.01, 1e-15);

  RgbArray pole = a, equator = a;
  pole.row(0).array() += 0.5;       // top row
  equator.row(8 + 0).array() += 0.5;  // second row, closer to the equator
  EXPECT_LT(recon_loss(pole, a, g.sin_weights), recon_loss(equator, a, g.sin_weights));
}

TEST(TrainLoss, Combination) {
  EXPECT_EQ(train_loss(0.3, 5.0, 0.0, 27), 0.3);
  EXPECT_EQ(train_loss(0.3, 0.0, 1.0, 27), 0.3);
  EXPECT_DOUBLE_EQ(train_loss(0.3, 5.4, 1e-2, 27), 0.3 + 1e-2 / 27 * 5.4);
}

TEST(TrainImageStep, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  const int n = 2;
  for (auto mode : {Equivariance::SO2, Equivariance::SO3, Equivariance::None}) {
    FieldArchitecture arch;
    arch.input_width = input_width(mode, n);
    arch.hidden_layers = 3;
    arch.hidden_width = 8;
    const FieldParams params = init_params(arch, 21);
    const DirectionGrid grid = equirect_grid(3);
    const RgbArray target = testing::random_matrix(static_cast<Eigen::Index>(grid.size()), 3, rng, 0.5);
    const VariationalLatent latent = make_latent(rng, n);
    const Eigen::VectorXd noise = testing::random_matrix(3 * n, 1, rng);
    const double beta = 0.7;
    const TrainStep step = train_image_step(params, mode, grid, target, latent, noise, beta);

    auto total_for = [&](const FieldParams& p, const VariationalLatent& v) {
      return train_image_step(p, mode, grid, target, v, noise, beta).total;
    };
    auto by_params = [&](const Eigen::VectorXd& x) {
      FieldParams p = params;
      p.values() = x;
      return total_for(p, latent);
    };
    auto by_mean = [&](const Eigen::VectorXd& x) {
      VariationalLatent v = latent;
      v.mean = x;
      return total_for(params, v);
    };
    auto by_log_var = [&](const Eigen::VectorXd& x) {
      VariationalLatent v = latent;
      v.log_var = x;
      return total_for(params, v);
    };
    EXPECT_LT(testing::max_relative_error(step.param_grad, testing::numeric_gradient(by_params, params.values(), 1e-6),
                                          1e-6),
              1e-4)
        << to_string(mode);
    EXPECT_LT(testing::max_relative_error(step.mean_grad, testing::numeric_gradient(by_mean, latent.mean, 1e-6), 1e-6),
              1e-4);
    EXPECT_LT(
        testing::max_relative_error(step.log_var_grad, testing::numeric_gradient(by_log_var, latent.log_var, 1e-6), 1e-6),
        1e-4);
  }
}

TrainConfig tiny_config(int epochs) {
  TrainConfig cfg;
  cfg.latent_count = 1;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 16;
  cfg.schedule = {{8, epochs}};
  cfg.network_lr = {1e-3, 1e-4};
  cfg.latent_lr = {1e-3, 1e-4};
  cfg.seed = 3;
  return cfg;
}

TEST(Train, FitsUniformGrayImage) {
  EnvironmentMap gray = EnvironmentMap::zeros(8);
  gray.rgb.setConstant(0.4);
  const std::vector<EnvironmentMap> data{gray};
  // A single uniform image has no range of its own to normalise by.
  EXPECT_THROW(train(data, tiny_config(1)), std::invalid_argument);
  TrainConfig cfg = tiny_config(200);
  cfg.stats = NormStats{std::log(0.01), std::log(10.0)};
  const TrainResult res = train(data, cfg);
  ASSERT_EQ(res.log.size(), 200u);
  // Epoch losses trend down: compare block averages.
  auto block = [&](int from) {
    double s = 0.0;
    for (int e = from; e < from + 20; ++e) s += res.log[static_cast<std::size_t>(e)].recon;
    return s;
  };
  for (int b = 20; b < 200; b += 20) EXPECT_LT(block(b), block(b - 20)) << b;
  const Checkpoint& ck = res.checkpoint;
  const DirectionGrid grid = equirect_grid(8);
  const RgbArray pred = decode(ck, unflatten_latent(ck.latents[0].mean), grid).cwiseMax(-1.0).cwiseMin(1.0);
  EXPECT_GT(psnr(pred, normalize_log(gray.rgb, ck.stats), kNormalizedPeak), 40.0);
}

TEST(Train, LargeBetaPullsLatentsToPrior) {
  EnvironmentMap a = EnvironmentMap::zeros(8), b = EnvironmentMap::zeros(8);
  a.rgb.setConstant(0.5);
  b.rgb.setConstant(2.0);
  TrainConfig cfg = tiny_config(300);
  cfg.beta = 1e3;
  cfg.latent_lr = {5e-2, 1e-2};
  const std::vector<EnvironmentMap> data{a, b};
  const TrainResult res = train(data, cfg);
  EXPECT_LT(kld_loss(res.checkpoint.latents), 0.1);
}

TEST(Train, DeterministicForFixedSeed) {
  EnvironmentMap a = EnvironmentMap::zeros(8), b = EnvironmentMap::zeros(8);
  a.rgb.setConstant(0.5);
  b.rgb.setConstant(2.0);
  b.rgb.topRows(16).setConstant(9.0);
  const std::vector<EnvironmentMap> data{a, b};
  const TrainResult r1 = train(data, tiny_config(20));
  const TrainResult r2 = train(data, tiny_config(20));
  for (std::size_t e = 0; e < r1.log.size(); ++e) {
    EXPECT_EQ(r1.log[e].recon, r2.log[e].recon);
    EXPECT_EQ(r1.log[e].kld, r2.log[e].kld);
  }
  EXPECT_EQ(r1.checkpoint.params.values(), r2.checkpoint.params.values());
}

TEST(Train, RejectsBadInput) {
  EXPECT_THROW(train(std::vector<EnvironmentMap>{}, tiny_config(1)), std::invalid_argument);
  EnvironmentMap a = EnvironmentMap::zeros(6);
  a.rgb.setConstant(1.0);
  a.rgb(0, 0) = 2.0;
  const std::vector<EnvironmentMap> data{a};
  EXPECT_THROW(train(data, tiny_config(1)), std::invalid_argument);  // 8 does not divide 6
  TrainConfig bad = tiny_config(1);
  bad.schedule.clear();
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = tiny_config(1);
  bad.beta = -1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Train, NonFiniteLossNamesEpochAndImage) {
  EnvironmentMap a = EnvironmentMap::zeros(8), b = EnvironmentMap::zeros(8);
  a.rgb.setConstant(0.5);
  b.rgb.setConstant(2.0);
  TrainConfig cfg = tiny_config(5);
  cfg.network_lr = {1e300, 1e300};
  const std::vector<EnvironmentMap> data{a, b};
  try {
    train(data, cfg, {"first", "second"});
    FAIL() << "expected divergence";
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch"), std::string::npos) << msg;
  }
}

TEST(TrainLog, CsvColumns) {
  testing::TempDir dir("log");
  write_train_log_csv({{0, 16, 0.5, 3.0, 1e-3}}, dir / "log.csv");
  std::ifstream in(dir / "log.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "epoch,resolution,recon,kld,lr");
}

}  // namespace
}  // namespace reni
