#include "reni/checkpoint.hpp"
#include "reni/png.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace reni {
namespace {

Checkpoint make_checkpoint() {
  Checkpoint ck;
  ck.config.mode = Equivariance::SO3;
  ck.config.latent_count = 2;
  ck.config.hidden_layers = 2;
  ck.config.hidden_width = 4;
  ck.config.beta = 0.25;
  ck.config.schedule = {{8, 3}, {16, 2}};
  FieldArchitecture arch;
  arch.input_width = input_width(Equivariance::SO3, 2);
  arch.hidden_layers = 2;
  arch.hidden_width = 4;
  ck.params = init_params(arch, 4);
  ck.stats = {-1.25, 6.5};
  ck.latents.push_back({Eigen::VectorXd::LinSpaced(6, -1.0, 1.0), Eigen::VectorXd::Constant(6, -5.0)});
  ck.image_ids = {"first"};
  return ck;
}

TEST(Checkpoint, JsonRoundTripIsExact) {
  testing::TempDir dir("ckpt");
  const Checkpoint ck = make_checkpoint();
  save_checkpoint(ck, dir / "m.json");
  const Checkpoint back = load_checkpoint(dir / "m.json");
  EXPECT_EQ(back.mode(), Equivariance::SO3);
  EXPECT_EQ(back.params.values(), ck.params.values());
  EXPECT_EQ(back.params.arch().omega0, ck.params.arch().omega0);
  EXPECT_EQ(back.stats.log_min, -1.25);
  EXPECT_EQ(back.latents[0].mean, ck.latents[0].mean);
  EXPECT_EQ(back.latents[0].log_var, ck.latents[0].log_var);
  EXPECT_EQ(back.image_ids, ck.image_ids);
  ASSERT_EQ(back.config.schedule.size(), 2u);
  EXPECT_EQ(back.config.schedule[1].height, 16);
  EXPECT_EQ(back.config.beta, 0.25);
}

TEST(Checkpoint, RejectsWrongFormatAndShapes) {
  nlohmann::json j = to_json(make_checkpoint());
  nlohmann::json bad = j;
  bad["format"] = "other";
  EXPECT_THROW(checkpoint_from_json(bad), std::invalid_argument);
  bad = j;
  bad["params"].erase(bad["params"].begin());
  EXPECT_THROW(checkpoint_from_json(bad), std::invalid_argument);
  bad = j;
  bad["version"] = 99;
  EXPECT_THROW(checkpoint_from_json(bad), std::invalid_argument);
}

TEST(TrainConfig, JsonDefaultsAndUnknownKeys) {
  const TrainConfig cfg = train_config_from_json(nlohmann::json::parse(R"({"mode": "none", "latent_count": 4,
      "schedule": [{"height": 16, "epochs": 10}, {"height": 32, "epochs": 5}],
      "network_lr": {"start": 1e-3, "end": 1e-5}})"));
  EXPECT_EQ(cfg.mode, Equivariance::None);
  EXPECT_EQ(cfg.latent_count, 4);
  EXPECT_EQ(cfg.hidden_layers, 5);
  EXPECT_EQ(cfg.total_epochs(), 15);
  EXPECT_EQ(cfg.network_lr.start, 1e-3);
  EXPECT_EQ(cfg.latent_lr.start, 1e-5);
  EXPECT_THROW(train_config_from_json(nlohmann::json::parse(R"({"latnet_count": 4})")), std::invalid_argument);
  const TrainConfig again = train_config_from_json(to_json(cfg));
  EXPECT_EQ(again.schedule[1].epochs, 5);
}

TEST(Latent, JsonRoundTrip) {
  LatentCode z(3, 2);
  z << 1, 2, 3, 4, 5, 6;
  EXPECT_EQ(latent_from_json(latent_to_json(z)), z);
}

TEST(Png, PreviewThenGrayRead) {
  testing::TempDir dir("png");
  FloatImage img{4, 2, 3, std::vector<float>(24, 0.0f)};
  for (int c = 0; c < 3; ++c) img.data[static_cast<std::size_t>(3 + c)] = 1e6f;
  write_png_preview(img, dir / "p.png");
  const FloatImage g = read_png_gray(dir / "p.png");
  ASSERT_EQ(g.width, 4);
  ASSERT_EQ(g.channels, 1);
  EXPECT_NEAR(g.data[0], 0.0f, 1e-6);
  EXPECT_NEAR(g.data[1], 1.0f, 1e-2);
  EXPECT_THROW(read_png_gray(dir / "missing.png"), std::runtime_error);
}

}  // namespace
}  // namespace reni
