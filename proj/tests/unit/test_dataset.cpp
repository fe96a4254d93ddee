#include "reni/dataset.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

namespace reni {
namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Index brightest_pixel(const EnvironmentMap& m) {
  Eigen::Index best = 0;
  m.rgb.rowwise().sum().maxCoeff(&best);
  return best;
}

TEST(GenerateSky, PositiveAndSunAtZenith) {
  SkyParams p;
  p.sun_elevation = kPi / 2;
  const EnvironmentMap m = generate_sky(p, 16, 2);
  EXPECT_GT(m.rgb.minCoeff(), 0.0);
  EXPECT_LT(brightest_pixel(m) / m.width(), 1);  // top row
}

TEST(GenerateSky, SunFollowsAzimuth) {
  SkyParams p;
  p.sun_elevation = 0.3;
  p.sun_azimuth = 2.0;
  const EnvironmentMap m = generate_sky(p, 32, 2);
  const Eigen::Index best = brightest_pixel(m);
  const Direction d = m.grid.direction(static_cast<std::size_t>(best));
  EXPECT_GT(d.dot(p.sun_direction()), std::cos(0.1));
}

TEST(GenerateSky, SunToSkyRatioMatchesIntensity) {
  SkyParams p;
  p.sun_radius = 0.1;
  p.sun_intensity = 500.0;
  const Direction s = p.sun_direction();
  EXPECT_NEAR((sky_radiance(p, s).array() / sky_background(p, s).array()).mean(), 500.0, 1e-9);
  const Direction away = Direction(0.3, -0.5, 0.8).normalized();
  EXPECT_LT((sky_radiance(p, away) - sky_background(p, away)).norm(), 1e-15);
}

TEST(GenerateSky, NoiseSeedOnlyChangesGround) {
  SkyParams a, b;
  b.noise_seed = 99;
  EXPECT_LT((sky_radiance(a, a.sun_direction()) - sky_radiance(b, b.sun_direction())).norm(), 1e-12);
  const Direction ground = Direction(0.2, -0.7, 0.5).normalized();
  EXPECT_GT((sky_radiance(a, ground) - sky_radiance(b, ground)).norm(), 1e-6);
}

TEST(GenerateSky, ResolutionsAgreeAfterDownsampling) {
  Rng rng(1);
  for (int t = 0; t < 3; ++t) {
    const SkyParams p = random_sky_params(rng);
    const EnvironmentMap fine = generate_sky(p, 32);
    const EnvironmentMap coarse = generate_sky(p, 16);
    const RgbArray down = downsample(fine, 16).rgb;
    const double rms = std::sqrt((down - coarse.rgb).squaredNorm() / coarse.rgb.size());
    EXPECT_LT(rms / std::sqrt(coarse.rgb.squaredNorm() / coarse.rgb.size()), 0.02);
  }
}

TEST(GenerateSky, RejectsBadParams) {
  SkyParams p;
  p.sun_elevation = -0.1;
  EXPECT_THROW(generate_sky(p, 4), std::invalid_argument);
  p = SkyParams{};
  p.sun_intensity = 0.0;
  EXPECT_THROW(generate_sky(p, 4), std::invalid_argument);
}

TEST(RotateMap, Shifts) {
  std::mt19937_64 rng(2);
  EnvironmentMap m = EnvironmentMap::zeros(2);
  m.rgb = testing::random_matrix(8, 3, rng).cwiseAbs();
  EXPECT_EQ(rotate_map(m, 2 * kPi).rgb, m.rgb);
  const EnvironmentMap half = rotate_map(m, kPi);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_EQ(half.rgb.row(i * 4 + (j + 2) % 4), m.rgb.row(i * 4 + j));
  EXPECT_EQ(rotate_map(rotate_map(m, 1.7), -1.7).rgb, m.rgb);
  const EnvironmentMap odd = rotate_map(m, 0.9);
  std::vector<double> a(m.rgb.data(), m.rgb.data() + m.rgb.size()), b(odd.rgb.data(), odd.rgb.data() + odd.rgb.size());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(RotateMap, MatchesRotatedSky) {
  SkyParams p;
  p.sun_azimuth = 0.4;
  const int h = 16;
  const double psi = 2 * kPi * 5 / (2 * h);
  SkyParams q = p;
  q.sun_azimuth += psi;
  const EnvironmentMap a = rotate_map(generate_sky(p, h, 1), psi);
  const EnvironmentMap b = generate_sky(q, h, 1);
  // Ground noise is not rotated with the sun, so compare the sky half.
  const Eigen::Index top = static_cast<Eigen::Index>(h / 2 - 1) * 2 * h;
  EXPECT_LT((a.rgb.topRows(top) - b.rgb.topRows(top)).cwiseAbs().maxCoeff() / b.rgb.topRows(top).maxCoeff(), 1e-9);
}

TEST(Dataset, WriteLoadRoundTrip) {
  testing::TempDir dir("data");
  const Dataset d = generate_dataset(3, 5, 8);
  write_dataset(d, dir.path());
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
  const Dataset back = load_dataset(dir.path());
  ASSERT_EQ(back.ids, d.ids);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_LT((back.maps[i].rgb - d.maps[i].rgb).cwiseAbs().maxCoeff(), 1e-6 * d.maps[i].rgb.maxCoeff());
    ASSERT_TRUE(back.params[i].has_value());
    EXPECT_EQ(back.params[i]->noise_seed, d.params[i]->noise_seed);
    EXPECT_EQ(back.params[i]->sun_azimuth, d.params[i]->sun_azimuth);
  }
  std::filesystem::remove(dir / "manifest.json");
  const Dataset loose = load_dataset(dir.path());
  EXPECT_EQ(loose.ids, d.ids);
  EXPECT_FALSE(loose.params[0].has_value());
}

TEST(Dataset, GenerationIsSeeded) {
  const Dataset a = generate_dataset(2, 9, 4), b = generate_dataset(2, 9, 4), c = generate_dataset(2, 10, 4);
  EXPECT_EQ(a.maps[1].rgb, b.maps[1].rgb);
  EXPECT_NE(a.maps[1].rgb, c.maps[1].rgb);
  EXPECT_EQ(a.ids[0], "sky_0000");
}

}  // namespace
}  // namespace reni
