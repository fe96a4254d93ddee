#pragma once

#include "reni/hdrio.hpp"
#include "reni/vad.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace reni {

// Procedural outdoor sky: vertical gradient above the horizon, a soft-edged
// HDR sun disk and a noisy ground band below.
struct SkyParams {
  double sun_azimuth = 0.0;      // radians, same convention as phi
  double sun_elevation = 0.6;    // radians above the horizon, [0, pi/2]
  double sun_intensity = 1e3;    // sun / sky radiance ratio inside the disk
  double sun_radius = 0.08;      // angular radius, radians
  Eigen::Vector3d zenith{0.15, 0.3, 0.8};
  Eigen::Vector3d horizon{0.7, 0.75, 0.85};
  Eigen::Vector3d ground{0.25, 0.2, 0.15};
  std::uint64_t noise_seed = 0;

  Direction sun_direction() const;
  void validate() const;
};

// Radiance without the sun, and with it.
Eigen::Vector3d sky_background(const SkyParams& params, const Direction& d);
Eigen::Vector3d sky_radiance(const SkyParams& params, const Direction& d);

// Each pixel is the solid-angle weighted mean of samples^2 stratified
// sub-pixel evaluations; pixels near the sun use a finer pattern.
EnvironmentMap generate_sky(const SkyParams& params, int height, int samples = 6);

SkyParams random_sky_params(Rng& rng);

// Column shift by round(angle W / 2 pi); the result represents R_y(angle)
// applied to the environment, i.e. out(d) = in(R_y^T d).
EnvironmentMap rotate_map(const EnvironmentMap& map, double angle);

nlohmann::json to_json(const SkyParams& p);
SkyParams sky_params_from_json(const nlohmann::json& j);

struct Dataset {
  std::vector<EnvironmentMap> maps;
  std::vector<std::string> ids;
  std::vector<std::optional<SkyParams>> params;
};

// Writes <dir>/<id>.pfm plus manifest.json.
void write_dataset(const Dataset& data, const std::filesystem::path& dir);
// Uses manifest.json when present, else every .pfm/.hdr file in name order.
Dataset load_dataset(const std::filesystem::path& dir);

Dataset generate_dataset(int count, std::uint64_t seed, int height);

}  // namespace reni
