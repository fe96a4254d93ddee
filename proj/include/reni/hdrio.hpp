#pragma once

#include "reni/sphgeom.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace reni {

// Linear HDR radiance on an equirectangular grid.
struct EnvironmentMap {
  DirectionGrid grid;
  RgbArray rgb;  // P x 3, finite and non-negative

  int height() const { return grid.height; }
  int width() const { return grid.width; }

  static EnvironmentMap zeros(int height);
  // Throws if sizes disagree or any pixel is negative or non-finite.
  void validate() const;
};

// Log-radiance range used to map log(HDR) onto [-1, 1].
struct NormStats {
  double log_min = 0.0;
  double log_max = 1.0;

  void validate() const;
};

inline constexpr double kRadianceFloor = 1e-8;

// Raw float image as stored in a PFM file; rows top-to-bottom, channels
// interleaved.
struct FloatImage {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> data;
};

FloatImage read_pfm_image(const std::filesystem::path& path);
// Always writes little-endian (scale -1).
void write_pfm_image(const FloatImage& image, const std::filesystem::path& path);

EnvironmentMap read_pfm(const std::filesystem::path& path);
void write_pfm(const EnvironmentMap& map, const std::filesystem::path& path);

// Radiance picture (.hdr), 32-bit_rle_rgbe, flat or new-style RLE scanlines.
FloatImage read_rgbe_image(const std::filesystem::path& path);
EnvironmentMap read_rgbe(const std::filesystem::path& path);
// Picks the reader from the file extension (.pfm, .hdr/.rgbe/.pic).
EnvironmentMap read_environment(const std::filesystem::path& path);

// (mantissa + 0.5) / 256 * 2^(exponent - 128); zero exponent decodes to black.
Eigen::Vector3d rgbe_to_float(unsigned char r, unsigned char g, unsigned char b, unsigned char e);

EnvironmentMap image_to_map(const FloatImage& image);
FloatImage map_to_image(const EnvironmentMap& map);

RgbArray normalize_log(const RgbArray& rgb, const NormStats& stats, double floor = kRadianceFloor);
// Not clamped; exact inverse of normalize_log on non-clamped values.
RgbArray denormalize_log(const RgbArray& values, const NormStats& stats);
NormStats compute_stats(std::span<const EnvironmentMap> maps, double floor = kRadianceFloor);

// Solid-angle weighted block average to a coarser grid. height must divide
// the map height.
EnvironmentMap downsample(const EnvironmentMap& map, int height);
RgbArray downsample(const RgbArray& values, int from_height, int to_height);

}  // namespace reni
