#include "reni/sphgeom.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace reni {

double row_theta(int row, int height) {
  return std::numbers::pi * (row + 0.5) / height;
}

double col_phi(int col, int width) {
  return 2.0 * std::numbers::pi * (col + 0.5) / width;
}

double DirectionGrid::solid_angle(std::size_t p) const {
  return sin_weights[static_cast<Eigen::Index>(p)] * (std::numbers::pi / height) *
         (2.0 * std::numbers::pi / width);
}

DirectionGrid equirect_grid(int height) {
  if (height < 1) throw std::invalid_argument("equirect_grid: height must be >= 1");
  DirectionGrid grid;
  grid.height = height;
  grid.width = 2 * height;
  const Eigen::Index count = static_cast<Eigen::Index>(grid.height) * grid.width;
  grid.directions.resize(count, 3);
  grid.sin_weights.resize(count);
  for (int i = 0; i < grid.height; ++i) {
    const double theta = row_theta(i, grid.height);
    const double st = std::sin(theta), ct = std::cos(theta);
    for (int j = 0; j < grid.width; ++j) {
      const double phi = col_phi(j, grid.width);
      const Eigen::Index p = static_cast<Eigen::Index>(i) * grid.width + j;
      grid.directions.row(p) << st * std::sin(phi), ct, st * std::cos(phi);
      grid.sin_weights[p] = st;
    }
  }
  return grid;
}

Eigen::Matrix3d YRotation::matrix() const {
  const double c = std::cos(angle_), s = std::sin(angle_);
  Eigen::Matrix3d m;
  m << c, 0.0, s,
       0.0, 1.0, 0.0,
       -s, 0.0, c;
  return m;
}

Direction rotate_direction(const YRotation& r, const Direction& d) {
  return r.matrix() * d;
}

LatentCode rotate_latent(const YRotation& r, const LatentCode& z) {
  return r.matrix() * z;
}

}  // namespace reni
