#pragma once

#include <Eigen/Core>

#include <cstddef>

namespace reni {

using Direction = Eigen::Vector3d;
using LatentCode = Eigen::Matrix3Xd;
// P x 3 per-pixel colours, pixel index p = row * width + col.
using RgbArray = Eigen::Matrix<double, Eigen::Dynamic, 3>;

// Equirectangular sampling of the sphere, y-up.
//
// Pixel (row i, col j) sits at its centre: theta = pi (i + 0.5) / H measured
// from +y, phi = 2 pi (j + 0.5) / W, and
//   d = (sin(theta) sin(phi), cos(theta), sin(theta) cos(phi)).
// Poles are never sampled, so every sin weight is strictly positive.
struct DirectionGrid {
  int height = 0;
  int width = 0;
  Eigen::Matrix<double, Eigen::Dynamic, 3> directions;  // P x 3
  Eigen::VectorXd sin_weights;                            // P

  std::size_t size() const { return static_cast<std::size_t>(sin_weights.size()); }
  Direction direction(std::size_t p) const { return directions.row(static_cast<Eigen::Index>(p)).transpose(); }

  // Solid angle of pixel p: sin(theta) * (pi / H) * (2 pi / W).
  double solid_angle(std::size_t p) const;
};

DirectionGrid equirect_grid(int height);

// Polar angle of pixel row i for a grid of the given height.
double row_theta(int row, int height);
double col_phi(int col, int width);

// Rotation about the vertical axis. R_y(psi) maps azimuth phi to phi + psi.
class YRotation {
 public:
  YRotation() = default;
  explicit YRotation(double angle) : angle_(angle) {}

  double angle() const { return angle_; }
  Eigen::Matrix3d matrix() const;
  YRotation inverse() const { return YRotation(-angle_); }
  YRotation compose(const YRotation& other) const { return YRotation(angle_ + other.angle_); }

 private:
  double angle_ = 0.0;
};

Direction rotate_direction(const YRotation& r, const Direction& d);
LatentCode rotate_latent(const YRotation& r, const LatentCode& z);

}  // namespace reni
