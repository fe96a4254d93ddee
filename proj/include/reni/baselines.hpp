#pragma once

#include "reni/hdrio.hpp"
#include "reni/sphgeom.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace reni {

// Real spherical harmonics, orthonormal over the sphere, with y as the polar
// axis (cos(theta) = d.y, phi = atan2(d.x, d.z)) and no Condon-Shortley phase:
//   Y_l^0  = K_l^0 P_l^0(cos theta)
//   Y_l^m  = sqrt(2) K_l^m cos(m phi) P_l^m(cos theta),   m > 0
//   Y_l^-m = sqrt(2) K_l^m sin(m phi) P_l^m(cos theta),   m > 0
// Coefficient index l^2 + l + m.
inline int sh_count(int order) { return (order + 1) * (order + 1); }
Eigen::VectorXd sh_basis(const Direction& d, int order);
Eigen::MatrixXd sh_basis_matrix(const Eigen::Matrix<double, Eigen::Dynamic, 3>& directions, int order);

struct SHCoeffs {
  int order = 0;
  Eigen::Matrix<double, Eigen::Dynamic, 3> coeffs;  // sh_count(order) x RGB

  int dimension() const { return 3 * sh_count(order); }
};

// sin(theta)-weighted linear least squares, one solve shared by all channels.
SHCoeffs sh_fit(const DirectionGrid& grid, const RgbArray& values, int order);
SHCoeffs sh_fit(const EnvironmentMap& map, int order);
Eigen::Vector3d sh_eval(const SHCoeffs& sh, const Direction& d);
RgbArray sh_render(const SHCoeffs& sh, const DirectionGrid& grid);

// G(d) = amplitude * exp(sharpness * (<d, axis> - 1))
struct SphericalGaussian {
  Direction axis = Direction::UnitY();
  double sharpness = 1.0;
  Eigen::Vector3d amplitude = Eigen::Vector3d::Zero();
};

struct SGLobes {
  std::vector<SphericalGaussian> lobes;

  int dimension() const { return 6 * static_cast<int>(lobes.size()); }
};

Eigen::Vector3d sg_eval(const SGLobes& sg, const Direction& d);
RgbArray sg_render(const SGLobes& sg, const DirectionGrid& grid);

struct SgFitConfig {
  int iterations = 1500;
  double lr_start = 5e-2;
  double lr_end = 1e-3;
  double init_sharpness = 10.0;
};

// Adam on sin(theta)-weighted MSE. Axes renormalised after every step,
// sharpness log-parameterised, amplitudes through softplus. Targets are
// rescaled to unit weighted RMS during the fit.
SGLobes sg_fit(const DirectionGrid& grid, const RgbArray& values, int lobe_count, const SgFitConfig& cfg = {});

std::vector<Direction> fibonacci_sphere(int count);

struct DimensionPlan {
  int sh_order = 0;
  int sg_lobes = 0;

  int sg_dimension() const { return 6 * sg_lobes; }
};

// D = 3 (order + 1)^2 must hold exactly; SG uses ceil(D / 6) lobes.
DimensionPlan dimension_plan(int dimension);

nlohmann::json to_json(const SHCoeffs& sh);
nlohmann::json to_json(const SGLobes& sg);
SHCoeffs sh_from_json(const nlohmann::json& j);
SGLobes sg_from_json(const nlohmann::json& j);

}  // namespace reni
