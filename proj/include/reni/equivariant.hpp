#pragma once

#include "reni/sphgeom.hpp"

#include <Eigen/Core>

#include <string>
#include <string_view>

namespace reni {

// Which rotation group the network inputs are invariant to.
enum class Equivariance { SO3, SO2, None };

std::string to_string(Equivariance mode);
Equivariance parse_equivariance(std::string_view name);

inline constexpr int kMaxLatentCount = 100;

struct InvariantFeatures {
  Eigen::VectorXd dir_feat;
  Eigen::VectorXd cond_feat;
  Equivariance mode = Equivariance::SO2;
};

// SO3: N and N^2.  SO2: N + 2 and N + N^2.  None: 3 and 3N.
int dir_feature_size(Equivariance mode, int latent_count);
int cond_feature_size(Equivariance mode, int latent_count);
inline int input_width(Equivariance mode, int latent_count) {
  return dir_feature_size(mode, latent_count) + cond_feature_size(mode, latent_count);
}

// d' = Z^T d, Z' = vec(Z^T Z) row-major.
InvariantFeatures transform_so3(const Direction& d, const LatentCode& z);

// With S_xz selecting (x, z) and s_y selecting y:
//   d' = (s_y d, (S_xz Z)^T (S_xz d), |S_xz d|)
//   Z' = (s_y Z, vec((S_xz Z)^T (S_xz Z)))
InvariantFeatures transform_so2(const Direction& d, const LatentCode& z);

// Raw pass-through: d' = d, Z' = vec(Z) with index 3n + r.
InvariantFeatures transform_none(const Direction& d, const LatentCode& z);

InvariantFeatures transform(Equivariance mode, const Direction& d, const LatentCode& z);

// Batched forms. Row p of the result is concat(dir_feat, cond_feat) for
// direction p, ready to feed the field.
Eigen::MatrixXd field_inputs(Equivariance mode, const Eigen::Matrix<double, Eigen::Dynamic, 3>& directions,
                             const LatentCode& z);

// Pulls a gradient w.r.t. field_inputs (same shape) back to the latent code.
LatentCode field_inputs_backward(Equivariance mode, const Eigen::Matrix<double, Eigen::Dynamic, 3>& directions,
                                 const LatentCode& z, const Eigen::MatrixXd& input_grads);

void check_latent(const LatentCode& z);

}  // namespace reni
