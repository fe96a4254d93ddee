#pragma once

#include "reni/baselines.hpp"
#include "reni/fitting.hpp"
#include "reni/vad.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace reni {

struct Material {
  Eigen::Vector3d diffuse{0.8, 0.8, 0.8};  // K_d in [0, 1]^3
  double specular = 0.0;                   // K_s in [0, 1]
  double shininess = 32.0;                 // Blinn-Phong exponent n > 0
};

// Unit sphere at the origin seen by an orthographic camera looking down -z;
// pixel (r, c) covers x = 2 (c + 0.5) / S - 1, y = 1 - 2 (r + 0.5) / S.
struct RenderScene {
  int size = 128;
  Material material;

  void validate() const;
};

struct RenderImage {
  int size = 0;
  RgbArray rgb;                        // S^2 x 3, row-major pixels
  std::vector<std::uint8_t> coverage;  // 1 where the sphere is hit

  FloatImage to_float_image() const;
  static RenderImage from_float_image(const FloatImage& image);  // coverage: any channel > 0
};

// (n + 2) / (4 pi (2 - exp(-n / 2)))
double bp_normalization(double shininess);

// Precomputed Riemann-sum light transport from an environment grid to the
// covered sphere pixels. For covered pixel i with normal n_i:
//   L_i = sum_j dOmega_j E_j [ K_d / pi max(0, n.l_j)
//                              + K_s alpha max(0, n.h_j)^n max(0, n.l_j) ]
// Linear in E; apply_transpose gives the gradient w.r.t. E.
class ShadingOperator {
 public:
  ShadingOperator(const RenderScene& scene, const DirectionGrid& env_grid);

  const RenderScene& scene() const { return scene_; }
  const DirectionGrid& env_grid() const { return grid_; }
  const std::vector<Eigen::Index>& covered() const { return covered_; }
  const Eigen::Matrix<double, Eigen::Dynamic, 3>& normals() const { return normals_; }
  bool dense() const { return dense_; }

  // env: P x 3 linear radiance. Returns covered-pixel radiance, C x 3.
  RgbArray apply(const RgbArray& env) const;
  // grad: C x 3 w.r.t. apply(). Returns P x 3.
  RgbArray apply_transpose(const RgbArray& grad) const;

  RenderImage shade(const RgbArray& env) const;
  RenderImage to_image(const RgbArray& covered_rgb) const;
  RgbArray covered_values(const RenderImage& image) const;

  // Forces per-pixel evaluation even when the dense tables would fit.
  static constexpr Eigen::Index kDenseLimit = Eigen::Index{1} << 23;
  ShadingOperator(const RenderScene& scene, const DirectionGrid& env_grid, bool allow_dense);

 private:
  void transport_row(Eigen::Index pixel, double* diffuse, double* specular) const;

  RenderScene scene_;
  DirectionGrid grid_;
  std::vector<Eigen::Index> covered_;
  Eigen::Matrix<double, Eigen::Dynamic, 3> normals_;
  double alpha_ = 0.0;
  bool dense_ = false;
  Eigen::MatrixXd diffuse_;   // C x P, includes dOmega and max(0, n.l)
  Eigen::MatrixXd specular_;  // C x P
};

RenderImage shade(const RenderScene& scene, const EnvironmentMap& env);

// PSNR over covered pixels with the target's maximum as peak.
double render_psnr(const RenderImage& pred, const RenderImage& target);

struct InvertConfig {
  double rho = 1e3;   // cosine weight
  double gamma = 1e-4;
  LrRange lr{1e-2, 1e-4};
  int epochs = 2400;
  int env_height = 64;
  std::optional<LatentCode> init;
};

struct RenderLoss {
  double mse = 0.0;
  double cosine = 0.0;
  double prior = 0.0;
  double total = 0.0;
  LatentCode grad;
  RgbArray rendered;  // C x 3
};

// MSE + rho cosine + gamma |Z|^2 over covered pixels, no sin weighting.
// The decoded field is mapped to radiance without clamping.
RenderLoss render_loss(const Checkpoint& ckpt, const ShadingOperator& op, const RgbArray& target_covered,
                       const LatentCode& z, double rho, double gamma);

struct InvertResult {
  LatentCode z;
  EnvironmentMap env;
  RenderImage render;
  double psnr = 0.0;
  std::vector<double> loss_trace;
};

InvertResult invert_lighting(const Checkpoint& ckpt, const RenderImage& target, const RenderScene& scene,
                             const InvertConfig& cfg);

// Closed-form linear least squares for SH lighting that best reproduces the
// target shading.
SHCoeffs invert_lighting_sh(const ShadingOperator& op, const RenderImage& target, int order);

}  // namespace reni
