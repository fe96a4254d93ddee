#pragma once

#include "reni/vad.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace reni {

// Observed pixels of an equirectangular grid, row-major like DirectionGrid.
struct PixelMask {
  int height = 0;
  std::vector<std::uint8_t> observed;

  static PixelMask full(int height);
  std::size_t count() const;
  void validate() const;  // needs at least one observed pixel
};

// A coarse pixel is observed when at least half of its block is.
PixelMask downsample(const PixelMask& mask, int height);
PixelMask mask_from_image(const FloatImage& image);  // channel mean > 0.5

// Peak used when reporting PSNR on normalised log values in [-1, 1].
inline constexpr double kNormalizedPeak = 2.0;

// (1/|M|) sum_{j in M} w_j |p_j - t_j|^2; equals recon_loss for a full mask.
double masked_recon_loss(const RgbArray& pred, const RgbArray& target, const Eigen::VectorXd& sin_weights,
                         const PixelMask& mask, RgbArray* grad = nullptr);

// (1/|M|) sum_{j in M} w_j (1 - <p, t> / (|p| |t| + 1e-8))
double cosine_loss(const RgbArray& pred, const RgbArray& target, const Eigen::VectorXd& sin_weights,
                   const PixelMask& mask, RgbArray* grad = nullptr);

inline double prior_loss(const LatentCode& z) { return z.squaredNorm(); }

// 10 log10(peak^2 / MSE); +inf when pred == target.
double psnr(const RgbArray& pred, const RgbArray& target, double peak);

struct FitConfig {
  double rho = 1e-4;
  double gamma = 1e-7;
  LrRange lr{1e-2, 1e-4};
  // Empty: reuse the checkpoint's training schedule, capped at the target height.
  std::vector<Resolution> schedule;
  std::optional<LatentCode> init;  // zeros (the mean map) when absent
};

struct FitLoss {
  double recon = 0.0;
  double cosine = 0.0;
  double prior = 0.0;
  double total = 0.0;
  LatentCode grad;
};

// L_recon + rho L_cosine + gamma L_prior over masked pixels, with dL/dZ.
FitLoss fit_loss(const FieldParams& params, Equivariance mode, const DirectionGrid& grid, const RgbArray& target,
                 const PixelMask& mask, const LatentCode& z, double rho, double gamma);

struct FitTraceRow {
  int epoch = 0;
  int resolution = 0;
  double total = 0.0;
  double recon = 0.0;
  double cosine = 0.0;
  double prior = 0.0;
};

struct FitResult {
  LatentCode z;
  double psnr_observed = 0.0;    // over observed pixels at the target resolution
  double psnr_unobserved = 0.0;  // NaN when the mask is full
  double psnr_all = 0.0;
  RgbArray reconstruction;       // normalised log domain, clamped, target resolution
  std::vector<FitTraceRow> trace;
};

std::vector<Resolution> fit_schedule(const Checkpoint& ckpt, const FitConfig& cfg, int target_height);

// target is linear HDR; it is normalised with the checkpoint's statistics.
FitResult fit(const Checkpoint& ckpt, const EnvironmentMap& target, const PixelMask& mask, const FitConfig& cfg);

struct Alignment {
  double angle = 0.0;
  double relative_error = 0.0;
};

// Closed-form y-rotation minimising |R_y(angle) z1 - z2|_F; error relative to |z2|_F.
Alignment align_rotation(const LatentCode& z1, const LatentCode& z2);

}  // namespace reni
