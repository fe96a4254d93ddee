#include "reni/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace reni {

PixelMask PixelMask::full(int height) {
  return {height, std::vector<std::uint8_t>(static_cast<std::size_t>(2 * height) * height, 1)};
}

std::size_t PixelMask::count() const {
  return static_cast<std::size_t>(std::count(observed.begin(), observed.end(), std::uint8_t{1}));
}

void PixelMask::validate() const {
  if (observed.size() != static_cast<std::size_t>(2 * height) * height)
    throw std::invalid_argument("pixel mask size does not match its height");
  if (count() == 0) throw std::invalid_argument("pixel mask has no observed pixels");
}

PixelMask downsample(const PixelMask& mask, int height) {
  if (height == mask.height) return mask;
  if (height < 1 || mask.height % height != 0) throw std::invalid_argument("mask downsample: height must divide");
  const int f = mask.height / height;
  const int src_w = 2 * mask.height;
  PixelMask out{height, std::vector<std::uint8_t>(static_cast<std::size_t>(2 * height) * height, 0)};
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < 2 * height; ++j) {
      int hits = 0;
      for (int di = 0; di < f; ++di)
        for (int dj = 0; dj < f; ++dj)
          hits += mask.observed[static_cast<std::size_t>(i * f + di) * src_w + j * f + dj];
      out.observed[static_cast<std::size_t>(i) * 2 * height + j] = 2 * hits >= f * f ? 1 : 0;
    }
  return out;
}

PixelMask mask_from_image(const FloatImage& image) {
  if (image.width != 2 * image.height) throw std::invalid_argument("mask is not equirectangular");
  PixelMask mask{image.height, std::vector<std::uint8_t>(static_cast<std::size_t>(image.width) * image.height, 0)};
  for (std::size_t p = 0; p < mask.observed.size(); ++p) {
    double sum = 0.0;
    for (int c = 0; c < image.channels; ++c) sum += image.data[p * image.channels + c];
    mask.observed[p] = sum / image.channels > 0.5 ? 1 : 0;
  }
  return mask;
}

namespace {

void check_shapes(const RgbArray& pred, const RgbArray& target, const Eigen::VectorXd& w, const PixelMask& mask) {
  if (pred.rows() != target.rows() || pred.rows() != w.size() ||
      static_cast<std::size_t>(pred.rows()) != mask.observed.size())
    throw std::invalid_argument("masked loss: size mismatch");
}

}  // namespace

double masked_recon_loss(const RgbArray& pred, const RgbArray& target, const Eigen::VectorXd& w,
                         const PixelMask& mask, RgbArray* grad) {
  check_shapes(pred, target, w, mask);
  const double count = static_cast<double>(mask.count());
  if (count == 0) throw std::invalid_argument("masked loss: empty mask");
  if (grad) *grad = RgbArray::Zero(pred.rows(), 3);
  double total = 0.0;
  for (Eigen::Index p = 0; p < pred.rows(); ++p) {
    if (!mask.observed[static_cast<std::size_t>(p)]) continue;
    const Eigen::RowVector3d r = pred.row(p) - target.row(p);
    total += w[p] * r.squaredNorm();
    if (grad) grad->row(p) = (2.0 * w[p] / count) * r;
  }
  return total / count;
}

double cosine_loss(const RgbArray& pred, const RgbArray& target, const Eigen::VectorXd& w, const PixelMask& mask,
                   RgbArray* grad) {
  constexpr double eps = 1e-8;
  check_shapes(pred, target, w, mask);
  const double count = static_cast<double>(mask.count());
  if (count == 0) throw std::invalid_argument("masked loss: empty mask");
  if (grad) *grad = RgbArray::Zero(pred.rows(), 3);
  double total = 0.0;
  for (Eigen::Index p = 0; p < pred.rows(); ++p) {
    if (!mask.observed[static_cast<std::size_t>(p)]) continue;
    const Eigen::RowVector3d a = pred.row(p), b = target.row(p);
    const double na = a.norm(), nb = b.norm();
    const double denom = na * nb + eps;
    const double dot = a.dot(b);
    total += w[p] * (1.0 - dot / denom);
    if (grad) {
      Eigen::RowVector3d d = b / denom;
      if (na > 0.0) d -= (dot * nb / (na * denom * denom)) * a;
      grad->row(p) = -(w[p] / count) * d;
    }
  }
  return total / count;
}

double psnr(const RgbArray& pred, const RgbArray& target, double peak) {
  if (pred.rows() != target.rows() || pred.rows() == 0) throw std::invalid_argument("psnr: size mismatch");
  const double mse = (pred - target).squaredNorm() / static_cast<double>(pred.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

FitLoss fit_loss(const FieldParams& params, Equivariance mode, const DirectionGrid& grid, const RgbArray& target,
                 const PixelMask& mask, const LatentCode& z, double rho, double gamma) {
  ForwardCache cache;
  const RgbArray pred = forward(params, field_inputs(mode, grid.directions, z), &cache);
  FitLoss loss;
  RgbArray g_recon, g_cos;
  loss.recon = masked_recon_loss(pred, target, grid.sin_weights, mask, &g_recon);
  loss.cosine = cosine_loss(pred, target, grid.sin_weights, mask, &g_cos);
  loss.prior = prior_loss(z);
  loss.total = loss.recon + rho * loss.cosine + gamma * loss.prior;
  const RgbArray upstream = g_recon + rho * g_cos;
  const FieldGradients g = backward(params, cache, upstream, false);
  loss.grad = field_inputs_backward(mode, grid.directions, z, g.inputs) + 2.0 * gamma * z;
  return loss;
}

std::vector<Resolution> fit_schedule(const Checkpoint& ckpt, const FitConfig& cfg, int target_height) {
  std::vector<Resolution> stages = cfg.schedule.empty() ? ckpt.config.schedule : cfg.schedule;
  for (auto& s : stages) {
    s.height = std::min(s.height, target_height);
    if (target_height % s.height != 0)
      throw std::invalid_argument("fit: schedule height " + std::to_string(s.height) + " does not divide target height " +
                                  std::to_string(target_height));
  }
  int total = 0;
  for (const auto& s : stages) total += s.epochs;
  if (total < 1) throw std::invalid_argument("fit: schedule has no epochs");
  return stages;
}

FitResult fit(const Checkpoint& ckpt, const EnvironmentMap& target, const PixelMask& mask, const FitConfig& cfg) {
  target.validate();
  mask.validate();
  if (mask.height != target.height()) throw std::invalid_argument("fit: mask and target heights differ");
  if (!(cfg.rho >= 0.0) || !(cfg.gamma >= 0.0)) throw std::invalid_argument("fit: rho and gamma must be >= 0");

  const auto stages = fit_schedule(ckpt, cfg, target.height());
  int total_epochs = 0;
  for (const auto& s : stages) total_epochs += s.epochs;
  const LrSchedule schedule{cfg.lr.start, cfg.lr.end, total_epochs};
  schedule.validate();

  FitResult result;
  LatentCode z = cfg.init ? *cfg.init : LatentCode::Zero(3, ckpt.latent_count());
  if (z.cols() != ckpt.latent_count()) throw std::invalid_argument("fit: initial latent has the wrong size");
  check_latent(z);

  AdamState opt(z.size());
  int epoch = 0;
  for (const auto& stage : stages) {
    const DirectionGrid grid = equirect_grid(stage.height);
    const RgbArray tgt = normalize_log(downsample(target.rgb, target.height(), stage.height), ckpt.stats,
                                       ckpt.config.floor);
    const PixelMask m = downsample(mask, stage.height);
    if (m.count() == 0)
      throw std::invalid_argument("fit: mask has no observed pixels at height " + std::to_string(stage.height));
    for (int e = 0; e < stage.epochs; ++e, ++epoch) {
      const FitLoss loss = fit_loss(ckpt.params, ckpt.mode(), grid, tgt, m, z, cfg.rho, cfg.gamma);
      if (!std::isfinite(loss.total) || !loss.grad.allFinite()) {
        std::ostringstream msg;
        msg << "fit: non-finite loss at epoch " << epoch;
        throw std::runtime_error(msg.str());
      }
      result.trace.push_back({epoch, stage.height, loss.total, loss.recon, loss.cosine, loss.prior});
      Eigen::Map<Eigen::VectorXd> flat(z.data(), z.size());
      const Eigen::Map<const Eigen::VectorXd> g(loss.grad.data(), loss.grad.size());
      adam_step(opt, flat, g, lr_at(schedule, epoch));
    }
  }

  result.z = z;
  const RgbArray tgt = normalize_log(target.rgb, ckpt.stats, ckpt.config.floor);
  result.reconstruction = decode(ckpt, z, target.grid).cwiseMax(-1.0).cwiseMin(1.0);
  result.psnr_all = psnr(result.reconstruction, tgt, kNormalizedPeak);
  std::vector<Eigen::Index> seen, unseen;
  for (std::size_t p = 0; p < mask.observed.size(); ++p)
    (mask.observed[p] ? seen : unseen).push_back(static_cast<Eigen::Index>(p));
  auto subset_psnr = [&](const std::vector<Eigen::Index>& idx) {
    if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
    return psnr(result.reconstruction(idx, Eigen::all), tgt(idx, Eigen::all), kNormalizedPeak);
  };
  result.psnr_observed = subset_psnr(seen);
  result.psnr_unobserved = subset_psnr(unseen);
  return result;
}

Alignment align_rotation(const LatentCode& z1, const LatentCode& z2) {
  if (z1.cols() != z2.cols()) throw std::invalid_argument("align_rotation: latent sizes differ");
  const double norm2 = z2.norm();
  if (norm2 == 0.0) throw std::invalid_argument("align_rotation: reference latent is zero");
  // R_y(a) maps (x, z) to (c x + s z, -s x + c z); maximise tr(Z2^T R Z1).
  const double cos_term = (z1.row(0).cwiseProduct(z2.row(0)) + z1.row(2).cwiseProduct(z2.row(2))).sum();
  const double sin_term = (z1.row(2).cwiseProduct(z2.row(0)) - z1.row(0).cwiseProduct(z2.row(2))).sum();
  Alignment a;
  a.angle = std::atan2(sin_term, cos_term);
  a.relative_error = (rotate_latent(YRotation(a.angle), z1) - z2).norm() / norm2;
  return a;
}

}  // namespace reni
