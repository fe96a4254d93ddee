#include "reni/render.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace reni {

void RenderScene::validate() const {
  if (size < 1) throw std::invalid_argument("render: image size must be positive");
  if ((material.diffuse.array() < 0.0).any() || (material.diffuse.array() > 1.0).any())
    throw std::invalid_argument("render: K_d must lie in [0, 1]");
  if (material.specular < 0.0 || material.specular > 1.0) throw std::invalid_argument("render: K_s must lie in [0, 1]");
  if (!(material.shininess > 0.0)) throw std::invalid_argument("render: shininess must be positive");
}

FloatImage RenderImage::to_float_image() const {
  FloatImage img;
  img.width = img.height = size;
  img.channels = 3;
  img.data.resize(static_cast<std::size_t>(rgb.rows()) * 3);
  for (Eigen::Index p = 0; p < rgb.rows(); ++p)
    for (int c = 0; c < 3; ++c) img.data[static_cast<std::size_t>(p) * 3 + c] = static_cast<float>(rgb(p, c));
  return img;
}

RenderImage RenderImage::from_float_image(const FloatImage& image) {
  if (image.width != image.height || image.channels != 3) throw std::invalid_argument("render image must be square RGB");
  RenderImage out;
  out.size = image.width;
  const Eigen::Index n = static_cast<Eigen::Index>(image.width) * image.height;
  out.rgb.resize(n, 3);
  out.coverage.assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index p = 0; p < n; ++p) {
    for (int c = 0; c < 3; ++c) out.rgb(p, c) = image.data[static_cast<std::size_t>(p) * 3 + c];
    out.coverage[static_cast<std::size_t>(p)] = (out.rgb.row(p).array() > 0.0).any() ? 1 : 0;
  }
  return out;
}

double bp_normalization(double n) {
  return (n + 2.0) / (4.0 * std::numbers::pi * (2.0 - std::exp(-n / 2.0)));
}

ShadingOperator::ShadingOperator(const RenderScene& scene, const DirectionGrid& env_grid)
    : ShadingOperator(scene, env_grid, true) {}

ShadingOperator::ShadingOperator(const RenderScene& scene, const DirectionGrid& env_grid, bool allow_dense)
    : scene_(scene), grid_(env_grid) {
  scene_.validate();
  alpha_ = bp_normalization(scene_.material.shininess);
  const int s = scene_.size;
  std::vector<Eigen::Vector3d> normals;
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c) {
      const double x = 2.0 * (c + 0.5) / s - 1.0;
      const double y = 1.0 - 2.0 * (r + 0.5) / s;
      const double rr = x * x + y * y;
      if (rr >= 1.0) continue;
      covered_.push_back(static_cast<Eigen::Index>(r) * s + c);
      normals.emplace_back(x, y, std::sqrt(1.0 - rr));
    }
  normals_.resize(static_cast<Eigen::Index>(normals.size()), 3);
  for (std::size_t i = 0; i < normals.size(); ++i) normals_.row(static_cast<Eigen::Index>(i)) = normals[i].transpose();

  const Eigen::Index cp = static_cast<Eigen::Index>(covered_.size());
  const Eigen::Index np = static_cast<Eigen::Index>(grid_.size());
  dense_ = allow_dense && cp * np <= kDenseLimit;
  if (dense_) {
    // Row-major scratch filled per pixel, then stored column-major for GEMM.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> d(cp, np), sp(cp, np);
    for (Eigen::Index i = 0; i < cp; ++i) transport_row(i, d.row(i).data(), sp.row(i).data());
    diffuse_ = d;
    specular_ = sp;
  }
}

void ShadingOperator::transport_row(Eigen::Index i, double* diffuse, double* specular) const {
  const Eigen::Vector3d n = normals_.row(i).transpose();
  const Eigen::Vector3d view(0.0, 0.0, 1.0);
  const double shininess = scene_.material.shininess;
  for (std::size_t j = 0; j < grid_.size(); ++j) {
    const Eigen::Vector3d l = grid_.direction(j);
    const double cos_l = n.dot(l);
    if (cos_l <= 0.0) {
      diffuse[j] = specular[j] = 0.0;
      continue;
    }
    const double omega = grid_.solid_angle(j);
    diffuse[j] = omega * cos_l;
    const Eigen::Vector3d half = l + view;
    const double hn = half.norm();
    // l == -view only happens below the horizon of every visible normal.
    const double cos_h = hn > 0.0 ? std::max(0.0, n.dot(half) / hn) : 0.0;
    specular[j] = omega * std::pow(cos_h, shininess) * cos_l;
  }
}

RgbArray ShadingOperator::apply(const RgbArray& env) const {
  if (env.rows() != static_cast<Eigen::Index>(grid_.size())) throw std::invalid_argument("shade: env size mismatch");
  const Eigen::Index cp = static_cast<Eigen::Index>(covered_.size());
  const auto& m = scene_.material;
  const Eigen::RowVector3d kd = m.diffuse.transpose() / std::numbers::pi;
  const double ks = m.specular * alpha_;
  if (dense_) {
    RgbArray out = ((diffuse_ * env).array().rowwise() * kd.array()).matrix();
    if (ks != 0.0) out.noalias() += ks * (specular_ * env);
    return out;
  }
  RgbArray out(cp, 3);
  std::vector<double> d(grid_.size()), s(grid_.size());
  for (Eigen::Index i = 0; i < cp; ++i) {
    transport_row(i, d.data(), s.data());
    const Eigen::Map<const Eigen::RowVectorXd> dr(d.data(), static_cast<Eigen::Index>(d.size()));
    const Eigen::Map<const Eigen::RowVectorXd> sr(s.data(), static_cast<Eigen::Index>(s.size()));
    out.row(i) = (dr * env).cwiseProduct(kd) + ks * (sr * env);
  }
  return out;
}

RgbArray ShadingOperator::apply_transpose(const RgbArray& grad) const {
  if (grad.rows() != static_cast<Eigen::Index>(covered_.size()))
    throw std::invalid_argument("shade backward: gradient size mismatch");
  const auto& m = scene_.material;
  const Eigen::RowVector3d kd = m.diffuse.transpose() / std::numbers::pi;
  const double ks = m.specular * alpha_;
  const RgbArray gd = (grad.array().rowwise() * kd.array()).matrix();
  if (dense_) {
    RgbArray out = diffuse_.transpose() * gd;
    if (ks != 0.0) out.noalias() += ks * (specular_.transpose() * grad);
    return out;
  }
  RgbArray out = RgbArray::Zero(static_cast<Eigen::Index>(grid_.size()), 3);
  std::vector<double> d(grid_.size()), s(grid_.size());
  for (Eigen::Index i = 0; i < grad.rows(); ++i) {
    transport_row(i, d.data(), s.data());
    const Eigen::Map<const Eigen::VectorXd> dc(d.data(), static_cast<Eigen::Index>(d.size()));
    const Eigen::Map<const Eigen::VectorXd> sc(s.data(), static_cast<Eigen::Index>(s.size()));
    out += dc * gd.row(i) + sc * (ks * grad.row(i));
  }
  return out;
}

RenderImage ShadingOperator::to_image(const RgbArray& covered_rgb) const {
  RenderImage img;
  img.size = scene_.size;
  const Eigen::Index n = static_cast<Eigen::Index>(img.size) * img.size;
  img.rgb = RgbArray::Zero(n, 3);
  img.coverage.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t i = 0; i < covered_.size(); ++i) {
    img.rgb.row(covered_[i]) = covered_rgb.row(static_cast<Eigen::Index>(i));
    img.coverage[static_cast<std::size_t>(covered_[i])] = 1;
  }
  return img;
}

RgbArray ShadingOperator::covered_values(const RenderImage& image) const {
  if (image.size != scene_.size) throw std::invalid_argument("render: image size does not match the scene");
  RgbArray out(static_cast<Eigen::Index>(covered_.size()), 3);
  for (std::size_t i = 0; i < covered_.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = image.rgb.row(covered_[i]);
  return out;
}

RenderImage ShadingOperator::shade(const RgbArray& env) const { return to_image(apply(env)); }

RenderImage shade(const RenderScene& scene, const EnvironmentMap& env) {
  return ShadingOperator(scene, env.grid).shade(env.rgb);
}

double render_psnr(const RenderImage& pred, const RenderImage& target) {
  if (pred.size != target.size) throw std::invalid_argument("render_psnr: size mismatch");
  std::vector<Eigen::Index> idx;
  for (std::size_t p = 0; p < target.coverage.size(); ++p)
    if (target.coverage[p]) idx.push_back(static_cast<Eigen::Index>(p));
  if (idx.empty()) throw std::invalid_argument("render_psnr: target covers no pixels");
  const RgbArray t = target.rgb(idx, Eigen::all);
  const double peak = t.maxCoeff();
  if (!(peak > 0.0)) throw std::invalid_argument("render_psnr: target is black");
  return psnr(pred.rgb(idx, Eigen::all), t, peak);
}

RenderLoss render_loss(const Checkpoint& ckpt, const ShadingOperator& op, const RgbArray& target,
                       const LatentCode& z, double rho, double gamma) {
  constexpr double eps = 1e-8;
  const DirectionGrid& grid = op.env_grid();
  ForwardCache cache;
  const RgbArray v = forward(ckpt.params, field_inputs(ckpt.mode(), grid.directions, z), &cache);
  const double span = ckpt.stats.log_max - ckpt.stats.log_min;
  const RgbArray env = ((0.5 * (v.array() + 1.0) * span) + ckpt.stats.log_min).exp().matrix();

  RenderLoss loss;
  loss.rendered = op.apply(env);
  const Eigen::Index count = loss.rendered.rows();
  if (target.rows() != count) throw std::invalid_argument("render_loss: target size mismatch");
  RgbArray g = RgbArray::Zero(count, 3);
  for (Eigen::Index i = 0; i < count; ++i) {
    const Eigen::RowVector3d a = loss.rendered.row(i), b = target.row(i);
    const Eigen::RowVector3d r = a - b;
    loss.mse += r.squaredNorm();
    g.row(i) += (2.0 / count) * r;
    const double na = a.norm(), nb = b.norm();
    const double denom = na * nb + eps;
    const double dot = a.dot(b);
    loss.cosine += 1.0 - dot / denom;
    Eigen::RowVector3d dc = b / denom;
    if (na > 0.0) dc -= (dot * nb / (na * denom * denom)) * a;
    g.row(i) -= (rho / count) * dc;
  }
  loss.mse /= count;
  loss.cosine /= count;
  loss.prior = prior_loss(z);
  loss.total = loss.mse + rho * loss.cosine + gamma * loss.prior;

  const RgbArray g_env = op.apply_transpose(g);
  const RgbArray g_v = (g_env.array() * env.array() * (0.5 * span)).matrix();
  const FieldGradients fg = backward(ckpt.params, cache, g_v, false);
  loss.grad = field_inputs_backward(ckpt.mode(), grid.directions, z, fg.inputs) + 2.0 * gamma * z;
  return loss;
}

InvertResult invert_lighting(const Checkpoint& ckpt, const RenderImage& target, const RenderScene& scene,
                             const InvertConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("invert_lighting: epochs must be >= 1");
  const ShadingOperator op(scene, equirect_grid(cfg.env_height));
  const RgbArray t = op.covered_values(target);
  LatentCode z = cfg.init ? *cfg.init : LatentCode::Zero(3, ckpt.latent_count());
  if (z.cols() != ckpt.latent_count()) throw std::invalid_argument("invert_lighting: initial latent has the wrong size");
  const LrSchedule schedule{cfg.lr.start, cfg.lr.end, cfg.epochs};
  schedule.validate();
  AdamState opt(z.size());
  InvertResult result;
  for (int e = 0; e < cfg.epochs; ++e) {
    const RenderLoss loss = render_loss(ckpt, op, t, z, cfg.rho, cfg.gamma);
    if (!std::isfinite(loss.total) || !loss.grad.allFinite()) {
      std::ostringstream msg;
      msg << "invert_lighting: non-finite loss at epoch " << e;
      throw std::runtime_error(msg.str());
    }
    result.loss_trace.push_back(loss.total);
    Eigen::Map<Eigen::VectorXd> flat(z.data(), z.size());
    const Eigen::Map<const Eigen::VectorXd> g(loss.grad.data(), loss.grad.size());
    adam_step(opt, flat, g, lr_at(schedule, e));
  }
  result.z = z;
  const RgbArray v = decode(ckpt, z, op.env_grid());
  result.env.grid = op.env_grid();
  result.env.rgb = denormalize_log(v, ckpt.stats);
  result.render = op.shade(result.env.rgb);
  result.psnr = render_psnr(result.render, target);
  return result;
}

SHCoeffs invert_lighting_sh(const ShadingOperator& op, const RenderImage& target, int order) {
  const RgbArray t = op.covered_values(target);
  const Eigen::MatrixXd basis = sh_basis_matrix(op.env_grid().directions, order);
  const int nb = sh_count(order);
  const Eigen::Index cp = t.rows();
  // Column k of the per-channel system is the shading of basis function k.
  std::array<Eigen::MatrixXd, 3> systems;
  for (auto& s : systems) s.resize(cp, nb);
  for (int k = 0; k < nb; ++k) {
    RgbArray env(basis.rows(), 3);
    env.col(0) = env.col(1) = env.col(2) = basis.col(k);
    const RgbArray shaded = op.apply(env);
    for (int c = 0; c < 3; ++c) systems[static_cast<std::size_t>(c)].col(k) = shaded.col(c);
  }
  SHCoeffs sh;
  sh.order = order;
  sh.coeffs.resize(nb, 3);
  for (int c = 0; c < 3; ++c) {
    // Channels with zero albedo and no specular give an all-zero system.
    const Eigen::MatrixXd& a = systems[static_cast<std::size_t>(c)];
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
    sh.coeffs.col(c) = cod.solve(t.col(c));
  }
  return sh;
}

}  // namespace reni
