#include "reni/baselines.hpp"

#include "reni/optim.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace reni {

namespace {

// sqrt((2l + 1) / (4 pi) * (l - m)! / (l + m)!)
double sh_norm(int l, int m) {
  double ratio = 1.0;
  for (int k = l - m + 1; k <= l + m; ++k) ratio /= k;
  return std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi) * ratio);
}

void fill_sh(const Direction& d, int order, double* out) {
  const double ct = std::clamp(d.y(), -1.0, 1.0);
  const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
  const double phi = std::atan2(d.x(), d.z());
  for (int m = 0; m <= order; ++m) {
    // P_m^m = (2m - 1)!! st^m, then upward recurrence in l.
    double pmm = 1.0;
    for (int k = 1; k <= m; ++k) pmm *= (2.0 * k - 1.0) * st;
    double p_prev = 0.0, p_cur = pmm;
    for (int l = m; l <= order; ++l) {
      if (l == m + 1) {
        p_prev = p_cur;
        p_cur = ct * (2.0 * m + 1.0) * pmm;
      } else if (l > m + 1) {
        const double next = (ct * (2.0 * l - 1.0) * p_cur - (l + m - 1.0) * p_prev) / (l - m);
        p_prev = p_cur;
        p_cur = next;
      }
      const double k = sh_norm(l, m);
      if (m == 0) {
        out[l * l + l] = k * p_cur;
      } else {
        out[l * l + l + m] = std::numbers::sqrt2 * k * std::cos(m * phi) * p_cur;
        out[l * l + l - m] = std::numbers::sqrt2 * k * std::sin(m * phi) * p_cur;
      }
    }
  }
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Eigen::VectorXd sh_basis(const Direction& d, int order) {
  if (order < 0) throw std::invalid_argument("sh_basis: order must be >= 0");
  Eigen::VectorXd out(sh_count(order));
  fill_sh(d, order, out.data());
  return out;
}

Eigen::MatrixXd sh_basis_matrix(const Eigen::Matrix<double, Eigen::Dynamic, 3>& dirs, int order) {
  if (order < 0) throw std::invalid_argument("sh_basis: order must be >= 0");
  // Row-major scratch so each direction fills a contiguous row.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> b(dirs.rows(), sh_count(order));
  for (Eigen::Index p = 0; p < dirs.rows(); ++p) fill_sh(dirs.row(p).transpose(), order, b.row(p).data());
  return b;
}

SHCoeffs sh_fit(const DirectionGrid& grid, const RgbArray& values, int order) {
  if (values.rows() != static_cast<Eigen::Index>(grid.size())) throw std::invalid_argument("sh_fit: size mismatch");
  const Eigen::ArrayXd sw = grid.sin_weights.array().sqrt();
  const Eigen::MatrixXd a = (sh_basis_matrix(grid.directions, order).array().colwise() * sw).matrix();
  const Eigen::MatrixXd rhs = (values.array().colwise() * sw).matrix();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < a.cols())
    throw std::runtime_error("sh_fit: basis is rank deficient on this grid (order " + std::to_string(order) + ")");
  SHCoeffs sh;
  sh.order = order;
  sh.coeffs = qr.solve(rhs);
  return sh;
}

SHCoeffs sh_fit(const EnvironmentMap& map, int order) { return sh_fit(map.grid, map.rgb, order); }

Eigen::Vector3d sh_eval(const SHCoeffs& sh, const Direction& d) {
  return sh.coeffs.transpose() * sh_basis(d, sh.order);
}

RgbArray sh_render(const SHCoeffs& sh, const DirectionGrid& grid) {
  return sh_basis_matrix(grid.directions, sh.order) * sh.coeffs;
}

Eigen::Vector3d sg_eval(const SGLobes& sg, const Direction& d) {
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (const auto& g : sg.lobes) out += g.amplitude * std::exp(g.sharpness * (d.dot(g.axis) - 1.0));
  return out;
}

RgbArray sg_render(const SGLobes& sg, const DirectionGrid& grid) {
  RgbArray out = RgbArray::Zero(static_cast<Eigen::Index>(grid.size()), 3);
  for (const auto& g : sg.lobes) {
    const Eigen::VectorXd e = (g.sharpness * ((grid.directions * g.axis).array() - 1.0)).exp();
    out += e * g.amplitude.transpose();
  }
  return out;
}

std::vector<Direction> fibonacci_sphere(int count) {
  std::vector<Direction> pts;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double y = 1.0 - 2.0 * (i + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double a = golden * i;
    pts.emplace_back(r * std::sin(a), y, r * std::cos(a));
  }
  return pts;
}

SGLobes sg_fit(const DirectionGrid& grid, const RgbArray& values, int k, const SgFitConfig& cfg) {
  if (k < 1) throw std::invalid_argument("sg_fit: need at least one lobe");
  if (values.rows() != static_cast<Eigen::Index>(grid.size())) throw std::invalid_argument("sg_fit: size mismatch");
  if (cfg.iterations < 0) throw std::invalid_argument("sg_fit: iterations must be >= 0");
  const Eigen::Index npix = values.rows();
  const Eigen::VectorXd& w = grid.sin_weights;
  const double wsum = w.sum();
  const double rms = std::sqrt(w.dot(values.rowwise().squaredNorm()) / (3.0 * wsum));
  const double scale = rms > 0.0 ? rms : 1.0;
  const RgbArray target = values / scale;
  const Eigen::RowVector3d mean = (target.array().colwise() * w.array()).colwise().sum() / wsum;

  // Parameter block per lobe: axis(3), log sharpness, raw amplitude(3).
  Eigen::Matrix3Xd axes(3, k);
  Eigen::VectorXd log_sharp(k);
  Eigen::Matrix3Xd raw_amp(3, k);
  const auto init_axes = fibonacci_sphere(k);
  for (int i = 0; i < k; ++i) {
    axes.col(i) = init_axes[static_cast<std::size_t>(i)];
    log_sharp[i] = std::log(cfg.init_sharpness);
    for (int c = 0; c < 3; ++c) raw_amp(c, i) = softplus_inverse(std::max(mean[c], 1e-3));
  }

  const Eigen::Index nparam = 7 * k;
  Eigen::VectorXd theta(nparam), grad(nparam);
  auto pack = [&] {
    for (int i = 0; i < k; ++i) {
      theta.segment<3>(7 * i) = axes.col(i);
      theta[7 * i + 3] = log_sharp[i];
      theta.segment<3>(7 * i + 4) = raw_amp.col(i);
    }
  };
  auto unpack = [&] {
    for (int i = 0; i < k; ++i) {
      axes.col(i) = theta.segment<3>(7 * i).normalized();
      log_sharp[i] = theta[7 * i + 3];
      raw_amp.col(i) = theta.segment<3>(7 * i + 4);
    }
  };
  pack();

  AdamState opt(nparam);
  const LrSchedule schedule{cfg.lr_start, cfg.lr_end, std::max(1, cfg.iterations)};
  Eigen::MatrixXd amp(k, 3);
  for (int it = 0; it < cfg.iterations; ++it) {
    const Eigen::VectorXd sharp = log_sharp.array().exp();
    for (int i = 0; i < k; ++i)
      for (int c = 0; c < 3; ++c) amp(i, c) = softplus(raw_amp(c, i));
    const Eigen::MatrixXd cosines = grid.directions * axes;  // P x k
    const Eigen::MatrixXd e = ((cosines.array() - 1.0).rowwise() * sharp.transpose().array()).exp();
    const RgbArray resid = e * amp - target;
    const double loss = w.dot(resid.rowwise().squaredNorm()) / static_cast<double>(npix);
    if (!std::isfinite(loss)) throw std::runtime_error("sg_fit: non-finite loss at iteration " + std::to_string(it));
    const RgbArray r = (resid.array().colwise() * (2.0 / npix * w.array())).matrix();
    const Eigen::MatrixXd g_amp = e.transpose() * r;                          // k x 3
    const Eigen::MatrixXd q = ((r * amp.transpose()).array() * e.array()).matrix();  // P x k
    const Eigen::VectorXd g_sharp = ((cosines.array() - 1.0) * q.array()).colwise().sum().transpose();
    const Eigen::Matrix3Xd g_axis = grid.directions.transpose() * q;        // 3 x k
    for (int i = 0; i < k; ++i) {
      grad.segment<3>(7 * i) = sharp[i] * g_axis.col(i);
      grad[7 * i + 3] = g_sharp[i] * sharp[i];
      for (int c = 0; c < 3; ++c) grad[7 * i + 4 + c] = g_amp(i, c) * sigmoid(raw_amp(c, i));
    }
    adam_step(opt, theta, grad, lr_at(schedule, it));
    unpack();
    pack();
  }

  SGLobes out;
  for (int i = 0; i < k; ++i) {
    SphericalGaussian g;
    g.axis = axes.col(i);
    g.sharpness = std::exp(log_sharp[i]);
    for (int c = 0; c < 3; ++c) g.amplitude[c] = scale * softplus(raw_amp(c, i));
    out.lobes.push_back(g);
  }
  return out;
}

DimensionPlan dimension_plan(int dimension) {
  if (dimension < 3 || dimension % 3 != 0)
    throw std::invalid_argument("dimension_plan: D = " + std::to_string(dimension) + " is not 3 (l + 1)^2");
  const int bands = static_cast<int>(std::lround(std::sqrt(dimension / 3.0)));
  if (bands * bands * 3 != dimension)
    throw std::invalid_argument("dimension_plan: D = " + std::to_string(dimension) + " is not 3 (l + 1)^2");
  return {bands - 1, (dimension + 5) / 6};
}

nlohmann::json to_json(const SHCoeffs& sh) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < sh.coeffs.rows(); ++i) rows.push_back({sh.coeffs(i, 0), sh.coeffs(i, 1), sh.coeffs(i, 2)});
  return {{"type", "sh"}, {"order", sh.order}, {"coefficients", rows}};
}

nlohmann::json to_json(const SGLobes& sg) {
  nlohmann::json lobes = nlohmann::json::array();
  for (const auto& g : sg.lobes)
    lobes.push_back({{"axis", {g.axis.x(), g.axis.y(), g.axis.z()}},
                     {"sharpness", g.sharpness},
                     {"amplitude", {g.amplitude.x(), g.amplitude.y(), g.amplitude.z()}}});
  return {{"type", "sg"}, {"lobes", lobes}};
}

SHCoeffs sh_from_json(const nlohmann::json& j) {
  SHCoeffs sh;
  sh.order = j.at("order").get<int>();
  const auto& rows = j.at("coefficients");
  if (static_cast<int>(rows.size()) != sh_count(sh.order)) throw std::invalid_argument("sh json: coefficient count");
  sh.coeffs.resize(sh_count(sh.order), 3);
  for (int i = 0; i < sh_count(sh.order); ++i)
    for (int c = 0; c < 3; ++c) sh.coeffs(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].get<double>();
  return sh;
}

SGLobes sg_from_json(const nlohmann::json& j) {
  SGLobes sg;
  for (const auto& l : j.at("lobes")) {
    const auto axis = l.at("axis").get<std::vector<double>>();
    const auto amp = l.at("amplitude").get<std::vector<double>>();
    if (axis.size() != 3 || amp.size() != 3) throw std::invalid_argument("sg json: bad lobe");
    SphericalGaussian g;
    g.axis = Direction(axis[0], axis[1], axis[2]).normalized();
    g.sharpness = l.at("sharpness").get<double>();
    g.amplitude = Eigen::Vector3d(amp[0], amp[1], amp[2]);
    sg.lobes.push_back(g);
  }
  return sg;
}

}  // namespace reni
