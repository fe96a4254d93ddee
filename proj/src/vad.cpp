#include "reni/vad.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace reni {

void VariationalLatent::validate() const {
  if (mean.size() == 0 || mean.size() % 3 != 0) throw std::invalid_argument("latent mean must have length 3N");
  if (log_var.size() != mean.size()) throw std::invalid_argument("latent log variance length mismatch");
  if (!mean.allFinite() || !log_var.allFinite()) throw std::invalid_argument("latent has non-finite entries");
}

LatentCode unflatten_latent(const Eigen::VectorXd& flat) {
  if (flat.size() % 3 != 0) throw std::invalid_argument("flattened latent length must be a multiple of 3");
  return Eigen::Map<const LatentCode>(flat.data(), 3, flat.size() / 3);
}

Eigen::VectorXd flatten_latent(const LatentCode& z) {
  return Eigen::Map<const Eigen::VectorXd>(z.data(), z.size());
}

LatentCode sample_latent_with_noise(const VariationalLatent& v, const Eigen::VectorXd& noise) {
  if (noise.size() != v.mean.size()) throw std::invalid_argument("sample_latent: noise length mismatch");
  const Eigen::VectorXd flat = v.mean.array() + (0.5 * v.log_var.array()).exp() * noise.array();
  return unflatten_latent(flat);
}

LatentCode sample_latent(const VariationalLatent& v, Rng& rng, Eigen::VectorXd* noise) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd eps(v.mean.size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = normal(rng);
  if (noise) *noise = eps;
  return sample_latent_with_noise(v, eps);
}

double kld_loss(const VariationalLatent& v) {
  return -0.5 * (1.0 + v.log_var.array() - v.mean.array().square() - v.log_var.array().exp()).sum();
}

double kld_loss(std::span<const VariationalLatent> latents) {
  double total = 0.0;
  for (const auto& v : latents) total += kld_loss(v);
  return total;
}

double recon_loss(const RgbArray& pred, const RgbArray& target, const Eigen::VectorXd& w) {
  if (pred.rows() != target.rows() || pred.rows() != w.size())
    throw std::invalid_argument("recon_loss: size mismatch");
  const Eigen::VectorXd sq = (pred - target).rowwise().squaredNorm();
  return w.dot(sq) / static_cast<double>(pred.rows());
}

RgbArray recon_loss_grad(const RgbArray& pred, const RgbArray& target, const Eigen::VectorXd& w) {
  const double scale = 2.0 / static_cast<double>(pred.rows());
  return ((pred - target).array().colwise() * (scale * w.array())).matrix();
}

double train_loss(double recon, double kld, double beta, int dimension) {
  return recon + beta / static_cast<double>(dimension) * kld;
}

int TrainConfig::total_epochs() const {
  int total = 0;
  for (const auto& r : schedule) total += r.epochs;
  return total;
}

int TrainConfig::max_height() const {
  int h = 0;
  for (const auto& r : schedule) h = std::max(h, r.height);
  return h;
}

void TrainConfig::validate() const {
  if (latent_count < 1 || latent_count > kMaxLatentCount) throw std::invalid_argument("latent_count must be in [1, 100]");
  if (hidden_layers < 1 || hidden_width < 1) throw std::invalid_argument("network size must be positive");
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  if (schedule.empty()) throw std::invalid_argument("resolution schedule is empty");
  for (const auto& r : schedule)
    if (r.height < 1 || r.epochs < 0) throw std::invalid_argument("bad resolution schedule entry");
  if (total_epochs() < 1) throw std::invalid_argument("resolution schedule has no epochs");
  LrSchedule{network_lr.start, network_lr.end, 1}.validate();
  LrSchedule{latent_lr.start, latent_lr.end, 1}.validate();
  if (!(floor > 0.0)) throw std::invalid_argument("radiance floor must be positive");
  if (stats) stats->validate();
}

void Checkpoint::validate() const {
  config.validate();
  stats.validate();
  if (params.arch().input_width != input_width(config.mode, config.latent_count))
    throw std::invalid_argument("checkpoint: network input width does not match mode and latent count");
  for (const auto& v : latents) {
    v.validate();
    if (v.latent_count() != config.latent_count) throw std::invalid_argument("checkpoint: latent size mismatch");
  }
}

RgbArray decode(const Checkpoint& ckpt, const LatentCode& z, const DirectionGrid& grid) {
  if (z.cols() != ckpt.latent_count()) throw std::invalid_argument("decode: latent count mismatch");
  return forward(ckpt.params, field_inputs(ckpt.mode(), grid.directions, z));
}

EnvironmentMap decode_hdr(const Checkpoint& ckpt, const LatentCode& z, int height) {
  EnvironmentMap map;
  map.grid = equirect_grid(height);
  const RgbArray v = decode(ckpt, z, map.grid).cwiseMax(-1.0).cwiseMin(1.0);
  map.rgb = denormalize_log(v, ckpt.stats);
  return map;
}

TrainStep train_image_step(const FieldParams& params, Equivariance mode, const DirectionGrid& grid,
                           const RgbArray& target, const VariationalLatent& latent, const Eigen::VectorXd& noise,
                           double beta) {
  const LatentCode z = sample_latent_with_noise(latent, noise);
  ForwardCache cache;
  const RgbArray pred = forward(params, field_inputs(mode, grid.directions, z), &cache);

  TrainStep step;
  step.recon = recon_loss(pred, target, grid.sin_weights);
  step.kld = kld_loss(latent);
  const int dim = static_cast<int>(latent.mean.size());
  step.total = train_loss(step.recon, step.kld, beta, dim);

  FieldGradients g = backward(params, cache, recon_loss_grad(pred, target, grid.sin_weights));
  const Eigen::VectorXd dz = flatten_latent(field_inputs_backward(mode, grid.directions, z, g.inputs));
  const double scale = beta / dim;
  const Eigen::ArrayXd half_sigma = (0.5 * latent.log_var.array()).exp() * 0.5;
  step.param_grad = std::move(g.params);
  step.mean_grad = dz + scale * latent.mean;
  step.log_var_grad =
      (dz.array() * noise.array() * half_sigma + scale * 0.5 * (latent.log_var.array().exp() - 1.0)).matrix();
  return step;
}

TrainResult train(std::span<const EnvironmentMap> dataset, const TrainConfig& cfg, std::vector<std::string> ids,
                  const TrainProgress& progress) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  if (ids.empty())
    for (std::size_t i = 0; i < dataset.size(); ++i) ids.push_back("image_" + std::to_string(i));
  if (ids.size() != dataset.size()) throw std::invalid_argument("train: one id per image required");
  for (const auto& map : dataset) {
    map.validate();
    for (const auto& r : cfg.schedule)
      if (map.height() % r.height != 0)
        throw std::invalid_argument("train: schedule height " + std::to_string(r.height) +
                                    " does not divide image height " + std::to_string(map.height()));
  }

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.config = cfg;
  ckpt.image_ids = ids;
  ckpt.stats = cfg.stats ? *cfg.stats : compute_stats(dataset, cfg.floor);

  FieldArchitecture arch;
  arch.input_width = input_width(cfg.mode, cfg.latent_count);
  arch.hidden_layers = cfg.hidden_layers;
  arch.hidden_width = cfg.hidden_width;
  arch.omega0 = cfg.omega0;
  ckpt.params = init_params(arch, cfg.seed);

  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int dim = cfg.dimension();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    VariationalLatent v{Eigen::VectorXd(dim), Eigen::VectorXd(dim)};
    for (int j = 0; j < dim; ++j) v.mean[j] = normal(rng);
    for (int j = 0; j < dim; ++j) v.log_var[j] = -5.0 + normal(rng);
    ckpt.latents.push_back(std::move(v));
  }

  AdamState net_opt(ckpt.params.values().size());
  std::vector<AdamState> latent_opt(dataset.size(), AdamState(2 * dim));
  const LrSchedule net_lr{cfg.network_lr.start, cfg.network_lr.end, cfg.total_epochs()};
  const LrSchedule lat_lr{cfg.latent_lr.start, cfg.latent_lr.end, cfg.total_epochs()};

  int epoch = 0;
  Eigen::VectorXd noise;
  Eigen::VectorXd latent_vec(2 * dim), latent_grad(2 * dim);
  for (const auto& stage : cfg.schedule) {
    const DirectionGrid grid = equirect_grid(stage.height);
    std::vector<RgbArray> targets;
    for (const auto& map : dataset)
      targets.push_back(normalize_log(downsample(map.rgb, map.height(), stage.height), ckpt.stats, cfg.floor));

    for (int e = 0; e < stage.epochs; ++e, ++epoch) {
      TrainLogRow row;
      row.epoch = epoch;
      row.resolution = stage.height;
      row.lr = lr_at(net_lr, epoch);
      const double latent_rate = lr_at(lat_lr, epoch);
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        VariationalLatent& v = ckpt.latents[i];
        sample_latent(v, rng, &noise);
        const TrainStep step = train_image_step(ckpt.params, cfg.mode, grid, targets[i], v, noise, cfg.beta);
        if (!std::isfinite(step.total) || !step.param_grad.allFinite()) {
          std::ostringstream msg;
          msg << "train: non-finite loss at epoch " << epoch << ", image " << ids[i];
          throw std::runtime_error(msg.str());
        }
        row.recon += step.recon;
        row.kld += step.kld;
        adam_step(net_opt, ckpt.params.values(), step.param_grad, row.lr);
        latent_vec << v.mean, v.log_var;
        latent_grad << step.mean_grad, step.log_var_grad;
        adam_step(latent_opt[i], latent_vec, latent_grad, latent_rate);
        v.mean = latent_vec.head(dim);
        v.log_var = latent_vec.tail(dim);
      }
      result.log.push_back(row);
      if (progress) progress(row);
    }
  }
  return result;
}

void write_train_log_csv(const std::vector<TrainLogRow>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << "epoch,resolution,recon,kld,lr\n";
  out.precision(10);
  for (const auto& r : log) out << r.epoch << ',' << r.resolution << ',' << r.recon << ',' << r.kld << ',' << r.lr << '\n';
}

}  // namespace reni
