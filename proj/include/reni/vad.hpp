#pragma once

#include "reni/equivariant.hpp"
#include "reni/hdrio.hpp"
#include "reni/optim.hpp"
#include "reni/siren.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace reni {

using Rng = std::mt19937_64;

// Per-image Gaussian over vec(Z), vec index 3n + r holding Z(r, n).
struct VariationalLatent {
  Eigen::VectorXd mean;     // 3N
  Eigen::VectorXd log_var;  // 3N

  int latent_count() const { return static_cast<int>(mean.size() / 3); }
  void validate() const;
};

LatentCode unflatten_latent(const Eigen::VectorXd& flat);
Eigen::VectorXd flatten_latent(const LatentCode& z);

// vec(Z) = mean + exp(log_var / 2) * eps with eps ~ N(0, I). The noise used
// is written to *noise when given.
LatentCode sample_latent(const VariationalLatent& v, Rng& rng, Eigen::VectorXd* noise = nullptr);
LatentCode sample_latent_with_noise(const VariationalLatent& v, const Eigen::VectorXd& noise);

// -1/2 sum (1 + log var - mean^2 - var)
double kld_loss(const VariationalLatent& v);
double kld_loss(std::span<const VariationalLatent> latents);

// (1/P) sum_j w_j |pred_j - target_j|^2
double recon_loss(const RgbArray& pred, const RgbArray& target, const Eigen::VectorXd& sin_weights);
RgbArray recon_loss_grad(const RgbArray& pred, const RgbArray& target, const Eigen::VectorXd& sin_weights);

// recon + (beta / D) kld
double train_loss(double recon, double kld, double beta, int dimension);

struct Resolution {
  int height = 16;
  int epochs = 800;
};

struct LrRange {
  double start = 1e-5;
  double end = 1e-7;
};

struct TrainConfig {
  Equivariance mode = Equivariance::SO2;
  int latent_count = 9;
  int hidden_layers = 5;
  int hidden_width = 128;
  double omega0 = kDefaultOmega0;
  double beta = 1e-4;
  std::vector<Resolution> schedule{{16, 800}, {32, 800}, {64, 400}, {128, 400}};
  LrRange network_lr{1e-5, 1e-7};
  LrRange latent_lr{1e-5, 1e-7};
  std::uint64_t seed = 0;
  double floor = kRadianceFloor;
  // Normalisation range to use instead of the dataset's own extrema.
  std::optional<NormStats> stats;

  int dimension() const { return 3 * latent_count; }
  int total_epochs() const;
  int max_height() const;
  void validate() const;
};

struct Checkpoint {
  TrainConfig config;
  FieldParams params;
  NormStats stats;
  std::vector<VariationalLatent> latents;
  std::vector<std::string> image_ids;

  Equivariance mode() const { return config.mode; }
  int latent_count() const { return config.latent_count; }
  void validate() const;
};

// Field output in the normalised log domain, one row per grid direction.
RgbArray decode(const Checkpoint& ckpt, const LatentCode& z, const DirectionGrid& grid);
// Clamps to [-1, 1] and maps back to linear HDR radiance.
EnvironmentMap decode_hdr(const Checkpoint& ckpt, const LatentCode& z, int height);

// Loss and gradients of one image's term in the training objective for a
// fixed reparameterisation noise.
struct TrainStep {
  double recon = 0.0;
  double kld = 0.0;
  double total = 0.0;
  Eigen::VectorXd param_grad;
  Eigen::VectorXd mean_grad;
  Eigen::VectorXd log_var_grad;
};

TrainStep train_image_step(const FieldParams& params, Equivariance mode, const DirectionGrid& grid,
                           const RgbArray& target, const VariationalLatent& latent, const Eigen::VectorXd& noise,
                           double beta);

struct TrainLogRow {
  int epoch = 0;
  int resolution = 0;
  double recon = 0.0;  // summed over images
  double kld = 0.0;    // summed over images
  double lr = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainLogRow> log;
};

using TrainProgress = std::function<void(const TrainLogRow&)>;

TrainResult train(std::span<const EnvironmentMap> dataset, const TrainConfig& cfg,
                  std::vector<std::string> image_ids = {}, const TrainProgress& progress = {});

void write_train_log_csv(const std::vector<TrainLogRow>& log, const std::filesystem::path& path);

}  // namespace reni
