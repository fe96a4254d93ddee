#pragma once

#include "reni/equivariant.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace reni {

inline constexpr double kDefaultOmega0 = 30.0;

struct FieldArchitecture {
  int input_width = 0;
  int hidden_layers = 5;  // sine layers; one linear output layer follows
  int hidden_width = 128;
  int output_width = 3;
  double omega0 = kDefaultOmega0;

  int linear_layers() const { return hidden_layers + 1; }
  int fan_in(int layer) const { return layer == 0 ? input_width : hidden_width; }
  int fan_out(int layer) const { return layer == hidden_layers ? output_width : hidden_width; }
  Eigen::Index parameter_count() const;
  void validate() const;
};

// All weights and biases in one flat vector so optimizers and gradients share
// a layout. Layer k stores W_k (fan_out x fan_in, column-major) then b_k.
class FieldParams {
 public:
  FieldParams() = default;
  explicit FieldParams(const FieldArchitecture& arch);

  const FieldArchitecture& arch() const { return arch_; }
  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }

  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;

  Eigen::Index weight_offset(int layer) const { return offsets_[static_cast<std::size_t>(layer)]; }
  Eigen::Index bias_offset(int layer) const;

 private:
  FieldArchitecture arch_;
  Eigen::VectorXd values_;
  std::vector<Eigen::Index> offsets_;
};

// First layer U(-1/fan_in, 1/fan_in); later layers U(+-sqrt(6/fan_in)/omega0);
// biases U(+-1/sqrt(fan_in)). Deterministic in the seed.
FieldParams init_params(const FieldArchitecture& arch, std::uint64_t seed);

// Intermediate values kept for the backward pass.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> layer_inputs;  // h_0 .. h_L, each batch x width
  std::vector<Eigen::MatrixXd> sine_args;     // omega0 (W h + b) per sine layer
};

// inputs: batch x input_width. Returns batch x output_width.
Eigen::MatrixXd forward(const FieldParams& params, const Eigen::MatrixXd& inputs, ForwardCache* cache = nullptr);
Eigen::Vector3d forward(const FieldParams& params, const InvariantFeatures& feats);

struct FieldGradients {
  Eigen::VectorXd params;  // same layout as FieldParams::values(); empty if not requested
  Eigen::MatrixXd inputs;  // batch x input_width
};

FieldGradients backward(const FieldParams& params, const ForwardCache& cache, const Eigen::MatrixXd& upstream,
                        bool want_param_grads = true);

}  // namespace reni
