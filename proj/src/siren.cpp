#include "reni/siren.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace reni {

Eigen::Index FieldArchitecture::parameter_count() const {
  Eigen::Index total = 0;
  for (int k = 0; k < linear_layers(); ++k) total += static_cast<Eigen::Index>(fan_out(k)) * (fan_in(k) + 1);
  return total;
}

void FieldArchitecture::validate() const {
  if (input_width < 1 || hidden_layers < 1 || hidden_width < 1 || output_width < 1)
    throw std::invalid_argument("field architecture: all sizes must be positive");
  if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw std::invalid_argument("field architecture: bad omega0");
}

FieldParams::FieldParams(const FieldArchitecture& arch) : arch_(arch) {
  arch_.validate();
  Eigen::Index offset = 0;
  for (int k = 0; k < arch_.linear_layers(); ++k) {
    offsets_.push_back(offset);
    offset += static_cast<Eigen::Index>(arch_.fan_out(k)) * (arch_.fan_in(k) + 1);
  }
  values_ = Eigen::VectorXd::Zero(offset);
}

Eigen::Index FieldParams::bias_offset(int layer) const {
  return weight_offset(layer) + static_cast<Eigen::Index>(arch_.fan_out(layer)) * arch_.fan_in(layer);
}

Eigen::Map<Eigen::MatrixXd> FieldParams::weight(int layer) {
  return {values_.data() + weight_offset(layer), arch_.fan_out(layer), arch_.fan_in(layer)};
}
Eigen::Map<const Eigen::MatrixXd> FieldParams::weight(int layer) const {
  return {values_.data() + weight_offset(layer), arch_.fan_out(layer), arch_.fan_in(layer)};
}
Eigen::Map<Eigen::VectorXd> FieldParams::bias(int layer) {
  return {values_.data() + bias_offset(layer), arch_.fan_out(layer)};
}
Eigen::Map<const Eigen::VectorXd> FieldParams::bias(int layer) const {
  return {values_.data() + bias_offset(layer), arch_.fan_out(layer)};
}

FieldParams init_params(const FieldArchitecture& arch, std::uint64_t seed) {
  FieldParams params(arch);
  std::mt19937_64 rng(seed);
  for (int k = 0; k < arch.linear_layers(); ++k) {
    const double fan_in = arch.fan_in(k);
    const double wb = k == 0 ? 1.0 / fan_in : std::sqrt(6.0 / fan_in) / arch.omega0;
    const double bb = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> wdist(-wb, wb), bdist(-bb, bb);
    auto w = params.weight(k);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = wdist(rng);
    auto b = params.bias(k);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = bdist(rng);
  }
  return params;
}

Eigen::MatrixXd forward(const FieldParams& params, const Eigen::MatrixXd& inputs, ForwardCache* cache) {
  const auto& arch = params.arch();
  if (inputs.cols() != arch.input_width)
    throw std::invalid_argument("field forward: input width " + std::to_string(inputs.cols()) + " != expected " +
                                std::to_string(arch.input_width));
  if (cache) {
    cache->layer_inputs.assign(1, inputs);
    cache->sine_args.clear();
  }
  Eigen::MatrixXd h = inputs;
  for (int k = 0; k < arch.hidden_layers; ++k) {
    Eigen::MatrixXd arg = h * params.weight(k).transpose();
    arg.rowwise() += params.bias(k).transpose();
    arg *= arch.omega0;
    h = arg.array().sin().matrix();
    if (cache) {
      cache->sine_args.push_back(std::move(arg));
      cache->layer_inputs.push_back(h);
    }
  }
  const int last = arch.hidden_layers;
  Eigen::MatrixXd out = h * params.weight(last).transpose();
  out.rowwise() += params.bias(last).transpose();
  return out;
}

Eigen::Vector3d forward(const FieldParams& params, const InvariantFeatures& feats) {
  if (params.arch().output_width != 3) throw std::invalid_argument("field forward: expected RGB output");
  Eigen::MatrixXd x(1, feats.dir_feat.size() + feats.cond_feat.size());
  x << feats.dir_feat.transpose(), feats.cond_feat.transpose();
  return forward(params, x).row(0).transpose();
}

FieldGradients backward(const FieldParams& params, const ForwardCache& cache, const Eigen::MatrixXd& upstream,
                        bool want_param_grads) {
  const auto& arch = params.arch();
  if (cache.layer_inputs.size() != static_cast<std::size_t>(arch.hidden_layers + 1))
    throw std::invalid_argument("field backward: cache does not match the architecture");
  if (upstream.cols() != arch.output_width || upstream.rows() != cache.layer_inputs.front().rows())
    throw std::invalid_argument("field backward: upstream gradient shape mismatch");

  FieldGradients grads;
  FieldParams g;
  if (want_param_grads) g = FieldParams(arch);

  Eigen::MatrixXd delta = upstream;
  for (int k = arch.hidden_layers; k >= 0; --k) {
    const Eigen::MatrixXd& h = cache.layer_inputs[static_cast<std::size_t>(k)];
    if (k < arch.hidden_layers) {
      // d sin(omega0 u) / du = omega0 cos(omega0 u)
      delta.array() *= arch.omega0 * cache.sine_args[static_cast<std::size_t>(k)].array().cos();
    }
    if (want_param_grads) {
      g.weight(k).noalias() = delta.transpose() * h;
      g.bias(k) = delta.colwise().sum().transpose();
    }
    delta = delta * params.weight(k);
  }
  grads.inputs = std::move(delta);
  if (want_param_grads) grads.params = std::move(g.values());
  return grads;
}

}  // namespace reni
