#include "reni/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace reni {

void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads,
               double lr) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size())
    throw std::invalid_argument("adam_step: size mismatch");
  ++state.step;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -= lr * (state.first_moment.array() / c1) / ((state.second_moment.array() / c2).sqrt() + state.eps);
}

void LrSchedule::validate() const {
  if (!(lr_start > 0.0) || !(lr_end > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (total_steps < 1) throw std::invalid_argument("learning-rate schedule needs total_steps >= 1");
}

double lr_at(const LrSchedule& s, std::int64_t step) {
  const double t = static_cast<double>(step) / static_cast<double>(s.total_steps);
  return s.lr_start * std::pow(s.lr_end / s.lr_start, t);
}

}  // namespace reni
