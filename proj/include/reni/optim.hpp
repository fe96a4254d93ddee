#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace reni {

struct AdamState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(Eigen::Index size)
      : first_moment(Eigen::VectorXd::Zero(size)), second_moment(Eigen::VectorXd::Zero(size)) {}
};

// One bias-corrected Adam update, in place.
void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads,
               double lr);

// Geometric interpolation from lr_start at step 0 to lr_end at total_steps.
struct LrSchedule {
  double lr_start = 1e-5;
  double lr_end = 1e-7;
  std::int64_t total_steps = 1;

  void validate() const;
};

double lr_at(const LrSchedule& schedule, std::int64_t step);

}  // namespace reni
