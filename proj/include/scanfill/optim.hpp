#ifndef SCANFILL_OPTIM_HPP
#define SCANFILL_OPTIM_HPP

#include <cmath>

#include "scanfill/tensor.hpp"

namespace scanfill {

template <typename T>
struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<T>> m;  // one slot per parameter
  std::vector<std::vector<T>> v;
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-8);
};

struct AdamStepResult {
  bool applied = true;       // false when a non-finite gradient skipped the step
  std::size_t bad_param = 0; // index of the offending parameter when skipped
};

// Standard Adam update over a fixed parameter list. A non-finite gradient
// anywhere skips the whole step and reports which parameter tripped it.
template <typename T>
AdamStepResult adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state,
                         T lr) {
  if (state.m.size() != params.size()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].numel(), T(0));
      state.v[i].assign(params[i].numel(), T(0));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad())
      shape_error("adam_step: parameter " + std::to_string(i) + " has no grad");
    for (T g : params[i].grad())
      if (!std::isfinite(g)) return {false, i};
  }
  state.step += 1;
  const T bc1 = T(1) - std::pow(state.beta1, static_cast<T>(state.step));
  const T bc2 = T(1) - std::pow(state.beta2, static_cast<T>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data();
    const auto& g = params[i].grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = state.beta1 * m[j] + (T(1) - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (T(1) - state.beta2) * g[j] * g[j];
      const T mhat = m[j] / bc1;
      const T vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
  return {};
}

// Per-epoch learning rate. Exponential mode multiplies by
// decay_factor^(-1/horizon) each epoch, so the total decay over the run
// equals decay_factor.
struct LrSchedule {
  enum class Mode { kConstant, kExponentialDecay };
  double base_lr = 1e-4;
  Mode mode = Mode::kConstant;
  double decay_factor = 5.0;
  std::int64_t horizon = 1;

  double lr(std::int64_t epoch) const {
    if (mode == Mode::kConstant) return base_lr;
    const double per_epoch = std::pow(decay_factor, -1.0 / static_cast<double>(horizon));
    return base_lr * std::pow(per_epoch, static_cast<double>(epoch));
  }
};

}  // namespace scanfill

#endif  // SCANFILL_OPTIM_HPP
