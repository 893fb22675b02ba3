#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "camr/core.hpp"

namespace camr {

inline void sgd_step(Vec& params, const Vec& grads, double lr) {
  if (params.size() != grads.size()) throw std::invalid_argument("sgd_step: shape mismatch");
  if (lr <= 0.0) throw std::invalid_argument("sgd_step: lr must be positive");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

/// Bias-corrected first/second moment accumulators for one parameter tensor.
struct AdamState {
  Vec m;
  Vec v;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t size) : m(size, 0.0), v(size, 0.0) {}
};

inline void adam_step(AdamState& state, Vec& params, const Vec& grads, double lr) {
  if (params.size() != grads.size() || state.m.size() != params.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  if (lr <= 0.0) throw std::invalid_argument("adam_step: lr must be positive");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

}  // namespace camr
