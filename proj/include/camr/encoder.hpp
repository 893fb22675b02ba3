#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "camr/core.hpp"
#include "camr/loss.hpp"

namespace camr {

enum class Activation { kTanh, kRelu };

inline std::string to_string(Activation a) {
  return a == Activation::kTanh ? "tanh" : "relu";
}

inline Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw std::invalid_argument("unknown activation: " + name);
}

/// Feed-forward encoder. Hidden layers apply the activation; the output layer
/// is linear so embeddings can reach anchors anywhere in R^n.
struct EncoderModel {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., embedding dim
  Activation activation = Activation::kTanh;
  std::vector<Matrix> weights;  // weights[l]: layer_sizes[l+1] x layer_sizes[l]
  std::vector<Vec> biases;      // biases[l]: layer_sizes[l+1]

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t embed_dim() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return weights.size(); }
};

/// Per-layer gradients, shape-congruent with EncoderModel.
struct ParamGradients {
  std::vector<Matrix> weights;
  std::vector<Vec> biases;
};

/// Activation record from a forward pass, consumed by backward().
struct ForwardTape {
  std::vector<std::size_t> layer_sizes;
  std::vector<Vec> inputs;           // per layer: the vector fed into W_l
  std::vector<Vec> pre_activations;  // per layer: W_l * input + b_l
};

inline EncoderModel init_encoder(const std::vector<std::size_t>& layer_sizes,
                                 Activation activation, RngSeed seed) {
  if (layer_sizes.size() < 2)
    throw std::invalid_argument("init_encoder: need at least input and output sizes");
  for (std::size_t s : layer_sizes)
    if (s < 1) throw std::invalid_argument("init_encoder: layer sizes must be >= 1");

  EncoderModel model;
  model.layer_sizes = layer_sizes;
  model.activation = activation;
  CounterRng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t fan_in = layer_sizes[l];
    const std::size_t fan_out = layer_sizes[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix w(fan_out, fan_in);
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = scale * rng.gaussian();
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(fan_out, 0.0);
  }
  return model;
}

namespace detail {
inline double apply_act(Activation a, double z) {
  return a == Activation::kTanh ? std::tanh(z) : std::max(0.0, z);
}
inline double act_derivative(Activation a, double z) {
  if (a == Activation::kTanh) {
    const double th = std::tanh(z);
    return 1.0 - th * th;
  }
  return z > 0.0 ? 1.0 : 0.0;
}
}  // namespace detail

inline std::pair<Vec, ForwardTape> forward(const EncoderModel& model,
                                           std::span<const double> x) {
  if (x.size() != model.input_dim()) throw std::invalid_argument("dimension mismatch");
  ForwardTape tape;
  tape.layer_sizes = model.layer_sizes;
  Vec current(x.begin(), x.end());
  const std::size_t layers = model.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    const Matrix& w = model.weights[l];
    const Vec& b = model.biases[l];
    Vec z(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) {
      double sum = b[i];
      for (std::size_t j = 0; j < w.cols(); ++j) sum += w(i, j) * current[j];
      z[i] = sum;
    }
    tape.inputs.push_back(std::move(current));
    tape.pre_activations.push_back(z);
    const bool hidden = l + 1 < layers;
    if (hidden)
      for (auto& v : z) v = detail::apply_act(model.activation, v);
    current = std::move(z);
  }
  return {std::move(current), std::move(tape)};
}

/// Reverse-mode gradients of dL_de . f(x) with respect to the parameters.
inline ParamGradients backward(const EncoderModel& model, const ForwardTape& tape,
                               std::span<const double> dL_de) {
  const std::size_t layers = model.layer_count();
  if (tape.layer_sizes != model.layer_sizes || tape.inputs.size() != layers)
    throw std::invalid_argument("backward: mismatched tape");
  if (dL_de.size() != model.embed_dim())
    throw std::invalid_argument("dimension mismatch");

  ParamGradients grads;
  grads.weights.resize(layers);
  grads.biases.resize(layers);

  Vec delta(dL_de.begin(), dL_de.end());
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& w = model.weights[l];
    const Vec& input = tape.inputs[l];
    Matrix dw(w.rows(), w.cols());
    for (std::size_t i = 0; i < w.rows(); ++i)
      for (std::size_t j = 0; j < w.cols(); ++j) dw(i, j) = delta[i] * input[j];
    grads.weights[l] = std::move(dw);
    grads.biases[l] = delta;

    if (l == 0) break;
    Vec prev(w.cols(), 0.0);
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < w.rows(); ++i) sum += w(i, j) * delta[i];
      prev[j] = sum * detail::act_derivative(model.activation, tape.pre_activations[l - 1][j]);
    }
    delta = std::move(prev);
  }
  return grads;
}

/// Perturbs every parameter by +-step and compares the numeric derivative of
/// attractor_loss(forward(x)) against backward(). Returns the worst error:
/// relative where the gradients are sizable, absolute where both sides vanish.
inline double finite_diff_check(EncoderModel model, std::span<const double> x,
                                const AnchorSet& anchors, int label, double step) {
  if (step <= 0.0) throw std::invalid_argument("finite_diff_check: step must be > 0");

  const auto loss_at = [&]() {
    const auto [e, tape] = forward(model, x);
    return attractor_loss(e, anchors, label);
  };

  const auto [e, tape] = forward(model, x);
  const auto attr = attractor_grad(e, anchors, label);
  const ParamGradients analytic = backward(model, tape, attr.embedding_grad);

  double worst = 0.0;
  const auto compare = [&](double analytic_g, double& param) {
    const double saved = param;
    param = saved + step;
    const double plus = loss_at();
    param = saved - step;
    const double minus = loss_at();
    param = saved;
    const double numeric = (plus - minus) / (2.0 * step);
    const double diff = std::abs(analytic_g - numeric);
    const double denom = std::max(std::abs(analytic_g), std::abs(numeric));
    worst = std::max(worst, denom > 1e-8 ? diff / denom : diff);
  };

  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    for (std::size_t i = 0; i < model.weights[l].size(); ++i)
      compare(analytic.weights[l].data()[i], model.weights[l].data()[i]);
    for (std::size_t i = 0; i < model.biases[l].size(); ++i)
      compare(analytic.biases[l][i], model.biases[l][i]);
  }
  return worst;
}

}  // namespace camr
