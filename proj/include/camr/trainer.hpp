#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "camr/core.hpp"
#include "camr/data.hpp"
#include "camr/encoder.hpp"
#include "camr/loss.hpp"
#include "camr/optimizer.hpp"

namespace camr {

enum class AnchorInit { kRandom, kBaseVectors };
enum class OptimizerKind { kSgd, kAdam };

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double margin = 2.0;    // m
  double min_norm = 1.0;  // p
  AnchorInit anchor_init = AnchorInit::kRandom;
  bool enable_repeller = true;
  bool enable_min_norm = true;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  RngSeed seed;
  std::optional<std::size_t> per_class_cap;  // few-shot sample cap
  std::optional<double> anchor_lr;           // defaults to the shared lr
  double lr_decay = 1.0;                     // multiplicative, 1.0 disables
  std::size_t lr_decay_every = 0;            // epochs between decays, 0 disables
};

struct EpochRecord {
  double attractor = 0.0;
  double repeller = 0.0;
  double min_norm = 0.0;
  double total = 0.0;
  double wall_ms = 0.0;
};

using TrainHistory = std::vector<EpochRecord>;

struct TrainResult {
  EncoderModel model;
  AnchorSet anchors;
  TrainHistory history;
};

inline AnchorSet init_anchors_random(std::size_t t, std::size_t n, double m, double p,
                                     CounterRng& rng) {
  const double scale = std::max(m, p);
  Matrix anchors(t, n);
  for (std::size_t i = 0; i < anchors.size(); ++i) anchors.data()[i] = scale * rng.gaussian();
  return AnchorSet(std::move(anchors), m, p);
}

/// Anchor j = s * basis_j with s = max(sqrt(2) * m, p): pairwise distances are
/// s * sqrt(2) >= 2m and every norm is s >= p, so both hinges start closed.
inline AnchorSet init_anchors_base_vectors(std::size_t t, std::size_t n, double m,
                                           double p) {
  if (t > n)
    throw std::invalid_argument(
        "embedding dimension too small for base-vector initialization");
  const double scale = std::max(std::sqrt(2.0) * m, p);
  Matrix anchors(t, n, 0.0);
  for (std::size_t j = 0; j < t; ++j) anchors(j, j) = scale;
  return AnchorSet(std::move(anchors), m, p);
}

inline LabeledDataset subsample_per_class(const LabeledDataset& dataset, std::size_t cap,
                                          CounterRng& rng) {
  if (cap < 1) throw std::invalid_argument("subsample_per_class: cap must be >= 1");

  std::vector<std::vector<std::size_t>> by_class(dataset.class_count);
  for (std::size_t i = 0; i < dataset.size(); ++i)
    by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(i);

  std::vector<std::size_t> keep;
  for (auto& members : by_class) {
    for (std::size_t i = 0; i < std::min(cap, members.size()); ++i) {
      const std::size_t j = i + rng.uniform_index(members.size() - i);
      std::swap(members[i], members[j]);
      keep.push_back(members[i]);
    }
  }
  std::sort(keep.begin(), keep.end());

  LabeledDataset out;
  out.class_count = dataset.class_count;
  out.features = Matrix(keep.size(), dataset.dim());
  out.labels.resize(keep.size());
  for (std::size_t row = 0; row < keep.size(); ++row) {
    out.labels[row] = dataset.labels[keep[row]];
    const auto src = dataset.features.row(keep[row]);
    std::copy(src.begin(), src.end(), out.features.row(row).begin());
  }
  return out;
}

namespace trainer_detail {

// One optimizer slot per parameter tensor (layer weights, layer biases, anchors).
struct OptimizerBank {
  OptimizerKind kind;
  std::vector<AdamState> states;

  OptimizerBank(OptimizerKind kind, const std::vector<std::size_t>& sizes) : kind(kind) {
    if (kind == OptimizerKind::kAdam)
      for (std::size_t s : sizes) states.emplace_back(s);
  }

  void step(std::size_t slot, Vec& params, const Vec& grads, double lr) {
    if (kind == OptimizerKind::kAdam)
      adam_step(states[slot], params, grads, lr);
    else
      sgd_step(params, grads, lr);
  }
};

}  // namespace trainer_detail

inline TrainResult train(const TrainConfig& config, const LabeledDataset& dataset,
                         const EncoderModel& model) {
  if (config.epochs < 1 || config.batch_size < 1)
    throw std::invalid_argument("train: epochs and batch size must be >= 1");
  if (dataset.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (dataset.dim() != model.input_dim())
    throw std::invalid_argument("dimension mismatch");
  const std::size_t t = dataset.class_count;
  for (int label : dataset.labels)
    if (label < 0 || static_cast<std::size_t>(label) >= t)
      throw std::out_of_range("label out of range");

  CounterRng anchor_rng(config.seed, 1);
  CounterRng shuffle_rng(config.seed, 2);
  CounterRng subsample_rng(config.seed, 3);

  const LabeledDataset* data = &dataset;
  LabeledDataset capped;
  if (config.per_class_cap) {
    capped = subsample_per_class(dataset, *config.per_class_cap, subsample_rng);
    data = &capped;
  }

  TrainResult result;
  result.model = model;
  const std::size_t n = model.embed_dim();
  result.anchors = config.anchor_init == AnchorInit::kBaseVectors
                       ? init_anchors_base_vectors(t, n, config.margin, config.min_norm)
                       : init_anchors_random(t, n, config.margin, config.min_norm,
                                             anchor_rng);

  std::vector<std::size_t> tensor_sizes;
  for (std::size_t l = 0; l < result.model.layer_count(); ++l) {
    tensor_sizes.push_back(result.model.weights[l].size());
    tensor_sizes.push_back(result.model.biases[l].size());
  }
  tensor_sizes.push_back(result.anchors.anchors.size());
  trainer_detail::OptimizerBank bank(config.optimizer, tensor_sizes);
  const std::size_t anchor_slot = tensor_sizes.size() - 1;

  const CamOptions cam_options{config.enable_repeller, config.enable_min_norm};
  const std::size_t count = data->size();
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);

  double lr = config.lr;
  double anchor_lr = config.anchor_lr.value_or(config.lr);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    for (std::size_t i = count; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

    EpochRecord record;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < count; begin += config.batch_size) {
      const std::size_t batch = std::min(config.batch_size, count - begin);
      Matrix embeddings(batch, n);
      std::vector<ForwardTape> tapes(batch);
      std::vector<int> labels(batch);
      for (std::size_t i = 0; i < batch; ++i) {
        const std::size_t row = order[begin + i];
        labels[i] = data->labels[row];
        auto [e, tape] = forward(result.model, data->features.row(row));
        std::copy(e.begin(), e.end(), embeddings.row(i).begin());
        tapes[i] = std::move(tape);
      }

      auto [loss, grads] = cam_batch(embeddings, labels, result.anchors, cam_options);

      ParamGradients total;
      for (std::size_t l = 0; l < result.model.layer_count(); ++l) {
        total.weights.emplace_back(result.model.weights[l].rows(),
                                   result.model.weights[l].cols());
        total.biases.emplace_back(result.model.biases[l].size(), 0.0);
      }
      for (std::size_t i = 0; i < batch; ++i) {
        const ParamGradients g =
            backward(result.model, tapes[i], grads.embedding_grads.row(i));
        for (std::size_t l = 0; l < total.weights.size(); ++l) {
          for (std::size_t k = 0; k < total.weights[l].size(); ++k)
            total.weights[l].data()[k] += g.weights[l].data()[k];
          for (std::size_t k = 0; k < total.biases[l].size(); ++k)
            total.biases[l][k] += g.biases[l][k];
        }
      }

      std::size_t slot = 0;
      for (std::size_t l = 0; l < result.model.layer_count(); ++l) {
        bank.step(slot++, result.model.weights[l].data(), total.weights[l].data(), lr);
        bank.step(slot++, result.model.biases[l], total.biases[l], lr);
      }
      bank.step(anchor_slot, result.anchors.anchors.data(), grads.anchor_grads.data(),
                anchor_lr);

      record.attractor += loss.attractor;
      record.repeller += loss.repeller;
      record.min_norm += loss.min_norm;
      record.total += loss.total;
      ++batches;
    }

    record.attractor /= static_cast<double>(batches);
    record.repeller /= static_cast<double>(batches);
    record.min_norm /= static_cast<double>(batches);
    record.total /= static_cast<double>(batches);
    record.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - epoch_start)
                         .count();
    result.history.push_back(record);

    if (config.lr_decay_every > 0 && (epoch + 1) % config.lr_decay_every == 0) {
      lr *= config.lr_decay;
      anchor_lr *= config.lr_decay;
    }
  }
  return result;
}

}  // namespace camr
