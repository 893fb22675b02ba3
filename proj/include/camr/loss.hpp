#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "camr/core.hpp"

namespace camr {

/// Learnable class anchors c_1..c_t with the repeller margin m and the
/// minimum anchor norm p.
struct AnchorSet {
  Matrix anchors;          // t x n
  double margin = 2.0;     // m
  double min_norm = 1.0;   // p

  AnchorSet() = default;
  AnchorSet(Matrix a, double m, double p)
      : anchors(std::move(a)), margin(m), min_norm(p) {
    if (anchors.rows() < 1 || anchors.cols() < 1)
      throw std::invalid_argument("AnchorSet: need at least one anchor and one dimension");
    if (margin <= 0.0) throw std::invalid_argument("AnchorSet: margin must be positive");
    if (min_norm < 0.0) throw std::invalid_argument("AnchorSet: min norm must be >= 0");
  }

  std::size_t class_count() const { return anchors.rows(); }
  std::size_t dim() const { return anchors.cols(); }
};

struct LossBreakdown {
  double attractor = 0.0;
  double repeller = 0.0;
  double min_norm = 0.0;
  double total = 0.0;
};

struct CamGradients {
  Matrix embedding_grads;  // batch x n
  Matrix anchor_grads;     // t x n
};

/// Component switches used by the ablation study. A disabled component
/// contributes zero loss and zero gradient.
struct CamOptions {
  bool enable_repeller = true;
  bool enable_min_norm = true;
};

namespace detail {
inline void check_label(const AnchorSet& anchors, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= anchors.class_count())
    throw std::out_of_range("label out of range");
}
inline void check_dim(const AnchorSet& anchors, std::span<const double> e) {
  if (e.size() != anchors.dim()) throw std::invalid_argument("dimension mismatch");
}
}  // namespace detail

/// Attractor: half the squared distance between an embedding and its class anchor.
inline double attractor_loss(std::span<const double> e, const AnchorSet& anchors,
                             int label) {
  detail::check_label(anchors, label);
  detail::check_dim(anchors, e);
  const auto c = anchors.anchors.row(static_cast<std::size_t>(label));
  double sum = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) {
    const double diff = e[k] - c[k];
    sum += diff * diff;
  }
  return 0.5 * sum;
}

struct AttractorGrad {
  Vec embedding_grad;  // e - c_label
  Vec anchor_grad;     // c_label - e
};

inline AttractorGrad attractor_grad(std::span<const double> e, const AnchorSet& anchors,
                                    int label) {
  detail::check_label(anchors, label);
  detail::check_dim(anchors, e);
  const auto c = anchors.anchors.row(static_cast<std::size_t>(label));
  AttractorGrad g;
  g.embedding_grad.resize(e.size());
  g.anchor_grad.resize(e.size());
  for (std::size_t k = 0; k < e.size(); ++k) {
    g.embedding_grad[k] = e[k] - c[k];
    g.anchor_grad[k] = c[k] - e[k];
  }
  return g;
}

/// Repeller: squared hinge over all ordered anchor pairs closer than 2m.
/// With the 1/2 prefactor every unordered pair contributes one full
/// squared-hinge term.
inline double repeller_loss(const AnchorSet& anchors) {
  const std::size_t t = anchors.class_count();
  const double two_m = 2.0 * anchors.margin;
  double sum = 0.0;
  for (std::size_t y = 0; y < t; ++y) {
    for (std::size_t y2 = 0; y2 < t; ++y2) {
      if (y == y2) continue;
      const double d = l2_distance(anchors.anchors.row(y), anchors.anchors.row(y2));
      const double hinge = std::max(0.0, two_m - d);
      sum += hinge * hinge;
    }
  }
  return 0.5 * sum;
}

/// Exact derivative of repeller_loss with respect to each anchor row. The two
/// ordered terms of every active pair both contribute, hence the factor 2 on
/// each pairwise force.
inline Matrix repeller_grad(const AnchorSet& anchors) {
  const std::size_t t = anchors.class_count();
  const std::size_t n = anchors.dim();
  const double two_m = 2.0 * anchors.margin;
  Matrix grad(t, n, 0.0);
  for (std::size_t y = 0; y < t; ++y) {
    for (std::size_t y2 = y + 1; y2 < t; ++y2) {
      const auto cy = anchors.anchors.row(y);
      const auto cy2 = anchors.anchors.row(y2);
      const double d = l2_distance(cy, cy2);
      if (d >= two_m) continue;
      if (d == 0.0) throw std::runtime_error("repeller singularity");
      const double coeff = -2.0 * (two_m - d) / d;
      for (std::size_t k = 0; k < n; ++k) {
        const double force = coeff * (cy[k] - cy2[k]);
        grad(y, k) += force;
        grad(y2, k) -= force;
      }
    }
  }
  return grad;
}

/// Minimum-norm hinge keeping each anchor at norm >= p.
inline double min_norm_loss(const AnchorSet& anchors) {
  const std::size_t t = anchors.class_count();
  double sum = 0.0;
  for (std::size_t y = 0; y < t; ++y) {
    const double hinge = std::max(0.0, anchors.min_norm - l2_norm(anchors.anchors.row(y)));
    sum += hinge * hinge;
  }
  return 0.5 * sum;
}

inline Matrix min_norm_grad(const AnchorSet& anchors) {
  const std::size_t t = anchors.class_count();
  const std::size_t n = anchors.dim();
  const double p = anchors.min_norm;
  Matrix grad(t, n, 0.0);
  for (std::size_t y = 0; y < t; ++y) {
    const auto cy = anchors.anchors.row(y);
    const double norm = l2_norm(cy);
    if (norm >= p) continue;
    if (norm == 0.0) continue;  // subgradient choice at the origin
    const double coeff = 1.0 - p / norm;
    for (std::size_t k = 0; k < n; ++k) grad(y, k) = coeff * cy[k];
  }
  return grad;
}

/// Joint CAM loss over a mini-batch: mean attractor term plus one repeller
/// and one minimum-norm term. Returns the per-component breakdown together
/// with the gradients for every embedding and every anchor.
inline std::pair<LossBreakdown, CamGradients> cam_batch(
    const Matrix& embeddings, const std::vector<int>& labels, const AnchorSet& anchors,
    CamOptions options = {}) {
  const std::size_t batch = embeddings.rows();
  if (batch == 0) throw std::invalid_argument("cam_batch: empty batch");
  if (labels.size() != batch)
    throw std::invalid_argument("cam_batch: label count does not match batch");
  if (embeddings.cols() != anchors.dim())
    throw std::invalid_argument("dimension mismatch");
  for (int label : labels) detail::check_label(anchors, label);

  const std::size_t t = anchors.class_count();
  const std::size_t n = anchors.dim();
  const double inv_batch = 1.0 / static_cast<double>(batch);

  LossBreakdown loss;
  CamGradients grads;
  grads.embedding_grads = Matrix(batch, n, 0.0);
  grads.anchor_grads = Matrix(t, n, 0.0);

  for (std::size_t i = 0; i < batch; ++i) {
    const auto e = embeddings.row(i);
    const auto c = anchors.anchors.row(static_cast<std::size_t>(labels[i]));
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double diff = e[k] - c[k];
      sum += diff * diff;
      grads.embedding_grads(i, k) = diff * inv_batch;
      grads.anchor_grads(static_cast<std::size_t>(labels[i]), k) -= diff * inv_batch;
    }
    loss.attractor += 0.5 * sum * inv_batch;
  }

  if (options.enable_repeller) {
    loss.repeller = repeller_loss(anchors);
    const Matrix rg = repeller_grad(anchors);
    for (std::size_t i = 0; i < rg.size(); ++i)
      grads.anchor_grads.data()[i] += rg.data()[i];
  }
  if (options.enable_min_norm) {
    loss.min_norm = min_norm_loss(anchors);
    const Matrix ng = min_norm_grad(anchors);
    for (std::size_t i = 0; i < ng.size(); ++i)
      grads.anchor_grads.data()[i] += ng.data()[i];
  }

  loss.total = loss.attractor + loss.repeller + loss.min_norm;
  return {loss, std::move(grads)};
}

}  // namespace camr
