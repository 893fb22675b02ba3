#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "camr/core.hpp"
#include "camr/loss.hpp"

namespace camr {

struct RankedEntry {
  std::uint32_t id = 0;
  double distance = 0.0;
};

/// Ascending by distance; equal distances ordered by ascending id.
using RankedList = std::vector<RankedEntry>;

/// Nearest-anchor classification: argmin over anchors, ties to the lowest id.
inline int classify(const AnchorSet& anchors, std::span<const double> e) {
  if (e.size() != anchors.dim()) throw std::invalid_argument("dimension mismatch");
  int best = 0;
  double best_dist = l2_distance(e, anchors.anchors.row(0));
  for (std::size_t j = 1; j < anchors.class_count(); ++j) {
    const double d = l2_distance(e, anchors.anchors.row(j));
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

/// Gallery index. Items are bucketed by their nearest anchor; queries either
/// scan the whole gallery (brute force) or only the bucket of the nearest
/// anchor (two-stage). Every gallery distance evaluation is counted.
class RetrievalIndex {
 public:
  RetrievalIndex(Matrix embeddings, std::vector<int> labels, AnchorSet anchors)
      : embeddings_(std::move(embeddings)),
        labels_(std::move(labels)),
        anchors_(std::move(anchors)) {
    if (embeddings_.rows() != labels_.size())
      throw std::invalid_argument("dimension mismatch");
    if (embeddings_.rows() > 0 && embeddings_.cols() != anchors_.dim())
      throw std::invalid_argument("dimension mismatch");
    buckets_.resize(anchors_.class_count());
    for (std::size_t i = 0; i < embeddings_.rows(); ++i)
      buckets_[static_cast<std::size_t>(classify(anchors_, embeddings_.row(i)))]
          .push_back(static_cast<std::uint32_t>(i));
  }

  RetrievalIndex(RetrievalIndex&& other) noexcept
      : embeddings_(std::move(other.embeddings_)),
        labels_(std::move(other.labels_)),
        anchors_(std::move(other.anchors_)),
        buckets_(std::move(other.buckets_)),
        comparisons_(other.comparisons_.load()) {}

  std::size_t count() const { return embeddings_.rows(); }
  std::size_t dim() const { return embeddings_.cols(); }
  const std::vector<int>& labels() const { return labels_; }
  const AnchorSet& anchors() const { return anchors_; }
  const std::vector<std::uint32_t>& bucket(std::size_t j) const { return buckets_[j]; }
  std::size_t max_bucket_size() const {
    std::size_t best = 0;
    for (const auto& b : buckets_) best = std::max(best, b.size());
    return best;
  }

  RankedList brute_force_query(std::span<const double> q, std::size_t k) const {
    check_query(q, k);
    RankedList entries(count());
    for (std::size_t i = 0; i < count(); ++i)
      entries[i] = {static_cast<std::uint32_t>(i), l2_distance(q, embeddings_.row(i))};
    comparisons_.fetch_add(count(), std::memory_order_relaxed);
    return take_top(std::move(entries), k);
  }

  RankedList two_stage_query(std::span<const double> q, std::size_t k) const {
    check_query(q, k);
    const int nearest = classify(anchors_, q);
    comparisons_.fetch_add(anchors_.class_count(), std::memory_order_relaxed);

    const auto& bucket = buckets_[static_cast<std::size_t>(nearest)];
    RankedList entries(bucket.size());
    for (std::size_t i = 0; i < bucket.size(); ++i)
      entries[i] = {bucket[i], l2_distance(q, embeddings_.row(bucket[i]))};
    comparisons_.fetch_add(bucket.size(), std::memory_order_relaxed);
    return take_top(std::move(entries), k);
  }

  std::uint64_t reset_and_read_counter() const {
    return comparisons_.exchange(0, std::memory_order_relaxed);
  }

 private:
  void check_query(std::span<const double> q, std::size_t k) const {
    if (q.size() != anchors_.dim() || (count() > 0 && q.size() != dim()))
      throw std::invalid_argument("dimension mismatch");
    if (k < 1) throw std::invalid_argument("k must be >= 1");
  }

  static RankedList take_top(RankedList entries, std::size_t k) {
    const auto by_distance_then_id = [](const RankedEntry& a, const RankedEntry& b) {
      return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
    };
    const std::size_t keep = std::min(k, entries.size());
    std::partial_sort(entries.begin(), entries.begin() + keep, entries.end(),
                      by_distance_then_id);
    entries.resize(keep);
    return entries;
  }

  Matrix embeddings_;
  std::vector<int> labels_;
  AnchorSet anchors_;
  std::vector<std::vector<std::uint32_t>> buckets_;
  mutable std::atomic<std::uint64_t> comparisons_{0};
};

inline RetrievalIndex build_index(Matrix embeddings, std::vector<int> labels,
                                  AnchorSet anchors) {
  return RetrievalIndex(std::move(embeddings), std::move(labels), std::move(anchors));
}

}  // namespace camr
