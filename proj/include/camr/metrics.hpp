#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <json.hpp>

#include "camr/core.hpp"
#include "camr/retrieval.hpp"

namespace camr {

struct EvalReport {
  double map = 0.0;
  std::vector<std::pair<std::size_t, double>> precision_at;  // (k, value)
  std::optional<double> accuracy;
  std::size_t query_count = 0;
  double mean_comparisons = 0.0;
  double wall_time_ms = 0.0;
  std::size_t skipped_queries = 0;
};

enum class QueryMode { kBrute, kTwoStage };

/// Fraction of the first k results sharing the query label. Lists shorter
/// than k keep the fixed denominator k.
inline double precision_at_k(std::span<const int> result_labels, int query_label,
                             std::size_t k) {
  if (k < 1) throw std::invalid_argument("precision_at_k: k must be >= 1");
  std::size_t hits = 0;
  const std::size_t limit = std::min(k, result_labels.size());
  for (std::size_t i = 0; i < limit; ++i)
    if (result_labels[i] == query_label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(k);
}

/// Non-interpolated AP normalized by the total number of relevant gallery
/// items; ranks missing from the list forfeit their precision mass.
inline double average_precision(std::span<const int> result_labels, int query_label,
                                std::size_t total_relevant) {
  if (total_relevant == 0) throw std::invalid_argument("undefined AP");
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < result_labels.size(); ++i) {
    if (result_labels[i] == query_label) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(total_relevant);
}

inline double mean_ap(std::span<const double> per_query_aps) {
  if (per_query_aps.empty()) throw std::invalid_argument("mean_ap: empty input");
  double sum = 0.0;
  for (double ap : per_query_aps) sum += ap;
  return sum / static_cast<double>(per_query_aps.size());
}

inline double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("accuracy: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

/// Runs every query through the index, ranks the reachable gallery, and
/// aggregates mAP, P@k, comparison counts, and wall time. Queries whose class
/// has no gallery items are skipped and reported separately.
inline EvalReport evaluate(const RetrievalIndex& index, const Matrix& query_embeddings,
                           const std::vector<int>& query_labels,
                           const std::vector<std::size_t>& ks, QueryMode mode) {
  if (query_embeddings.rows() == 0) throw std::invalid_argument("evaluate: no queries");
  if (query_embeddings.rows() != query_labels.size())
    throw std::invalid_argument("evaluate: label count does not match queries");
  if (ks.empty()) throw std::invalid_argument("evaluate: no ks given");

  std::vector<std::size_t> relevant_per_class;
  for (int label : index.labels()) {
    if (label >= 0 && static_cast<std::size_t>(label) >= relevant_per_class.size())
      relevant_per_class.resize(static_cast<std::size_t>(label) + 1, 0);
    if (label >= 0) ++relevant_per_class[static_cast<std::size_t>(label)];
  }
  const auto total_relevant = [&](int label) -> std::size_t {
    if (label < 0 || static_cast<std::size_t>(label) >= relevant_per_class.size())
      return 0;
    return relevant_per_class[static_cast<std::size_t>(label)];
  };

  EvalReport report;
  std::vector<double> aps;
  std::vector<double> p_at_sums(ks.size(), 0.0);
  std::vector<int> result_labels;

  index.reset_and_read_counter();
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t qi = 0; qi < query_embeddings.rows(); ++qi) {
    const int label = query_labels[qi];
    const std::size_t relevant = total_relevant(label);
    if (relevant == 0) {
      ++report.skipped_queries;
      continue;
    }
    const auto q = query_embeddings.row(qi);
    const RankedList ranked = mode == QueryMode::kBrute
                                  ? index.brute_force_query(q, index.count())
                                  : index.two_stage_query(q, index.count());
    result_labels.resize(ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i)
      result_labels[i] = index.labels()[ranked[i].id];

    aps.push_back(average_precision(result_labels, label, relevant));
    for (std::size_t i = 0; i < ks.size(); ++i)
      p_at_sums[i] += precision_at_k(result_labels, label, ks[i]);
  }
  report.wall_time_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start)
                            .count();

  if (aps.empty())
    throw std::runtime_error("evaluate: every query class is absent from the gallery");

  report.query_count = aps.size();
  report.map = mean_ap(aps);
  for (std::size_t i = 0; i < ks.size(); ++i)
    report.precision_at.emplace_back(ks[i],
                                     p_at_sums[i] / static_cast<double>(aps.size()));
  report.mean_comparisons = static_cast<double>(index.reset_and_read_counter()) /
                            static_cast<double>(aps.size());
  return report;
}

inline nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["map"] = report.map;
  for (const auto& [k, value] : report.precision_at)
    j["p_at_" + std::to_string(k)] = value;
  if (report.accuracy) j["accuracy"] = *report.accuracy;
  j["query_count"] = report.query_count;
  j["mean_comparisons"] = report.mean_comparisons;
  j["wall_time_ms"] = report.wall_time_ms;
  j["skipped_queries"] = report.skipped_queries;
  return j;
}

}  // namespace camr
