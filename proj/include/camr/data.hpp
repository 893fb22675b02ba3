#pragma once

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "camr/core.hpp"

namespace camr {

struct LabeledDataset {
  Matrix features;          // N x d
  std::vector<int> labels;  // in [0, class_count)
  std::size_t class_count = 0;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
};

/// Gaussian clusters around centers placed on scaled random directions,
/// redrawn until all centers are at least center_separation apart.
inline LabeledDataset gen_blobs(std::size_t classes, std::size_t per_class,
                                std::size_t input_dim, double center_separation,
                                double noise_std, RngSeed seed) {
  if (classes < 1 || per_class < 1 || input_dim < 1)
    throw std::invalid_argument("gen_blobs: counts must be >= 1");
  if (center_separation <= 0.0)
    throw std::invalid_argument("gen_blobs: separation must be positive");
  if (noise_std < 0.0) throw std::invalid_argument("gen_blobs: noise std must be >= 0");

  CounterRng rng(seed);
  Matrix centers(classes, input_dim);
  std::size_t rejections = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (;;) {
      Vec candidate(input_dim);
      double norm_sq = 0.0;
      for (auto& v : candidate) {
        v = rng.gaussian();
        norm_sq += v * v;
      }
      const double scale = center_separation / std::sqrt(norm_sq);
      for (auto& v : candidate) v *= scale;

      bool ok = true;
      for (std::size_t prev = 0; prev < c && ok; ++prev)
        ok = l2_distance(candidate, centers.row(prev)) >= center_separation;
      if (ok) {
        for (std::size_t k = 0; k < input_dim; ++k) centers(c, k) = candidate[k];
        break;
      }
      if (++rejections >= 1000)
        throw std::runtime_error("gen_blobs: infeasible separation after 1000 rejection rounds");
    }
  }

  LabeledDataset data;
  data.class_count = classes;
  data.features = Matrix(classes * per_class, input_dim);
  data.labels.resize(classes * per_class);
  std::size_t row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i, ++row) {
      data.labels[row] = static_cast<int>(c);
      for (std::size_t k = 0; k < input_dim; ++k)
        data.features(row, k) = centers(c, k) + noise_std * rng.gaussian();
    }
  }
  return data;
}

/// Splits a class-grouped dataset into head (first per_class_head rows of
/// each class) and tail. Both halves keep the class count; used to carve a
/// disjoint query split out of one generated dataset.
inline std::pair<LabeledDataset, LabeledDataset> split_per_class(
    const LabeledDataset& dataset, std::size_t per_class_head) {
  std::vector<std::size_t> taken(dataset.class_count, 0);
  std::vector<std::size_t> head_rows, tail_rows;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto& count = taken[static_cast<std::size_t>(dataset.labels[i])];
    (count < per_class_head ? head_rows : tail_rows).push_back(i);
    ++count;
  }
  const auto gather = [&](const std::vector<std::size_t>& rows) {
    LabeledDataset out;
    out.class_count = dataset.class_count;
    out.features = Matrix(rows.size(), dataset.dim());
    out.labels.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.labels[r] = dataset.labels[rows[r]];
      const auto src = dataset.features.row(rows[r]);
      std::copy(src.begin(), src.end(), out.features.row(r).begin());
    }
    return out;
  };
  return {gather(head_rows), gather(tail_rows)};
}

/// CSV rows: integer label, then the feature components. No header row.
inline void save_csv(const LabeledDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  char buf[64];
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (std::size_t k = 0; k < data.dim(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.features(i, k));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace detail {
inline std::runtime_error csv_error(const std::string& path, std::size_t line,
                                    const std::string& what) {
  std::ostringstream msg;
  msg << path << ": line " << line << ": " << what;
  return std::runtime_error(msg.str());
}
}  // namespace detail

inline LabeledDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);

  std::vector<int> labels;
  std::vector<double> values;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  int max_label = -1;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.eof()) break;
    std::size_t cells = 0;
    const char* cursor = line.c_str();
    bool first = true;
    for (;;) {
      const char* cell_end = std::strchr(cursor, ',');
      const std::string cell(cursor, cell_end ? cell_end - cursor : std::strlen(cursor));
      char* parse_end = nullptr;
      errno = 0;
      if (first) {
        const long label = std::strtol(cell.c_str(), &parse_end, 10);
        if (cell.empty() || *parse_end != '\0' || errno != 0)
          throw detail::csv_error(path, line_no, "non-numeric label '" + cell + "'");
        if (label < 0)
          throw detail::csv_error(path, line_no, "negative label");
        labels.push_back(static_cast<int>(label));
        max_label = std::max(max_label, static_cast<int>(label));
        first = false;
      } else {
        const double value = std::strtod(cell.c_str(), &parse_end);
        const bool overflow = errno == ERANGE && std::abs(value) == HUGE_VAL;
        if (cell.empty() || *parse_end != '\0' || overflow)
          throw detail::csv_error(path, line_no, "non-numeric cell '" + cell + "'");
        values.push_back(value);
        ++cells;
      }
      if (!cell_end) break;
      cursor = cell_end + 1;
    }
    if (cells == 0) throw detail::csv_error(path, line_no, "row has no features");
    if (dim == 0)
      dim = cells;
    else if (cells != dim)
      throw detail::csv_error(path, line_no, "ragged row");
  }
  if (labels.empty()) throw std::runtime_error(path + ": empty dataset");

  LabeledDataset data;
  data.class_count = static_cast<std::size_t>(max_label) + 1;
  data.labels = std::move(labels);
  data.features = Matrix(data.labels.size(), dim, std::move(values));
  return data;
}

}  // namespace camr
