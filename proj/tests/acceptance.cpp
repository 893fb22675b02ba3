// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
// the process exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "camr/camr.hpp"
#include "support/oracles.hpp"
#include "support/sampling.hpp"

namespace fs = std::filesystem;

using camr::AnchorSet;
using camr::CounterRng;
using camr::LabeledDataset;
using camr::Matrix;
using camr::RngSeed;
using camr::TrainConfig;
using camr::Vec;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Matrix embed_all(const camr::EncoderModel& model, const LabeledDataset& data) {
  Matrix out(data.size(), model.embed_dim());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto [e, tape] = camr::forward(model, data.features.row(i));
    std::copy(e.begin(), e.end(), out.row(i).begin());
  }
  return out;
}

struct BenchmarkRun {
  camr::TrainResult trained;
  camr::EvalReport two_stage;
  camr::EvalReport brute;
  double accuracy = 0.0;
  std::size_t gallery_size = 0;
  std::size_t max_bucket = 0;
};

// Criterion-4 pipeline: blobs (10 x 200 train / 50 test, dim 64, sep 5.0,
// std 0.5, seed 42), MLP 64-32-8, Adam lr 1e-3, 50 epochs.
BenchmarkRun run_benchmark() {
  const auto all = camr::gen_blobs(10, 250, 64, 5.0, 0.5, RngSeed{42});
  const auto [train_split, test_split] = camr::split_per_class(all, 200);

  const auto model =
      camr::init_encoder({64, 32, 8}, camr::Activation::kTanh, RngSeed{42});
  TrainConfig config;
  config.epochs = 50;
  config.batch_size = 32;
  config.lr = 1e-3;
  config.margin = 2.0;
  config.min_norm = 1.0;
  config.optimizer = camr::OptimizerKind::kAdam;
  config.anchor_init = camr::AnchorInit::kRandom;
  config.seed = RngSeed{42};

  BenchmarkRun run;
  run.trained = camr::train(config, train_split, model);

  const camr::RetrievalIndex index(embed_all(run.trained.model, train_split),
                                   train_split.labels, run.trained.anchors);
  const Matrix queries = embed_all(run.trained.model, test_split);
  run.two_stage = camr::evaluate(index, queries, test_split.labels, {20, 100},
                                 camr::QueryMode::kTwoStage);
  run.brute = camr::evaluate(index, queries, test_split.labels, {20, 100},
                             camr::QueryMode::kBrute);

  std::vector<int> predictions(test_split.size());
  for (std::size_t i = 0; i < test_split.size(); ++i)
    predictions[i] = camr::classify(run.trained.anchors, queries.row(i));
  run.accuracy = camr::accuracy(predictions, test_split.labels);
  run.gallery_size = index.count();
  run.max_bucket = index.max_bucket_size();
  return run;
}

bool criterion_1_gradients(std::string& detail) {
  CounterRng rng(1001);
  double worst = 0.0;
  int configs = 0;
  for (std::size_t n : {2u, 8u, 32u}) {
    for (std::size_t t : {2u, 5u, 10u}) {
      for (int rep = 0; rep < 12; ++rep, ++configs) {
        const double m = 2.0, p = 1.0;
        auto anchors = sampling::anchors_off_boundary(t, n, m, p, rng);

        // Attractor gradients for both arguments.
        Vec e(n);
        for (auto& v : e) v = 2.0 * rng.gaussian();
        const int label = static_cast<int>(rng.uniform_index(t));
        const auto attr = camr::attractor_grad(e, anchors, label);
        const auto attractor_at = [&] {
          return camr::attractor_loss(e, anchors, label);
        };
        oracles::GradComparison attr_embedding, attr_anchor;
        for (std::size_t k = 0; k < n; ++k) {
          attr_embedding.add(attr.embedding_grad[k],
                             oracles::central_diff(attractor_at, e[k], 1e-5));
          attr_anchor.add(
              attr.anchor_grad[k],
              oracles::central_diff(
                  attractor_at,
                  anchors.anchors(static_cast<std::size_t>(label), k), 1e-5));
        }
        worst = std::max({worst, attr_embedding.relative_error(),
                          attr_anchor.relative_error()});

        // Repeller and total-batch anchor gradients.
        const Matrix rg = camr::repeller_grad(anchors);
        Matrix embeddings(3, n);
        std::vector<int> labels(3);
        for (std::size_t i = 0; i < embeddings.size(); ++i)
          embeddings.data()[i] = 2.0 * rng.gaussian();
        for (auto& l : labels) l = static_cast<int>(rng.uniform_index(t));
        const auto [loss, grads] = camr::cam_batch(embeddings, labels, anchors);
        oracles::GradComparison repeller, batch_total;
        for (std::size_t y = 0; y < t; ++y) {
          for (std::size_t k = 0; k < n; ++k) {
            repeller.add(rg(y, k),
                         oracles::central_diff(
                             [&] { return camr::repeller_loss(anchors); },
                             anchors.anchors(y, k), 1e-5));
            batch_total.add(grads.anchor_grads(y, k),
                            oracles::central_diff(
                                [&] {
                                  return camr::cam_batch(embeddings, labels, anchors)
                                      .first.total;
                                },
                                anchors.anchors(y, k), 1e-5));
          }
        }
        worst = std::max(
            {worst, repeller.relative_error(), batch_total.relative_error()});

        // Minimum-norm gradient with the hinge active: rescale a copy of the
        // anchors to norms inside (0, p), clear of both boundaries.
        AnchorSet small = anchors;
        for (std::size_t y = 0; y < t; ++y) {
          const double norm = camr::l2_norm(small.anchors.row(y));
          const double target = 0.1 + 0.75 * rng.uniform();
          for (std::size_t k = 0; k < n; ++k)
            small.anchors(y, k) *= target / norm;
        }
        const Matrix ng = camr::min_norm_grad(small);
        oracles::GradComparison min_norm;
        for (std::size_t y = 0; y < t; ++y)
          for (std::size_t k = 0; k < n; ++k)
            min_norm.add(ng(y, k),
                         oracles::central_diff(
                             [&] { return camr::min_norm_loss(small); },
                             small.anchors(y, k), 1e-5));
        worst = std::max(worst, min_norm.relative_error());

        // Encoder weight gradients through the chain rule.
        auto encoder = camr::init_encoder({5, 7, n}, camr::Activation::kTanh,
                                          RngSeed{rng.next_u64()});
        Vec x(5);
        for (auto& v : x) v = rng.gaussian();
        const auto [enc_e, tape] = camr::forward(encoder, x);
        const auto enc_attr = camr::attractor_grad(enc_e, anchors, label);
        const auto analytic = camr::backward(encoder, tape, enc_attr.embedding_grad);
        const auto encoder_loss = [&] {
          const auto [out, t2] = camr::forward(encoder, x);
          return camr::attractor_loss(out, anchors, label);
        };
        oracles::GradComparison weights;
        for (std::size_t l = 0; l < encoder.layer_count(); ++l) {
          for (std::size_t i = 0; i < encoder.weights[l].size(); ++i)
            weights.add(analytic.weights[l].data()[i],
                        oracles::central_diff(encoder_loss,
                                              encoder.weights[l].data()[i], 1e-5));
          for (std::size_t i = 0; i < encoder.biases[l].size(); ++i)
            weights.add(analytic.biases[l][i],
                        oracles::central_diff(encoder_loss,
                                              encoder.biases[l][i], 1e-5));
        }
        worst = std::max(worst, weights.relative_error());
      }
    }
  }
  std::ostringstream out;
  out << configs << " configs, worst relative error " << worst;
  detail = out.str();
  return configs >= 100 && worst < 1e-6;
}

bool criterion_2_hinges(std::string& detail) {
  // Base-vector initialization closes both hinges exactly.
  for (std::size_t t : {2u, 5u, 10u}) {
    const auto anchors = camr::init_anchors_base_vectors(t, 16, 2.0, 1.0);
    if (camr::repeller_loss(anchors) != 0.0 || camr::min_norm_loss(anchors) != 0.0) {
      detail = "base-vector initialization left a hinge open";
      return false;
    }
  }

  // After training the benchmark task both hinges stay closed to 1e-2.
  const auto run = run_benchmark();
  const auto& anchors = run.trained.anchors;
  double min_pairwise = std::numeric_limits<double>::infinity();
  double min_norm = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < anchors.class_count(); ++a) {
    min_norm = std::min(min_norm, camr::l2_norm(anchors.anchors.row(a)));
    for (std::size_t b = a + 1; b < anchors.class_count(); ++b)
      min_pairwise = std::min(
          min_pairwise, camr::l2_distance(anchors.anchors.row(a), anchors.anchors.row(b)));
  }
  std::ostringstream out;
  out << "min pairwise distance " << min_pairwise << " (needs >= "
      << 2.0 * anchors.margin - 1e-2 << "), min norm " << min_norm << " (needs >= "
      << anchors.min_norm - 1e-2 << ")";
  detail = out.str();
  return min_pairwise >= 2.0 * anchors.margin - 1e-2 &&
         min_norm >= anchors.min_norm - 1e-2;
}

bool criterion_3_retrieval_oracle(std::string& detail) {
  CounterRng rng(3003);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t count = 1 + rng.uniform_index(200);
    const std::size_t dim = 2 + rng.uniform_index(7);
    const std::size_t t = 1 + rng.uniform_index(5);
    Matrix gallery(count, dim);
    std::vector<int> labels(count, 0);
    for (std::size_t i = 0; i < gallery.size(); ++i) gallery.data()[i] = rng.gaussian();
    Matrix anchor_rows(t, dim);
    for (std::size_t i = 0; i < anchor_rows.size(); ++i)
      anchor_rows.data()[i] = 2.0 * rng.gaussian();
    const Matrix gallery_copy = gallery;
    const camr::RetrievalIndex index(std::move(gallery), labels,
                                     AnchorSet(std::move(anchor_rows), 2.0, 0.0));
    Vec q(dim);
    for (auto& v : q) v = rng.gaussian();

    const auto got = index.brute_force_query(q, count);
    const auto expected = oracles::full_sort_ranking(gallery_copy, q);
    if (got.size() != expected.size()) {
      detail = "ranking length mismatch";
      return false;
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got[i].id != expected[i].id || got[i].distance != expected[i].distance) {
        std::ostringstream out;
        out << "trial " << trial << " rank " << i << ": got id " << got[i].id
            << " dist " << got[i].distance << ", oracle id " << expected[i].id
            << " dist " << expected[i].distance;
        detail = out.str();
        return false;
      }
    }
  }
  detail = "50 galleries, exact id and distance agreement";
  return true;
}

bool criterion_4_benchmark(std::string& detail, const BenchmarkRun& run) {
  std::ostringstream out;
  out << "two-stage mAP " << run.two_stage.map << ", P@20 "
      << run.two_stage.precision_at[0].second << ", accuracy " << run.accuracy;
  detail = out.str();
  return run.two_stage.map >= 0.95 && run.two_stage.precision_at[0].second >= 0.95 &&
         run.accuracy >= 0.95;
}

bool criterion_5_efficiency(std::string& detail, const BenchmarkRun& run) {
  const double bound =
      static_cast<double>(run.trained.anchors.class_count() + run.max_bucket);
  std::ostringstream out;
  out << "mean comparisons/query " << run.two_stage.mean_comparisons << " <= t+max bucket "
      << bound << " <= " << 0.15 * static_cast<double>(run.gallery_size)
      << ", two-stage mAP " << run.two_stage.map << " vs brute " << run.brute.map;
  detail = out.str();
  return run.two_stage.mean_comparisons <= bound &&
         bound <= 0.15 * static_cast<double>(run.gallery_size) &&
         run.two_stage.map >= run.brute.map - 0.01;
}

double ablation_map(const LabeledDataset& train_split, const LabeledDataset& test_split,
                    camr::AnchorInit init, bool repeller, bool min_norm) {
  const auto model =
      camr::init_encoder({64, 32, 10}, camr::Activation::kTanh, RngSeed{42});
  TrainConfig config;
  config.epochs = 50;
  config.batch_size = 32;
  config.lr = 1e-3;
  config.anchor_init = init;
  config.enable_repeller = repeller;
  config.enable_min_norm = min_norm;
  config.seed = RngSeed{42};
  const auto trained = camr::train(config, train_split, model);
  const camr::RetrievalIndex index(embed_all(trained.model, train_split),
                                   train_split.labels, trained.anchors);
  const auto report =
      camr::evaluate(index, embed_all(trained.model, test_split), test_split.labels,
                     {20}, camr::QueryMode::kTwoStage);
  return report.map;
}

bool criterion_6_ablation(std::string& detail) {
  const auto all = camr::gen_blobs(10, 250, 64, 5.0, 1.5, RngSeed{42});
  const auto [train_split, test_split] = camr::split_per_class(all, 200);

  const double full =
      ablation_map(train_split, test_split, camr::AnchorInit::kBaseVectors, true, true);
  const double bare =
      ablation_map(train_split, test_split, camr::AnchorInit::kRandom, false, false);
  const double repeller_only =
      ablation_map(train_split, test_split, camr::AnchorInit::kBaseVectors, true, false);

  std::ostringstream out;
  out << "full " << full << ", no-repeller/no-min-norm random-init " << bare
      << " (gap " << full - bare << "), repeller-only " << repeller_only << " ("
      << 100.0 * repeller_only / full << "% of full)";
  detail = out.str();
  return full - bare >= 0.15 && repeller_only >= 0.8 * full;
}

bool criterion_7_compactness(std::string& detail) {
  const auto all = camr::gen_blobs(10, 250, 64, 5.0, 0.5, RngSeed{42});
  const auto [train_split, test_split] = camr::split_per_class(all, 200);

  const auto model =
      camr::init_encoder({64, 32, 2}, camr::Activation::kTanh, RngSeed{42});
  TrainConfig config;
  config.epochs = 50;
  config.batch_size = 32;
  config.lr = 1e-3;
  config.margin = 4.0;
  config.min_norm = 1.0;
  config.seed = RngSeed{42};
  const auto trained = camr::train(config, train_split, model);

  // Compactness: per-class mean distance to the own anchor vs the minimum
  // inter-anchor distance.
  const Matrix embeds = embed_all(trained.model, train_split);
  const std::size_t t = trained.anchors.class_count();
  std::vector<double> mean_dist(t, 0.0);
  std::vector<std::size_t> counts(t, 0);
  for (std::size_t i = 0; i < embeds.rows(); ++i) {
    const auto label = static_cast<std::size_t>(train_split.labels[i]);
    mean_dist[label] +=
        camr::l2_distance(embeds.row(i), trained.anchors.anchors.row(label));
    ++counts[label];
  }
  double worst_mean = 0.0;
  for (std::size_t j = 0; j < t; ++j)
    worst_mean = std::max(worst_mean, mean_dist[j] / static_cast<double>(counts[j]));
  double min_inter = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < t; ++a)
    for (std::size_t b = a + 1; b < t; ++b)
      min_inter = std::min(min_inter,
                           camr::l2_distance(trained.anchors.anchors.row(a),
                                             trained.anchors.anchors.row(b)));

  // Row-count contract of the export command, through the real CLI.
  const char* cli = std::getenv("CAMR_CLI");
  if (!cli) {
    detail = "CAMR_CLI not set";
    return false;
  }
  const std::string dir = (fs::temp_directory_path() / "camr_acceptance").string();
  fs::remove_all(dir);
  fs::create_directories(dir);
  camr::save_model(trained.model, dir + "/model.camr");
  camr::save_anchors(trained.anchors, dir + "/anchors.camr");
  camr::save_csv(train_split, dir + "/train.csv");
  const std::string command = std::string(cli) + " export-2d --model " + dir +
                              "/model.camr --anchors " + dir + "/anchors.camr" +
                              " --data " + dir + "/train.csv --out " + dir +
                              "/plot.csv >/dev/null 2>&1";
  if (std::system(command.c_str()) != 0) {
    detail = "export-2d command failed";
    return false;
  }
  std::ifstream plot(dir + "/plot.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(plot, line)) ++rows;

  std::ostringstream out;
  out << "worst per-class mean distance " << worst_mean << " vs min inter-anchor "
      << min_inter << " (limit " << 0.25 * min_inter << "), export rows " << rows;
  detail = out.str();
  return worst_mean < 0.25 * min_inter && rows == train_split.size() + t;
}

bool criterion_8_determinism(std::string& detail, const BenchmarkRun& first) {
  const BenchmarkRun second = run_benchmark();
  const auto& a = first.trained;
  const auto& b = second.trained;
  bool same_model = a.model.layer_sizes == b.model.layer_sizes;
  for (std::size_t l = 0; same_model && l < a.model.layer_count(); ++l)
    same_model = a.model.weights[l] == b.model.weights[l] &&
                 a.model.biases[l] == b.model.biases[l];
  const bool same_anchors = a.anchors.anchors == b.anchors.anchors;
  const bool same_metrics =
      first.two_stage.map == second.two_stage.map &&
      first.brute.map == second.brute.map &&
      first.two_stage.precision_at == second.two_stage.precision_at &&
      first.brute.precision_at == second.brute.precision_at &&
      first.two_stage.mean_comparisons == second.two_stage.mean_comparisons &&
      first.accuracy == second.accuracy;
  detail = std::string("model ") + (same_model ? "identical" : "DIFFERS") +
           ", anchors " + (same_anchors ? "identical" : "DIFFER") + ", metrics " +
           (same_metrics ? "identical" : "DIFFER");
  return same_model && same_anchors && same_metrics;
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int id, const std::string& name, bool ok,
                          const std::string& detail, double seconds,
                          double limit_seconds) {
    const bool in_time = limit_seconds <= 0.0 || seconds < limit_seconds;
    if (!ok || !in_time) ++failures;
    std::ostringstream line;
    line << '[' << (ok && in_time ? "PASS" : "FAIL") << "] criterion " << id << " ("
         << name << "): " << detail << " [" << std::fixed << std::setprecision(1)
         << seconds << "s";
    if (limit_seconds > 0.0) line << ", limit " << limit_seconds << "s";
    line << "]";
    std::puts(line.str().c_str());
  };

  std::string detail;
  double start = now_seconds();
  bool ok = criterion_1_gradients(detail);
  report(1, "gradient suite", ok, detail, now_seconds() - start, 10.0);

  start = now_seconds();
  ok = criterion_2_hinges(detail);
  report(2, "hinge invariants", ok, detail, now_seconds() - start, 60.0);

  start = now_seconds();
  ok = criterion_3_retrieval_oracle(detail);
  report(3, "retrieval oracle", ok, detail, now_seconds() - start, 0.0);

  start = now_seconds();
  const BenchmarkRun benchmark = run_benchmark();
  ok = criterion_4_benchmark(detail, benchmark);
  report(4, "end-to-end benchmark", ok, detail, now_seconds() - start, 120.0);

  start = now_seconds();
  ok = criterion_5_efficiency(detail, benchmark);
  report(5, "two-stage efficiency", ok, detail, now_seconds() - start, 0.0);

  start = now_seconds();
  ok = criterion_6_ablation(detail);
  report(6, "ablation direction", ok, detail, now_seconds() - start, 360.0);

  start = now_seconds();
  ok = criterion_7_compactness(detail);
  report(7, "2d compactness and export", ok, detail, now_seconds() - start, 0.0);

  start = now_seconds();
  ok = criterion_8_determinism(detail, benchmark);
  report(8, "determinism", ok, detail, now_seconds() - start, 0.0);

  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
