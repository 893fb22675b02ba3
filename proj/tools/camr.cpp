// Command-line front end: dataset generation, training, embedding,
// retrieval evaluation, classification, and 2D export for plotting.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "camr/camr.hpp"

namespace {

using nlohmann::json;

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  return out;
}

void write_manifest(const std::string& output_path, const std::string& command,
                    const json& flags) {
  json manifest;
  manifest["command"] = command;
  manifest["flags"] = flags;
  manifest["format_version"] = 1;
  manifest["output"] = output_path;
  std::ofstream out(output_path + ".manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest for: " + output_path);
  out << manifest.dump(2) << '\n';
}

struct GenDataArgs {
  std::size_t classes = 10;
  std::size_t per_class = 200;
  std::size_t input_dim = 64;
  double sep = 5.0;
  double std_dev = 0.5;
  std::uint64_t seed = 42;
  std::string out;
  std::size_t test_per_class = 0;
  std::string test_out;
};

void run_gen_data(const GenDataArgs& args) {
  const json flags = {{"classes", args.classes},
                      {"per_class", args.per_class},
                      {"input_dim", args.input_dim},
                      {"sep", args.sep},
                      {"std", args.std_dev},
                      {"seed", args.seed},
                      {"test_per_class", args.test_per_class}};
  // The optional test split is carved from the same clusters so that query
  // classes coincide with gallery classes.
  const auto all = camr::gen_blobs(args.classes, args.per_class + args.test_per_class,
                                   args.input_dim, args.sep, args.std_dev,
                                   camr::RngSeed{args.seed});
  auto [train, test] = camr::split_per_class(all, args.per_class);
  camr::save_csv(train, args.out);
  write_manifest(args.out, "gen-data", flags);
  if (args.test_per_class > 0) {
    if (args.test_out.empty())
      throw std::runtime_error("--test-per-class requires --test-out");
    camr::save_csv(test, args.test_out);
    write_manifest(args.test_out, "gen-data", flags);
  }
  std::cout << json{{"rows", train.size()}, {"test_rows", test.size()},
                    {"classes", train.class_count}, {"out", args.out}}
                   .dump()
            << '\n';
}

struct TrainArgs {
  std::string data;
  std::size_t embed_dim = 8;
  std::string hidden;
  std::string activation = "tanh";
  double margin = 2.0;
  double min_norm = 1.0;
  std::size_t epochs = 50;
  std::size_t batch = 32;
  double lr = 1e-3;
  std::string optimizer = "adam";
  std::string anchor_init = "random";
  bool no_repeller = false;
  bool no_min_norm = false;
  std::int64_t per_class_cap = 0;
  std::uint64_t seed = 42;
  std::string out_prefix;
};

json train_flags_json(const TrainArgs& args) {
  return {{"data", args.data},
          {"embed_dim", args.embed_dim},
          {"hidden", args.hidden},
          {"activation", args.activation},
          {"margin", args.margin},
          {"min_norm", args.min_norm},
          {"epochs", args.epochs},
          {"batch", args.batch},
          {"lr", args.lr},
          {"optimizer", args.optimizer},
          {"anchor_init", args.anchor_init},
          {"no_repeller", args.no_repeller},
          {"no_min_norm", args.no_min_norm},
          {"per_class_cap", args.per_class_cap},
          {"seed", args.seed}};
}

void run_train(const TrainArgs& args) {
  const auto dataset = camr::load_csv(args.data);

  std::vector<std::size_t> layer_sizes;
  layer_sizes.push_back(dataset.dim());
  for (std::size_t h : parse_size_list(args.hidden)) layer_sizes.push_back(h);
  layer_sizes.push_back(args.embed_dim);

  const auto model = camr::init_encoder(
      layer_sizes, camr::activation_from_string(args.activation),
      camr::RngSeed{args.seed});

  camr::TrainConfig config;
  config.epochs = args.epochs;
  config.batch_size = args.batch;
  config.lr = args.lr;
  config.margin = args.margin;
  config.min_norm = args.min_norm;
  config.anchor_init = args.anchor_init == "base" ? camr::AnchorInit::kBaseVectors
                                                  : camr::AnchorInit::kRandom;
  config.enable_repeller = !args.no_repeller;
  config.enable_min_norm = !args.no_min_norm;
  config.optimizer = args.optimizer == "sgd" ? camr::OptimizerKind::kSgd
                                             : camr::OptimizerKind::kAdam;
  config.seed = camr::RngSeed{args.seed};
  if (args.per_class_cap > 0)
    config.per_class_cap = static_cast<std::size_t>(args.per_class_cap);

  const auto result = camr::train(config, dataset, model);

  const json flags = train_flags_json(args);
  const std::string model_path = args.out_prefix + ".model.camr";
  const std::string anchors_path = args.out_prefix + ".anchors.camr";
  const std::string history_path = args.out_prefix + ".history.jsonl";

  camr::save_model(result.model, model_path);
  write_manifest(model_path, "train", flags);
  camr::save_anchors(result.anchors, anchors_path);
  write_manifest(anchors_path, "train", flags);

  std::ofstream history(history_path);
  if (!history) throw std::runtime_error("cannot write: " + history_path);
  for (std::size_t i = 0; i < result.history.size(); ++i) {
    const auto& rec = result.history[i];
    history << json{{"epoch", i + 1},
                    {"attractor", rec.attractor},
                    {"repeller", rec.repeller},
                    {"min_norm", rec.min_norm},
                    {"total", rec.total},
                    {"wall_ms", rec.wall_ms}}
                   .dump()
            << '\n';
  }
  write_manifest(history_path, "train", flags);

  std::cout << json{{"model", model_path},
                    {"anchors", anchors_path},
                    {"history", history_path},
                    {"final_total_loss", result.history.back().total}}
                   .dump()
            << '\n';
}

struct EmbedArgs {
  std::string model;
  std::string data;
  std::string out;
};

void run_embed(const EmbedArgs& args) {
  const auto model = camr::load_model(args.model);
  const auto dataset = camr::load_csv(args.data);

  camr::EmbeddingStore store;
  store.embeddings = camr::Matrix(dataset.size(), model.embed_dim());
  store.ids.resize(dataset.size());
  store.labels = dataset.labels;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    store.ids[i] = static_cast<std::uint32_t>(i);
    const auto [e, tape] = camr::forward(model, dataset.features.row(i));
    std::copy(e.begin(), e.end(), store.embeddings.row(i).begin());
  }
  camr::save_embeddings(store, args.out);
  write_manifest(args.out, "embed",
                 {{"model", args.model}, {"data", args.data}});
  std::cout << json{{"count", store.count()}, {"dim", store.dim()}, {"out", args.out}}
                   .dump()
            << '\n';
}

struct EvaluateArgs {
  std::string gallery;
  std::string queries;
  std::string anchors;
  std::string ks = "20,100";
  std::string mode = "both";
};

void run_evaluate(const EvaluateArgs& args) {
  auto gallery = camr::load_embeddings(args.gallery);
  const auto queries = camr::load_embeddings(args.queries);
  const auto anchors = camr::load_anchors(args.anchors);
  const auto ks = parse_size_list(args.ks);

  const camr::RetrievalIndex index(std::move(gallery.embeddings),
                                   std::move(gallery.labels), anchors);
  json output;
  if (args.mode == "brute" || args.mode == "both") {
    output["brute"] = camr::to_json(camr::evaluate(index, queries.embeddings,
                                                   queries.labels, ks,
                                                   camr::QueryMode::kBrute));
  }
  if (args.mode == "two-stage" || args.mode == "both") {
    output["two_stage"] = camr::to_json(camr::evaluate(index, queries.embeddings,
                                                       queries.labels, ks,
                                                       camr::QueryMode::kTwoStage));
  }
  if (args.mode == "both") {
    output["comparison_ratio"] =
        output["brute"]["mean_comparisons"].get<double>() /
        output["two_stage"]["mean_comparisons"].get<double>();
  } else if (output.size() == 1) {
    output = output.begin().value();
  }
  std::cout << output.dump(2) << '\n';
}

struct ClassifyArgs {
  std::string model;
  std::string anchors;
  std::string data;
};

void run_classify(const ClassifyArgs& args) {
  const auto model = camr::load_model(args.model);
  const auto anchors = camr::load_anchors(args.anchors);
  const auto dataset = camr::load_csv(args.data);

  std::vector<int> predictions(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto [e, tape] = camr::forward(model, dataset.features.row(i));
    predictions[i] = camr::classify(anchors, e);
  }
  const double acc = camr::accuracy(predictions, dataset.labels);
  std::cout << json{{"accuracy", acc}, {"count", dataset.size()}}.dump() << '\n';
}

struct Export2dArgs {
  std::string model;
  std::string anchors;
  std::string data;
  std::string out;
};

void run_export_2d(const Export2dArgs& args) {
  const auto model = camr::load_model(args.model);
  const auto anchors = camr::load_anchors(args.anchors);
  const auto dataset = camr::load_csv(args.data);
  if (model.embed_dim() != 2 || anchors.dim() != 2)
    throw std::runtime_error("export-2d requires embedding dimension 2");

  std::ofstream out(args.out);
  if (!out) throw std::runtime_error("cannot open for writing: " + args.out);
  char buf[64];
  const auto write_row = [&](int label, std::span<const double> e) {
    out << label;
    for (double v : e) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  };
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto [e, tape] = camr::forward(model, dataset.features.row(i));
    write_row(dataset.labels[i], e);
  }
  for (std::size_t j = 0; j < anchors.class_count(); ++j)
    write_row(-1, anchors.anchors.row(j));
  if (!out) throw std::runtime_error("write failed: " + args.out);
  out.close();

  write_manifest(args.out, "export-2d",
                 {{"model", args.model}, {"anchors", args.anchors},
                  {"data", args.data}});
  std::cout << json{{"rows", dataset.size() + anchors.class_count()},
                    {"out", args.out}}
                   .dump()
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"class-anchor-margin metric learning and retrieval toolkit"};
  app.require_subcommand(1);

  GenDataArgs gen_args;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic blob dataset CSV");
  gen->add_option("--classes", gen_args.classes, "number of classes");
  gen->add_option("--per-class", gen_args.per_class, "examples per class");
  gen->add_option("--input-dim", gen_args.input_dim, "feature dimension");
  gen->add_option("--sep", gen_args.sep, "minimum center separation");
  gen->add_option("--std", gen_args.std_dev, "isotropic noise std");
  gen->add_option("--seed", gen_args.seed, "rng seed");
  gen->add_option("--out", gen_args.out, "output CSV path")->required();
  gen->add_option("--test-per-class", gen_args.test_per_class,
                  "also draw this many test examples per class");
  gen->add_option("--test-out", gen_args.test_out, "output CSV for the test split");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train an encoder and class anchors");
  train->add_option("--data", train_args.data, "training CSV")->required();
  train->add_option("--embed-dim", train_args.embed_dim, "embedding dimension")
      ->required();
  train->add_option("--hidden", train_args.hidden,
                    "comma-separated hidden sizes (empty = linear)");
  train->add_option("--activation", train_args.activation, "tanh or relu")
      ->check(CLI::IsMember({"tanh", "relu"}));
  train->add_option("--margin", train_args.margin, "repeller margin m");
  train->add_option("--min-norm", train_args.min_norm, "minimum anchor norm p");
  train->add_option("--epochs", train_args.epochs, "training epochs");
  train->add_option("--batch", train_args.batch, "mini-batch size");
  train->add_option("--lr", train_args.lr, "learning rate");
  train->add_option("--optimizer", train_args.optimizer, "adam or sgd")
      ->check(CLI::IsMember({"adam", "sgd"}));
  train->add_option("--anchor-init", train_args.anchor_init, "base or random")
      ->check(CLI::IsMember({"base", "random"}));
  train->add_flag("--no-repeller", train_args.no_repeller, "disable the repeller");
  train->add_flag("--no-min-norm", train_args.no_min_norm, "disable the minimum norm");
  train->add_option("--per-class-cap", train_args.per_class_cap,
                    "few-shot cap on examples per class");
  train->add_option("--seed", train_args.seed, "rng seed");
  train->add_option("--out-prefix", train_args.out_prefix, "output file prefix")
      ->required();

  EmbedArgs embed_args;
  auto* embed = app.add_subcommand("embed", "embed a dataset with a trained model");
  embed->add_option("--model", embed_args.model, "model file")->required();
  embed->add_option("--data", embed_args.data, "dataset CSV")->required();
  embed->add_option("--out", embed_args.out, "output embedding store")->required();

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "retrieval metrics over a gallery");
  evaluate->add_option("--gallery", eval_args.gallery, "gallery embedding store")
      ->required();
  evaluate->add_option("--queries", eval_args.queries, "query embedding store")
      ->required();
  evaluate->add_option("--anchors", eval_args.anchors, "anchors file")->required();
  evaluate->add_option("--k", eval_args.ks, "comma-separated precision ranks");
  evaluate->add_option("--mode", eval_args.mode, "brute, two-stage, or both")
      ->check(CLI::IsMember({"brute", "two-stage", "both"}));

  ClassifyArgs classify_args;
  auto* classify = app.add_subcommand("classify", "nearest-anchor classification");
  classify->add_option("--model", classify_args.model, "model file")->required();
  classify->add_option("--anchors", classify_args.anchors, "anchors file")->required();
  classify->add_option("--data", classify_args.data, "dataset CSV")->required();

  Export2dArgs export_args;
  auto* export_2d = app.add_subcommand("export-2d", "export 2D embeddings for plotting");
  export_2d->add_option("--model", export_args.model, "model file (embed dim 2)")
      ->required();
  export_2d->add_option("--anchors", export_args.anchors, "anchors file")->required();
  export_2d->add_option("--data", export_args.data, "dataset CSV")->required();
  export_2d->add_option("--out", export_args.out, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) run_gen_data(gen_args);
    if (train->parsed()) run_train(train_args);
    if (embed->parsed()) run_embed(embed_args);
    if (evaluate->parsed()) run_evaluate(eval_args);
    if (classify->parsed()) run_classify(classify_args);
    if (export_2d->parsed()) run_export_2d(export_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
