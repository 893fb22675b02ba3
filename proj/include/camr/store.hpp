#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "camr/core.hpp"
#include "camr/encoder.hpp"
#include "camr/loss.hpp"

namespace camr {

/// Gallery embeddings with ids and labels, the unit of the binary store.
struct EmbeddingStore {
  std::vector<std::uint32_t> ids;
  std::vector<int> labels;
  Matrix embeddings;  // count x dim

  std::size_t count() const { return embeddings.rows(); }
  std::size_t dim() const { return embeddings.cols(); }
};

// "CAMR" container: magic, u16 version, u8 kind, kind-specific header,
// little-endian f64 payload.
namespace store_detail {

constexpr std::array<char, 4> kMagic = {'C', 'A', 'M', 'R'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kKindModel = 1;
constexpr std::uint8_t kKindAnchors = 2;
constexpr std::uint8_t kKindEmbeddings = 3;

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
  }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u16(std::uint16_t v) {
    const std::uint8_t b[2] = {std::uint8_t(v), std::uint8_t(v >> 8)};
    raw(b, 2);
  }
  void u32(std::uint32_t v) {
    std::uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = std::uint8_t(v >> (8 * i));
    raw(b, 4);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = std::uint8_t(bits >> (8 * i));
    raw(b, 8);
  }
  void f64_span(std::span<const double> values) {
    for (double v : values) f64(v);
  }
  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed: " + path_);
  }

 private:
  void raw(const void* data, std::size_t size) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  }
  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw std::runtime_error("cannot open: " + path);
  }
  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  std::uint16_t u16() {
    std::uint8_t b[2];
    raw(b, 2);
    return std::uint16_t(b[0]) | std::uint16_t(b[1]) << 8;
  }
  std::uint32_t u32() {
    std::uint8_t b[4];
    raw(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
  }
  double f64() {
    std::uint8_t b[8];
    raw(b, 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void f64_span(std::span<double> values) {
    for (double& v : values) v = f64();
  }
  void expect_header(std::uint8_t kind) {
    std::array<char, 4> magic;
    raw(magic.data(), 4);
    if (magic != kMagic) throw std::runtime_error("unrecognized file: " + path_);
    if (u16() != kVersion) throw std::runtime_error("unrecognized file: " + path_);
    if (u8() != kind) throw std::runtime_error("unrecognized file: " + path_);
  }

 private:
  void raw(void* data, std::size_t size) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    if (in_.gcount() != static_cast<std::streamsize>(size))
      throw std::runtime_error("truncated file: " + path_);
  }
  std::ifstream in_;
  std::string path_;
};

inline void write_header(Writer& w, std::uint8_t kind) {
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u16(kVersion);
  w.u8(kind);
}

}  // namespace store_detail

inline void save_model(const EncoderModel& model, const std::string& path) {
  store_detail::Writer w(path);
  store_detail::write_header(w, store_detail::kKindModel);
  w.u8(model.activation == Activation::kTanh ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(model.layer_sizes.size()));
  for (std::size_t s : model.layer_sizes) w.u32(static_cast<std::uint32_t>(s));
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    w.f64_span(model.weights[l].data());
    w.f64_span(model.biases[l]);
  }
  w.finish();
}

inline EncoderModel load_model(const std::string& path) {
  store_detail::Reader r(path);
  r.expect_header(store_detail::kKindModel);
  EncoderModel model;
  const std::uint8_t act = r.u8();
  if (act > 1) throw std::runtime_error("unrecognized file: " + path);
  model.activation = act == 0 ? Activation::kTanh : Activation::kRelu;
  const std::uint32_t count = r.u32();
  if (count < 2) throw std::runtime_error("unrecognized file: " + path);
  model.layer_sizes.resize(count);
  for (auto& s : model.layer_sizes) {
    s = r.u32();
    if (s < 1) throw std::runtime_error("unrecognized file: " + path);
  }
  for (std::size_t l = 0; l + 1 < count; ++l) {
    Matrix weights(model.layer_sizes[l + 1], model.layer_sizes[l]);
    r.f64_span(weights.data());
    Vec biases(model.layer_sizes[l + 1]);
    r.f64_span(biases);
    model.weights.push_back(std::move(weights));
    model.biases.push_back(std::move(biases));
  }
  return model;
}

inline void save_anchors(const AnchorSet& anchors, const std::string& path) {
  store_detail::Writer w(path);
  store_detail::write_header(w, store_detail::kKindAnchors);
  w.u32(static_cast<std::uint32_t>(anchors.class_count()));
  w.u32(static_cast<std::uint32_t>(anchors.dim()));
  w.f64(anchors.margin);
  w.f64(anchors.min_norm);
  w.f64_span(anchors.anchors.data());
  w.finish();
}

inline AnchorSet load_anchors(const std::string& path) {
  store_detail::Reader r(path);
  r.expect_header(store_detail::kKindAnchors);
  const std::uint32_t t = r.u32();
  const std::uint32_t n = r.u32();
  if (t < 1 || n < 1) throw std::runtime_error("unrecognized file: " + path);
  const double margin = r.f64();
  const double min_norm = r.f64();
  Matrix anchors(t, n);
  r.f64_span(anchors.data());
  return AnchorSet(std::move(anchors), margin, min_norm);
}

inline void save_embeddings(const EmbeddingStore& store, const std::string& path) {
  store_detail::Writer w(path);
  store_detail::write_header(w, store_detail::kKindEmbeddings);
  w.u32(static_cast<std::uint32_t>(store.count()));
  w.u32(static_cast<std::uint32_t>(store.dim()));
  for (std::size_t i = 0; i < store.count(); ++i) {
    w.u32(store.ids[i]);
    w.u32(static_cast<std::uint32_t>(store.labels[i]));
    w.f64_span(store.embeddings.row(i));
  }
  w.finish();
}

inline EmbeddingStore load_embeddings(const std::string& path) {
  store_detail::Reader r(path);
  r.expect_header(store_detail::kKindEmbeddings);
  const std::uint32_t count = r.u32();
  const std::uint32_t dim = r.u32();
  if (dim < 1) throw std::runtime_error("unrecognized file: " + path);
  EmbeddingStore store;
  store.embeddings = Matrix(count, dim);
  store.ids.resize(count);
  store.labels.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    store.ids[i] = r.u32();
    store.labels[i] = static_cast<int>(r.u32());
    r.f64_span(store.embeddings.row(i));
  }
  return store;
}

}  // namespace camr
