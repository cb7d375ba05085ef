/* Copyright 2026 The svae Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Binary checkpoint format, all integers little-endian:
//
//   "SVAE" | u32 version | u32 n + config text (key=value lines)
//   | u32 count, then per token: u32 n + bytes
//   | u32 count, then per tensor: u32 n + name | u32 rank | u32 dims... | f32 data...
//
// The first tensor is the frozen embedding table ("embeddings"); the rest are
// the model parameters in ModelParams::visit order.

#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "svae/corpus.hpp"
#include "svae/errors.hpp"
#include "svae/lstm.hpp"
#include "svae/objectives.hpp"
#include "svae/rng.hpp"
#include "svae/training.hpp"

namespace svae {

inline constexpr char kCheckpointMagic[4] = {'S', 'V', 'A', 'E'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::vector<char> bytes, std::string source) : bytes_(std::move(bytes)), source_(std::move(source)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw CheckpointError(source_ + ": " + what + " (at byte " + std::to_string(pos_) + ")");
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated checkpoint");
  }

  std::vector<char> bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

inline void write_tensor(ByteWriter& w, const std::string& name, const Tensor& t) {
  w.str(name);
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  for (double v : t.data()) w.f32(static_cast<float>(v));
}

}  // namespace detail

// key=value snapshot of the training configuration and model layout.
inline std::string config_text(const Checkpoint& ckpt) {
  const TrainConfig& c = ckpt.config;
  std::ostringstream os;
  os << "model=" << variant_name(c.loss.variant) << '\n'
     << "lambda=" << detail::format_double(c.loss.lambda_kld) << '\n'
     << "beta=" << detail::format_double(c.loss.beta) << '\n'
     << "smoothing=" << detail::format_double(c.loss.smoothing_eps) << '\n'
     << "lr=" << detail::format_double(c.lr) << '\n'
     << "epochs=" << c.epochs << '\n'
     << "batch=" << c.batch_size << '\n'
     << "clip=" << detail::format_double(c.clip_norm) << '\n'
     << "seed=" << c.seed << '\n'
     << "max_len=" << c.max_len << '\n'
     << "hidden=" << ckpt.params.hidden_dim() << '\n'
     << "embedding_dim=" << ckpt.table.dim() << '\n'
     << "generator=" << kGeneratorName << '\n'
     << "vocab_hash=" << detail::hex64(ckpt.vocab.hash()) << '\n';
  return os.str();
}

inline std::vector<char> serialize_checkpoint(const Checkpoint& ckpt) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(config_text(ckpt));
  w.u32(static_cast<std::uint32_t>(ckpt.vocab.size()));
  for (const std::string& t : ckpt.vocab.tokens()) w.str(t);
  std::uint32_t count = 1;
  ckpt.params.visit([&count](const std::string&, const Tensor&) { ++count; });
  w.u32(count);
  detail::write_tensor(w, "embeddings", ckpt.table.matrix());
  ckpt.params.visit([&w](const std::string& name, const Tensor& t) { detail::write_tensor(w, name, t); });
  return w.bytes();
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::vector<char> bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed for " + path.string());
}

namespace detail {

inline std::map<std::string, std::string> parse_key_values(const std::string& text, ByteReader& r) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) r.fail("malformed config line \"" + line + "\"");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline TrainConfig parse_config(const std::map<std::string, std::string>& kv, ByteReader& r) {
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) r.fail(std::string("config is missing \"") + key + "\"");
    return it->second;
  };
  auto num = [&](const char* key) {
    auto v = parse_double(get(key));
    if (!v) r.fail(std::string("bad value for \"") + key + "\"");
    return *v;
  };
  auto count = [&](const char* key) {
    auto v = parse_count(get(key));
    if (!v) r.fail(std::string("bad value for \"") + key + "\"");
    return *v;
  };
  TrainConfig c;
  c.loss.variant = parse_variant(get("model"));
  c.loss.lambda_kld = num("lambda");
  c.loss.beta = num("beta");
  c.loss.smoothing_eps = num("smoothing");
  c.lr = num("lr");
  c.epochs = count("epochs");
  c.batch_size = count("batch");
  c.clip_norm = num("clip");
  std::uint64_t seed = 0;
  const std::string& s = get("seed");
  if (std::from_chars(s.data(), s.data() + s.size(), seed).ec != std::errc()) r.fail("bad seed");
  c.seed = seed;
  c.max_len = count("max_len");
  c.hidden_dim = count("hidden");
  return c;
}

inline Tensor read_tensor(ByteReader& r, const std::string& expected_name, const Shape& expected_shape) {
  const std::string name = r.str();
  if (name != expected_name) r.fail("expected tensor \"" + expected_name + "\", found \"" + name + "\"");
  const std::uint32_t rank = r.u32();
  Shape shape(rank);
  for (auto& d : shape) d = r.u32();
  if (shape != expected_shape) {
    r.fail("tensor \"" + name + "\" has shape " + shape_string(shape) + ", expected " + shape_string(expected_shape));
  }
  std::vector<double> data(shape_size(shape));
  for (double& v : data) v = r.f32();
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace detail

/**
 * Parses a checkpoint. Nothing is returned unless the whole file is valid.
 * With `expected_vocab`, the stored vocabulary must hash identically.
 */
inline Checkpoint parse_checkpoint(std::vector<char> bytes, const std::string& source,
                                   const Vocabulary* expected_vocab = nullptr) {
  detail::ByteReader r(std::move(bytes), source);
  if (r.raw(4) != std::string(kCheckpointMagic, 4)) r.fail("bad magic, not an svae checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    r.fail("unsupported checkpoint version " + std::to_string(version) + " (expected " +
           std::to_string(kCheckpointVersion) + ")");
  }
  const auto kv = detail::parse_key_values(r.str(), r);
  Checkpoint ckpt;
  try {
    ckpt.config = detail::parse_config(kv, r);
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }
  const auto dim_it = kv.find("embedding_dim");
  const std::size_t dim = dim_it == kv.end() ? 0 : detail::parse_count(dim_it->second).value_or(0);
  const std::size_t hidden = ckpt.config.hidden_dim;
  if (dim == 0 || hidden == 0) r.fail("config has zero embedding or hidden size");

  const std::uint32_t vocab_size = r.u32();
  if (vocab_size < kReservedCount) r.fail("vocabulary is missing reserved tokens");
  for (std::uint32_t i = 0; i < vocab_size; ++i) {
    const std::string tok = r.str();
    if (i < kReservedCount) {
      if (tok != ckpt.vocab.token(i)) r.fail("reserved token " + std::to_string(i) + " is \"" + tok + "\"");
      continue;
    }
    if (ckpt.vocab.add(tok) != i) r.fail("duplicate vocabulary token \"" + tok + "\"");
  }
  if (kv.count("vocab_hash") && kv.at("vocab_hash") != detail::hex64(ckpt.vocab.hash())) {
    r.fail("vocabulary listing does not match its recorded hash");
  }
  if (expected_vocab && expected_vocab->hash() != ckpt.vocab.hash()) {
    r.fail("vocabulary hash mismatch: checkpoint " + detail::hex64(ckpt.vocab.hash()) + ", embeddings " +
           detail::hex64(expected_vocab->hash()));
  }

  const bool latent = ckpt.config.loss.variant == Variant::kNvi;
  const std::uint32_t count = r.u32();
  ckpt.table = EmbeddingTable(detail::read_tensor(r, "embeddings", {vocab_size, dim}));
  // Layout template: zero-valued tensors with the right names and shapes.
  ModelParams layout;
  layout.encoder = LstmParams::zeros(dim, hidden);
  layout.decoder = LstmParams::zeros(dim, hidden);
  layout.proj_w = Tensor({vocab_size, hidden});
  layout.proj_b = Tensor({vocab_size});
  layout.start_embedding = Tensor({dim});
  layout.end_embedding = Tensor({dim});
  if (latent) layout.latent = LatentHeads{Tensor({hidden, hidden}), Tensor({hidden}), Tensor({hidden, hidden}), Tensor({hidden})};
  std::uint32_t expected = 1;
  layout.visit([&expected](const std::string&, const Tensor&) { ++expected; });
  if (count != expected) r.fail("expected " + std::to_string(expected) + " tensors, found " + std::to_string(count));
  layout.visit([&r](const std::string& name, Tensor& t) { t = detail::read_tensor(r, name, t.shape()); });
  if (!r.at_end()) r.fail("trailing bytes after last tensor");
  ckpt.params = std::move(layout);
  return ckpt;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path, const Vocabulary* expected_vocab = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(std::move(bytes), path.string(), expected_vocab);
}

}  // namespace svae
