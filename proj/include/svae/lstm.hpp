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

// LSTM cell, sentence encoder, and the decoder with its output projection.

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svae/corpus.hpp"
#include "svae/errors.hpp"
#include "svae/rng.hpp"
#include "svae/tape.hpp"
#include "svae/tensor.hpp"

namespace svae {

// Gate weights of one LSTM layer. W_* map the input, U_* the previous hidden
// state; i, f, o, g are the input, forget, output gates and the candidate.
struct LstmParams {
  Tensor w_i, w_f, w_o, w_g;
  Tensor u_i, u_f, u_o, u_g;
  Tensor b_i, b_f, b_o, b_g;

  std::size_t input_dim() const { return w_i.cols(); }
  std::size_t hidden_dim() const { return w_i.rows(); }

  // Weights uniform in [-1/sqrt(hidden), 1/sqrt(hidden)], forget bias 1, other biases 0.
  static LstmParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
    const double r = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    auto uniform = [&](std::size_t rows, std::size_t cols) {
      std::vector<double> v(rows * cols);
      for (double& x : v) x = rng.uniform(-r, r);
      return Tensor::matrix(rows, cols, std::move(v));
    };
    LstmParams p;
    p.w_i = uniform(hidden_dim, input_dim);
    p.w_f = uniform(hidden_dim, input_dim);
    p.w_o = uniform(hidden_dim, input_dim);
    p.w_g = uniform(hidden_dim, input_dim);
    p.u_i = uniform(hidden_dim, hidden_dim);
    p.u_f = uniform(hidden_dim, hidden_dim);
    p.u_o = uniform(hidden_dim, hidden_dim);
    p.u_g = uniform(hidden_dim, hidden_dim);
    p.b_i = Tensor({hidden_dim});
    p.b_f = Tensor::vector(std::vector<double>(hidden_dim, 1.0));
    p.b_o = Tensor({hidden_dim});
    p.b_g = Tensor({hidden_dim});
    return p;
  }

  static LstmParams zeros(std::size_t input_dim, std::size_t hidden_dim) {
    LstmParams p;
    for (Tensor* w : {&p.w_i, &p.w_f, &p.w_o, &p.w_g}) *w = Tensor({hidden_dim, input_dim});
    for (Tensor* u : {&p.u_i, &p.u_f, &p.u_o, &p.u_g}) *u = Tensor({hidden_dim, hidden_dim});
    for (Tensor* b : {&p.b_i, &p.b_f, &p.b_o, &p.b_g}) *b = Tensor({hidden_dim});
    return p;
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    const char* names[] = {"W_i", "W_f", "W_o", "W_g", "U_i", "U_f", "U_o", "U_g", "b_i", "b_f", "b_o", "b_g"};
    Tensor* tensors[] = {&w_i, &w_f, &w_o, &w_g, &u_i, &u_f, &u_o, &u_g, &b_i, &b_f, &b_o, &b_g};
    for (std::size_t k = 0; k < 12; ++k) fn(prefix + names[k], *tensors[k]);
  }
};

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;

  static LstmState zeros(std::size_t hidden_dim) {
    return {std::vector<double>(hidden_dim, 0.0), std::vector<double>(hidden_dim, 0.0)};
  }
};

// The sentence embedding: encoder hidden state after the last token.
struct ContextVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const ContextVector&) const = default;
};

// Affine maps from the context vector to the posterior mean and log-variance.
struct LatentHeads {
  Tensor mu_w, mu_b, logvar_w, logvar_b;
};

struct ModelParams {
  LstmParams encoder;
  LstmParams decoder;
  Tensor proj_w;  // vocab × hidden
  Tensor proj_b;  // vocab
  Tensor start_embedding;
  Tensor end_embedding;
  std::optional<LatentHeads> latent;

  std::size_t embedding_dim() const { return encoder.input_dim(); }
  std::size_t hidden_dim() const { return encoder.hidden_dim(); }
  std::size_t vocab_size() const { return proj_w.rows(); }

  // Visits every trainable tensor with its checkpoint name, in a fixed order.
  template <typename Fn>
  void visit(Fn&& fn) {
    encoder.visit("encoder.", fn);
    decoder.visit("decoder.", fn);
    fn(std::string("proj.W"), proj_w);
    fn(std::string("proj.b"), proj_b);
    fn(std::string("start_embedding"), start_embedding);
    fn(std::string("end_embedding"), end_embedding);
    if (latent) {
      fn(std::string("latent.mu_W"), latent->mu_w);
      fn(std::string("latent.mu_b"), latent->mu_b);
      fn(std::string("latent.logvar_W"), latent->logvar_w);
      fn(std::string("latent.logvar_b"), latent->logvar_b);
    }
  }
  template <typename Fn>
  void visit(Fn&& fn) const {
    const_cast<ModelParams*>(this)->visit(
        [&fn](const std::string& name, Tensor& t) { fn(name, static_cast<const Tensor&>(t)); });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&n](const std::string&, const Tensor& t) { n += t.size(); });
    return n;
  }

  std::vector<Tensor*> tensors() {
    std::vector<Tensor*> out;
    visit([&out](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
  }
};

struct ModelShape {
  std::size_t embedding_dim = 0;
  std::size_t hidden_dim = 0;  // 0 selects 2 × embedding_dim
  std::size_t vocab_size = 0;
  bool latent_heads = false;

  std::size_t resolved_hidden() const { return hidden_dim ? hidden_dim : 2 * embedding_dim; }

  std::size_t parameter_count() const {
    const std::size_t e = embedding_dim, h = resolved_hidden(), v = vocab_size;
    const std::size_t lstm = 4 * (h * e + h * h + h);
    return 2 * lstm + v * h + v + 2 * e + (latent_heads ? 2 * (h * h + h) : 0);
  }
};

/**
 * Seeded initialization. Tensors are drawn in a fixed order (encoder,
 * decoder, projection, latent heads) so models with and without latent heads
 * share every other initial value. Start/end embeddings start from the
 * table's <s> and </s> rows.
 */
inline ModelParams init_model(const ModelShape& shape, const EmbeddingTable& table, std::uint64_t seed) {
  if (table.dim() != shape.embedding_dim) {
    throw DimensionError("embedding table has dim " + std::to_string(table.dim()) + ", model expects " +
                         std::to_string(shape.embedding_dim));
  }
  if (table.rows() != shape.vocab_size) {
    throw DimensionError("embedding table has " + std::to_string(table.rows()) + " rows, vocabulary is " +
                         std::to_string(shape.vocab_size));
  }
  const std::size_t e = shape.embedding_dim, h = shape.resolved_hidden(), v = shape.vocab_size;
  Rng rng(seed, Stream::kInit);
  ModelParams m;
  m.encoder = LstmParams::init(e, h, rng);
  m.decoder = LstmParams::init(e, h, rng);
  const double r = 1.0 / std::sqrt(static_cast<double>(h));
  auto uniform = [&](std::size_t rows, std::size_t cols) {
    std::vector<double> x(rows * cols);
    for (double& w : x) w = rng.uniform(-r, r);
    return Tensor::matrix(rows, cols, std::move(x));
  };
  m.proj_w = uniform(v, h);
  m.proj_b = Tensor({v});
  const auto s = table.row(kStartId);
  const auto t = table.row(kEndId);
  m.start_embedding = Tensor::vector({s.begin(), s.end()});
  m.end_embedding = Tensor::vector({t.begin(), t.end()});
  if (shape.latent_heads) {
    LatentHeads heads;
    heads.mu_w = uniform(h, h);
    heads.mu_b = Tensor({h});
    heads.logvar_w = uniform(h, h);
    heads.logvar_b = Tensor({h});
    m.latent = std::move(heads);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Tape-level building blocks.

struct LstmVars {
  Var w_i, w_f, w_o, w_g;
  Var u_i, u_f, u_o, u_g;
  Var b_i, b_f, b_o, b_g;
};

struct LstmVarState {
  Var h;
  Var c;
};

inline LstmVars bind_lstm(Tape& tape, LstmParams& p, bool trainable) {
  auto b = [&](Tensor& t) { return trainable ? tape.parameter(t) : tape.constant(t); };
  return {b(p.w_i), b(p.w_f), b(p.w_o), b(p.w_g), b(p.u_i), b(p.u_f),
          b(p.u_o), b(p.u_g), b(p.b_i), b(p.b_f), b(p.b_o), b(p.b_g)};
}

inline LstmVars bind_lstm(Tape& tape, const LstmParams& p) {
  auto b = [&](const Tensor& t) { return tape.constant(t); };
  return {b(p.w_i), b(p.w_f), b(p.w_o), b(p.w_g), b(p.u_i), b(p.u_f),
          b(p.u_o), b(p.u_g), b(p.b_i), b(p.b_f), b(p.b_o), b(p.b_g)};
}

inline LstmVarState lstm_step(const LstmVars& p, Var x, const LstmVarState& prev) {
  auto pre = [&](Var w, Var u, Var b) { return add(add(matmul(w, x), matmul(u, prev.h)), b); };
  Var i = sigmoid(pre(p.w_i, p.u_i, p.b_i));
  Var f = sigmoid(pre(p.w_f, p.u_f, p.b_f));
  Var o = sigmoid(pre(p.w_o, p.u_o, p.b_o));
  Var g = tanh(pre(p.w_g, p.u_g, p.b_g));
  Var c = add(mul(f, prev.c), mul(i, g));
  Var h = mul(o, tanh(c));
  return {h, c};
}

namespace detail {

inline void check_lstm_dims(const LstmParams& p, std::size_t x_dim, const LstmState& prev) {
  const std::size_t h = p.hidden_dim();
  if (x_dim != p.input_dim() || prev.h.size() != h || prev.c.size() != h) {
    throw DimensionError("lstm_step: cell is " + std::to_string(p.input_dim()) + "->" + std::to_string(h) +
                         " but got input " + std::to_string(x_dim) + ", state " + std::to_string(prev.h.size()) +
                         "/" + std::to_string(prev.c.size()));
  }
}

inline std::vector<double> copy_of(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace detail

// One LSTM step outside of training.
inline LstmState lstm_step(const LstmParams& params, std::span<const double> x, const LstmState& prev) {
  detail::check_lstm_dims(params, x.size(), prev);
  Tape tape;
  const LstmVars vars = bind_lstm(tape, params);
  const std::size_t h = params.hidden_dim();
  LstmVarState s{tape.constant({h}, prev.h), tape.constant({h}, prev.c)};
  const LstmVarState next = lstm_step(vars, tape.constant({x.size()}, detail::copy_of(x)), s);
  return {detail::copy_of(next.h.value()), detail::copy_of(next.c.value())};
}

// Folds the encoder over `inputs` (each a vector of embedding_dim) from a zero state.
inline Var encode(const LstmVars& encoder, std::span<const Var> inputs, std::size_t hidden_dim) {
  if (inputs.empty()) throw EmptyInputError("encode: empty token sequence");
  Tape& tape = inputs.front().tape();
  LstmVarState s{tape.constant({hidden_dim}, std::vector<double>(hidden_dim, 0.0)),
                 tape.constant({hidden_dim}, std::vector<double>(hidden_dim, 0.0))};
  for (Var x : inputs) s = lstm_step(encoder, x, s);
  return s.h;
}

inline std::vector<Var> embed_tokens(Tape& tape, const EmbeddingTable& table, const TokenIds& ids) {
  std::vector<Var> out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(tape.constant({table.dim()}, detail::copy_of(table.row(id))));
  return out;
}

// h_N for an [N × embedding_dim] matrix of token vectors.
inline ContextVector encode(const ModelParams& params, const Tensor& embeddings) {
  if (embeddings.rank() != 2 || embeddings.cols() != params.embedding_dim()) {
    throw DimensionError("encode: expected [N x " + std::to_string(params.embedding_dim()) + "] inputs, got " +
                         shape_string(embeddings.shape()));
  }
  Tape tape;
  const LstmVars enc = bind_lstm(tape, params.encoder);
  std::vector<Var> xs;
  for (std::size_t r = 0; r < embeddings.rows(); ++r) {
    xs.push_back(tape.constant({embeddings.cols()}, detail::copy_of(embeddings.row(r))));
  }
  return {detail::copy_of(encode(enc, xs, params.hidden_dim()).value())};
}

inline ContextVector encode(const ModelParams& params, const EmbeddingTable& table, const TokenIds& ids) {
  if (ids.empty()) throw EmptyInputError("encode: empty token sequence");
  std::vector<double> rows;
  for (TokenId id : ids) {
    const auto r = table.row(id);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return encode(params, Tensor::matrix(ids.size(), table.dim(), std::move(rows)));
}

struct DecoderVars {
  LstmVars cell;
  Var proj_w;
  Var proj_b;
  Var start_embedding;
};

inline DecoderVars bind_decoder(Tape& tape, ModelParams& p, bool trainable) {
  auto b = [&](Tensor& t) { return trainable ? tape.parameter(t) : tape.constant(t); };
  return {bind_lstm(tape, p.decoder, trainable), b(p.proj_w), b(p.proj_b), b(p.start_embedding)};
}

inline DecoderVars bind_decoder(Tape& tape, const ModelParams& p) {
  return {bind_lstm(tape, p.decoder), tape.constant(p.proj_w), tape.constant(p.proj_b),
          tape.constant(p.start_embedding)};
}

/**
 * Teacher-forced decoding from initial hidden state `init_h` (cell state
 * zero). Inputs are <s> followed by the gold tokens; row t of the returned
 * [(N+1) × vocab] logits predicts gold token t, and the last row predicts </s>.
 */
inline Var decode_teacher_forced(const DecoderVars& dec, Var init_h, const TokenIds& gold,
                                 const EmbeddingTable& table) {
  Tape& tape = init_h.tape();
  const std::size_t h = init_h.size();
  LstmVarState s{init_h, tape.constant({h}, std::vector<double>(h, 0.0))};
  std::vector<Var> rows;
  rows.reserve(gold.size() + 1);
  Var x = dec.start_embedding;
  for (std::size_t t = 0; t <= gold.size(); ++t) {
    s = lstm_step(dec.cell, x, s);
    rows.push_back(add(matmul(dec.proj_w, s.h), dec.proj_b));
    if (t < gold.size()) x = tape.constant({table.dim()}, detail::copy_of(table.row(gold[t])));
  }
  return stack_rows(rows);
}

inline Tensor decode_teacher_forced(const ModelParams& params, const ContextVector& ctx, const TokenIds& gold,
                                    const EmbeddingTable& table) {
  if (ctx.size() != params.hidden_dim()) throw DimensionError("decode: context size mismatch");
  for (TokenId id : gold) {
    if (id >= params.vocab_size()) {
      throw VocabularyError("decode: token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(params.vocab_size()));
    }
  }
  Tape tape;
  const DecoderVars dec = bind_decoder(tape, params);
  return to_tensor(decode_teacher_forced(dec, tape.constant({ctx.size()}, ctx.values), gold, table));
}

// First index of the maximum, so ties go to the lowest token id.
inline TokenId argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

/**
 * Autoregressive argmax decoding from `ctx`, feeding back each prediction.
 * Stops at </s> (not included in the output) or after `max_len` tokens.
 */
inline TokenIds greedy_decode(const ModelParams& params, const ContextVector& ctx, const EmbeddingTable& table,
                              std::size_t max_len) {
  if (max_len == 0) throw DomainError("greedy_decode: max_len must be at least 1");
  if (ctx.size() != params.hidden_dim()) throw DimensionError("greedy_decode: context size mismatch");
  Tape tape;
  const DecoderVars dec = bind_decoder(tape, params);
  const std::size_t h = ctx.size();
  LstmVarState s{tape.constant({h}, ctx.values), tape.constant({h}, std::vector<double>(h, 0.0))};
  Var x = dec.start_embedding;
  TokenIds out;
  while (out.size() < max_len) {
    s = lstm_step(dec.cell, x, s);
    const TokenId next = argmax(add(matmul(dec.proj_w, s.h), dec.proj_b).value());
    if (next == kEndId) break;
    out.push_back(next);
    if (next == kStartId) {
      x = tape.constant(params.start_embedding);
    } else {
      x = tape.constant({table.dim()}, detail::copy_of(table.row(next)));
    }
  }
  return out;
}

}  // namespace svae
