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

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "svae/corpus.hpp"
#include "svae/errors.hpp"
#include "svae/lstm.hpp"
#include "svae/objectives.hpp"
#include "svae/rng.hpp"
#include "svae/tape.hpp"
#include "svae/tensor.hpp"

namespace svae {

// Configs above this many trainable values are rejected before allocation.
inline constexpr std::size_t kMaxParameters = 50'000'000;

struct TrainConfig {
  double lr = 0.1;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  LossConfig loss;
  std::size_t max_len = kDefaultMaxLen;
  std::size_t hidden_dim = 0;  // 0 means 2 × embedding dim
  std::optional<std::size_t> vocab_limit;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (!(clip_norm > 0.0)) throw ConfigError("clip norm must be positive");
    if (max_len < 1) throw ConfigError("max_len must be at least 1");
    loss.validate();
  }
};

// A trained model with everything needed to embed new text.
struct Checkpoint {
  TrainConfig config;
  Vocabulary vocab;
  EmbeddingTable table;
  ModelParams params;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor*>>;

inline NamedTensors named_tensors(ModelParams& params) {
  NamedTensors out;
  params.visit([&out](const std::string& name, Tensor& t) { out.emplace_back(name, &t); });
  return out;
}

inline double global_grad_norm(const NamedTensors& params) {
  double sq = 0.0;
  for (const auto& [name, t] : params) {
    for (double g : t->grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + name);
      sq += g * g;
    }
  }
  return std::sqrt(sq);
}

// Rescales all gradients so their global L2 norm is at most `clip_norm`.
// Returns the norm before clipping.
inline double clip_gradients(const NamedTensors& params, double clip_norm) {
  const double norm = global_grad_norm(params);
  if (norm > clip_norm) {
    const double s = clip_norm / norm;
    for (const auto& [name, t] : params) {
      for (double& g : t->grad()) g *= s;
    }
  }
  return norm;
}

/**
 * Plain SGD with global-norm clipping: theta -= lr * clip(grad). Gradient
 * slots are zeroed afterwards; tensors without a gradient are untouched.
 * Returns the pre-clip gradient norm.
 */
inline double sgd_step(const NamedTensors& params, double lr, double clip_norm) {
  const double norm = clip_gradients(params, clip_norm);
  for (const auto& [name, t] : params) {
    if (!t->has_grad()) continue;
    auto data = t->data();
    auto grad = t->grad();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= lr * grad[i];
    t->zero_grad();
  }
  return norm;
}

inline double sgd_step(ModelParams& params, double lr, double clip_norm) {
  return sgd_step(named_tensors(params), lr, clip_norm);
}

struct BoundModel {
  LstmVars encoder;
  DecoderVars decoder;
  std::optional<std::pair<Var, Var>> mu_head;      // W, b
  std::optional<std::pair<Var, Var>> logvar_head;  // W, b
};

// Places the tensors the loss under `config` touches onto `tape`.
inline BoundModel bind_model(Tape& tape, ModelParams& params, const LossConfig& config, bool trainable) {
  BoundModel m{bind_lstm(tape, params.encoder, trainable), bind_decoder(tape, params, trainable), {}, {}};
  if (config.uses_latent()) {
    if (!params.latent) throw ConfigError("nvi loss needs a model with latent heads");
    auto b = [&](Tensor& t) { return trainable ? tape.parameter(t) : tape.constant(t); };
    m.mu_head = {b(params.latent->mu_w), b(params.latent->mu_b)};
    m.logvar_head = {b(params.latent->logvar_w), b(params.latent->logvar_b)};
  }
  return m;
}

/**
 * Full autoencoder loss for one sentence: encode, optionally sample the
 * latent with the given standard-normal `noise`, decode with teacher forcing
 * and score against the tokens followed by </s>.
 */
inline LossTerms sentence_loss(const BoundModel& model, const EmbeddingTable& table, const TokenIds& ids,
                               const LossConfig& config, const Tensor* noise = nullptr) {
  Tape& tape = model.encoder.w_i.tape();
  const std::size_t hidden = model.encoder.w_i.shape()[0];
  const std::vector<Var> xs = embed_tokens(tape, table, ids);
  Var h = encode(model.encoder, xs, hidden);
  std::optional<LatentVars> latent;
  Var init = h;
  if (config.uses_latent()) {
    if (noise == nullptr) throw ConfigError("nvi loss needs a noise draw");
    Var mu = add(matmul(model.mu_head->first, h), model.mu_head->second);
    Var logvar = add(matmul(model.logvar_head->first, h), model.logvar_head->second);
    latent = reparameterize(mu, logvar, *noise);
    init = latent->z;
  }
  Var logits = decode_teacher_forced(model.decoder, init, ids, table);
  TokenIds targets = ids;
  targets.push_back(kEndId);
  return total_loss(config, logits, targets, latent ? &*latent : nullptr);
}

inline Tensor draw_noise(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return Tensor::vector(std::move(v));
}

struct EpochLog {
  std::size_t epoch = 0;
  double total = 0.0;
  double ce = 0.0;
  double token_kld = 0.0;
  double gauss_kld = 0.0;

  bool operator==(const EpochLog&) const = default;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

/**
 * Groups sentence indices into batches of equal length. Each epoch shuffles
 * within length buckets, cuts them into batches of at most `batch_size`,
 * and shuffles the batch order.
 */
inline std::vector<std::vector<std::size_t>> make_batches(const std::vector<TokenIds>& sentences,
                                                          std::size_t batch_size, Rng& rng) {
  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < sentences.size(); ++i) buckets[sentences[i].size()].push_back(i);
  std::vector<std::vector<std::size_t>> batches;
  for (auto& [len, idx] : buckets) {
    rng.shuffle(idx.begin(), idx.end());
    for (std::size_t s = 0; s < idx.size(); s += batch_size) {
      const std::size_t e = std::min(idx.size(), s + batch_size);
      batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(s), idx.begin() + static_cast<std::ptrdiff_t>(e));
    }
  }
  rng.shuffle(batches.begin(), batches.end());
  return batches;
}

inline float to_float32(double v) { return static_cast<float>(v); }

// Rounds every stored value to 32-bit precision, the precision checkpoints keep.
inline void quantize_to_float32(Checkpoint& ckpt) {
  for (double& x : ckpt.table.matrix().data()) x = to_float32(x);
  ckpt.params.visit([](const std::string&, Tensor& t) {
    for (double& x : t.data()) x = to_float32(x);
    t.clear_grad();
  });
}

inline std::vector<TokenIds> encode_corpus(const std::vector<std::string>& corpus, const Vocabulary& vocab,
                                           std::size_t max_len) {
  std::vector<TokenIds> out;
  out.reserve(corpus.size());
  for (const std::string& s : corpus) {
    TokenIds ids = to_ids(vocab, s, max_len);
    if (!ids.empty()) out.push_back(std::move(ids));
  }
  return out;
}

/**
 * Trains one autoencoder variant with plain SGD. Initialization, batch
 * order and latent noise each come from their own stream of `config.seed`,
 * so two runs with equal inputs produce identical logs and checkpoints.
 * The returned checkpoint holds 32-bit-rounded values.
 */
inline TrainResult train(const std::vector<std::string>& corpus, const PretrainedEmbeddings& embeddings,
                         const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch = {}) {
  config.validate();
  const std::vector<TokenIds> sentences = encode_corpus(corpus, embeddings.vocab, config.max_len);
  if (sentences.empty()) throw EmptyInputError("training corpus has no non-empty sentences");

  ModelShape shape{embeddings.table.dim(), config.hidden_dim, embeddings.vocab.size(),
                   config.loss.variant == Variant::kNvi};
  if (shape.parameter_count() > kMaxParameters) {
    throw ConfigError("model would have " + std::to_string(shape.parameter_count()) +
                      " parameters (limit " + std::to_string(kMaxParameters) +
                      "); reduce the vocabulary or hidden size");
  }

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.config = config;
  ckpt.config.hidden_dim = shape.resolved_hidden();
  ckpt.vocab = embeddings.vocab;
  ckpt.table = embeddings.table;
  ckpt.params = init_model(shape, ckpt.table, config.seed);
  const NamedTensors named = named_tensors(ckpt.params);

  Rng shuffle_rng(config.seed, Stream::kShuffle);
  Rng noise_rng(config.seed, Stream::kNoise);
  const std::size_t hidden = shape.resolved_hidden();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochLog log{epoch};
    for (const auto& batch : make_batches(sentences, config.batch_size, shuffle_rng)) {
      Tape tape;
      const BoundModel model = bind_model(tape, ckpt.params, config.loss, true);
      Var batch_total;
      for (std::size_t idx : batch) {
        std::optional<Tensor> noise;
        if (config.loss.uses_latent()) noise = draw_noise(noise_rng, hidden);
        const LossTerms terms = sentence_loss(model, ckpt.table, sentences[idx], config.loss, noise ? &*noise : nullptr);
        batch_total = batch_total.valid() ? add(batch_total, terms.total) : terms.total;
        log.total += terms.total.item();
        log.ce += terms.ce;
        log.token_kld += terms.token_kld;
        log.gauss_kld += terms.gauss_kld;
      }
      tape.backward(scale(batch_total, 1.0 / static_cast<double>(batch.size())));
      sgd_step(named, config.lr, config.clip_norm);
    }
    const double n = static_cast<double>(sentences.size());
    log.total /= n;
    log.ce /= n;
    log.token_kld /= n;
    log.gauss_kld /= n;
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  quantize_to_float32(ckpt);
  return result;
}

// Sentence embedding: h_N, or the posterior mean for models trained with a latent.
inline ContextVector embed_ids(const Checkpoint& ckpt, const TokenIds& ids) {
  ContextVector h = encode(ckpt.params, ckpt.table, ids);
  if (!ckpt.config.loss.uses_latent()) return h;
  const LatentHeads& heads = *ckpt.params.latent;
  Tape tape;
  Var mu = add(matmul(tape.constant(heads.mu_w), tape.constant({h.size()}, h.values)), tape.constant(heads.mu_b));
  return {detail::copy_of(mu.value())};
}

// nullopt when the sentence has no tokens.
inline std::optional<ContextVector> embed_sentence(const Checkpoint& ckpt, std::string_view sentence) {
  const TokenIds ids = to_ids(ckpt.vocab, sentence, ckpt.config.max_len);
  if (ids.empty()) return std::nullopt;
  return embed_ids(ckpt, ids);
}

}  // namespace svae
