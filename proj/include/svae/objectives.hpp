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

// Reconstruction and divergence objectives for the three autoencoder
// variants: basic (cross-entropy), ce-kld (cross-entropy plus a token-level
// KL term against label-smoothed targets), and nvi (additionally a Gaussian
// latent with a standard-normal prior).

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "svae/corpus.hpp"
#include "svae/errors.hpp"
#include "svae/tape.hpp"
#include "svae/tensor.hpp"

namespace svae {

enum class Variant { kBasic, kCeKld, kNvi };

inline std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kBasic: return "basic";
    case Variant::kCeKld: return "ce-kld";
    case Variant::kNvi: return "nvi";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "basic") return Variant::kBasic;
  if (s == "ce-kld" || s == "ce_kld") return Variant::kCeKld;
  if (s == "nvi") return Variant::kNvi;
  throw ConfigError("unknown model variant \"" + std::string(s) + "\" (expected basic, ce-kld or nvi)");
}

struct LossConfig {
  Variant variant = Variant::kBasic;
  double lambda_kld = 1.0;     // weight of the token-level KL term
  double beta = 1.0;           // weight of the Gaussian KL term
  double smoothing_eps = 0.1;  // target mass moved off the gold token

  void validate() const {
    if (!(lambda_kld >= 0.0) || !(beta >= 0.0)) throw ConfigError("loss weights must be nonnegative");
    if (!(smoothing_eps >= 0.0 && smoothing_eps < 1.0)) throw ConfigError("smoothing must lie in [0, 1)");
  }

  // A term with zero weight is not computed at all, and a zero-weight
  // Gaussian term also removes the sampling step, so every variant with
  // zero weights is exactly the basic autoencoder.
  bool uses_token_kld() const { return variant != Variant::kBasic && lambda_kld > 0.0; }
  bool uses_latent() const { return variant == Variant::kNvi && beta > 0.0; }
};

namespace detail {

inline std::pair<std::size_t, std::size_t> logits_layout(const char* op, Var logits, const TokenIds& targets) {
  const Shape& s = logits.shape();
  if (s.size() != 2) throw DimensionError(std::string(op) + ": logits must be [T x V], got " + shape_string(s));
  if (s[0] != targets.size()) {
    throw DimensionError(std::string(op) + ": " + std::to_string(s[0]) + " logit rows for " +
                         std::to_string(targets.size()) + " targets");
  }
  for (TokenId t : targets) {
    if (t >= s[1]) {
      throw VocabularyError(std::string(op) + ": target " + std::to_string(t) + " out of range for " +
                            std::to_string(s[1]) + " classes");
    }
  }
  return {s[0], s[1]};
}

}  // namespace detail

// Mean over rows of -log softmax(logits_t)[target_t].
inline Var cross_entropy(Var logits, const TokenIds& targets) {
  auto [rows, cols] = detail::logits_layout("cross_entropy", logits, targets);
  std::vector<std::size_t> idx(rows);
  for (std::size_t t = 0; t < rows; ++t) idx[t] = t * cols + targets[t];
  return scale(sum(gather(log_softmax(logits), std::move(idx))), -1.0 / static_cast<double>(rows));
}

/**
 * Mean over rows of KL(p_t || softmax(logits_t)), where p_t puts 1 - eps on
 * the target and eps / (V - 1) on every other class. With eps = 0 this is
 * the cross-entropy.
 */
inline Var token_kld(Var logits, const TokenIds& targets, double eps) {
  auto [rows, cols] = detail::logits_layout("token_kld", logits, targets);
  if (!(eps >= 0.0 && eps < 1.0)) throw DomainError("token_kld: eps must lie in [0, 1)");
  if (eps > 0.0 && cols < 2) throw DomainError("token_kld: smoothing needs at least 2 classes");
  const double on = 1.0 - eps;
  const double off = eps > 0.0 ? eps / static_cast<double>(cols - 1) : 0.0;
  std::vector<double> p(rows * cols, off);
  for (std::size_t t = 0; t < rows; ++t) p[t * cols + targets[t]] = on;
  // Negative entropy of the smoothed targets; 0 log 0 = 0.
  double neg_entropy = on * std::log(on) * static_cast<double>(rows);
  if (off > 0.0) neg_entropy += off * std::log(off) * static_cast<double>(rows * (cols - 1));
  Tape& tape = logits.tape();
  Var cross = sum(mul(tape.constant({rows, cols}, std::move(p)), log_softmax(logits)));
  return scale(add_scalar(neg(cross), neg_entropy), 1.0 / static_cast<double>(rows));
}

// KL(N(mu, diag exp(logvar)) || N(0, I)) = -1/2 sum(1 + logvar - mu^2 - exp(logvar)).
inline Var gaussian_kld(Var mu, Var logvar) {
  detail::require_same_shape("gaussian_kld", mu, logvar);
  return scale(sum(sub(sub(add_scalar(logvar, 1.0), square(mu)), exp(logvar))), -0.5);
}

struct LatentVars {
  Var mu;
  Var logvar;
  Var z;
};

// z = mu + exp(logvar / 2) * noise, with `noise` held constant.
inline LatentVars reparameterize(Var mu, Var logvar, const Tensor& noise) {
  detail::require_same_shape("reparameterize", mu, logvar);
  if (noise.shape() != mu.shape()) throw DimensionError("reparameterize: noise shape mismatch");
  Var z = add(mu, mul(exp(scale(logvar, 0.5)), mu.tape().constant(noise)));
  return {mu, logvar, z};
}

// A latent draw kept by value for inspection and replay.
struct LatentSample {
  Tensor mu;
  Tensor logvar;
  Tensor z;
  Tensor noise;
};

inline LatentSample snapshot(const LatentVars& v, const Tensor& noise) {
  return {to_tensor(v.mu), to_tensor(v.logvar), to_tensor(v.z), noise};
}

// Unweighted term values; a term the config leaves out reads 0.
struct LossTerms {
  Var total;
  double ce = 0.0;
  double token_kld = 0.0;
  double gauss_kld = 0.0;
};

/**
 * basic:  CE
 * ce-kld: CE + lambda * token_kld
 * nvi:    CE + lambda * token_kld + beta * gaussian_kld
 */
inline LossTerms total_loss(const LossConfig& config, Var logits, const TokenIds& targets,
                            const LatentVars* latent = nullptr) {
  config.validate();
  LossTerms out;
  Var total = cross_entropy(logits, targets);
  out.ce = total.item();
  if (config.uses_token_kld()) {
    Var k = token_kld(logits, targets, config.smoothing_eps);
    out.token_kld = k.item();
    total = add(total, scale(k, config.lambda_kld));
  }
  if (config.uses_latent()) {
    if (latent == nullptr) throw ConfigError("nvi loss needs a latent sample");
    Var g = gaussian_kld(latent->mu, latent->logvar);
    out.gauss_kld = g.item();
    total = add(total, scale(g, config.beta));
  }
  out.total = total;
  return out;
}

// Value-level conveniences.

inline double cross_entropy(const Tensor& logits, const TokenIds& targets) {
  Tape tape;
  return cross_entropy(tape.constant(logits), targets).item();
}

inline double token_kld(const Tensor& logits, const TokenIds& targets, double eps) {
  Tape tape;
  return token_kld(tape.constant(logits), targets, eps).item();
}

inline double gaussian_kld(std::span<const double> mu, std::span<const double> logvar) {
  if (mu.size() != logvar.size() || mu.empty()) throw DimensionError("gaussian_kld: size mismatch");
  Tape tape;
  return gaussian_kld(tape.constant({mu.size()}, {mu.begin(), mu.end()}),
                      tape.constant({logvar.size()}, {logvar.begin(), logvar.end()}))
      .item();
}

}  // namespace svae
