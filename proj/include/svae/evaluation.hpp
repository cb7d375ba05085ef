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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "svae/corpus.hpp"
#include "svae/errors.hpp"
#include "svae/training.hpp"

namespace svae {

// u·v / (|u| |v|), clamped to [-1, 1].
inline double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw DimensionError("cosine: sizes " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
  }
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw DegenerateInputError("cosine similarity undefined for a zero vector");
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

// Two-pass Pearson correlation coefficient.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DimensionError("pearson: series lengths " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
  }
  if (x.size() < 2) throw DegenerateInputError("pearson: need at least 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInputError("pearson: zero variance in a series");
  return sxy / std::sqrt(sxx * syy);
}

struct EvalRow {
  std::string sentence_a;
  std::string sentence_b;
  double gold = 0.0;
  double cosine = 0.0;
};

struct EvalReport {
  std::string dataset;
  std::string model;
  std::size_t pair_count = 0;
  double pearson_r = 0.0;
  std::vector<EvalRow> rows;
  std::vector<std::string> excluded;  // one message per dropped pair
};

/**
 * Cosine similarity of the two sentence embeddings of every pair, then
 * Pearson correlation against the gold scores. Pairs where a sentence has
 * no tokens are dropped and listed in `excluded`.
 */
inline EvalReport evaluate(const Checkpoint& ckpt, const SentencePairDataset& dataset) {
  EvalReport report;
  report.dataset = dataset.name;
  report.model = std::string(variant_name(ckpt.config.loss.variant));
  for (std::size_t i = 0; i < dataset.pairs.size(); ++i) {
    const SentencePair& p = dataset.pairs[i];
    const auto a = embed_sentence(ckpt, p.sentence_a);
    const auto b = embed_sentence(ckpt, p.sentence_b);
    if (!a || !b) {
      report.excluded.push_back("pair " + std::to_string(i + 1) + ": sentence has no tokens");
      continue;
    }
    report.rows.push_back({p.sentence_a, p.sentence_b, p.gold, cosine(a->values, b->values)});
  }
  report.pair_count = report.rows.size();
  std::vector<double> gold, cos;
  for (const EvalRow& r : report.rows) {
    gold.push_back(r.gold);
    cos.push_back(r.cosine);
  }
  report.pearson_r = pearson(cos, gold);
  return report;
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// Header, one row per pair, then "pearson<TAB>r" with four decimals.
inline void write_report(std::ostream& out, const EvalReport& report) {
  out << "sentence_a\tsentence_b\tgold\tcosine\n";
  char buf[64];
  for (const EvalRow& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%.9g\t%.9g", r.gold, r.cosine);
    out << r.sentence_a << '\t' << r.sentence_b << '\t' << buf << '\n';
  }
  out << "pearson\t" << format_fixed(report.pearson_r, 4) << '\n';
}

}  // namespace svae
