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

// Command-line front end: `svae train`, `svae embed`, `svae eval`.
//
// Exit codes: 0 success, 1 runtime or data error, 2 usage error.

#pragma once

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "svae/checkpoint.hpp"
#include "svae/corpus.hpp"
#include "svae/errors.hpp"
#include "svae/evaluation.hpp"
#include "svae/training.hpp"

namespace svae::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public Error {
 public:
  using Error::Error;
};

/**
 * Registers flags on a subcommand and mirrors each one as a key in the flat
 * key=value config file. Values from the file only fill flags that were not
 * given on the command line.
 */
class FlagSet {
 public:
  explicit FlagSet(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& name, T& var, const std::string& help) {
    CLI::Option* opt = app_->add_option("--" + name, var, help);
    options_[name] = opt;
    setters_[name] = [&var](const std::string& v) { return CLI::detail::lexical_cast(v, var); };
    return opt;
  }

  void add_config_flag() { app_->add_option("--config", config_path_, "flat key=value file mirroring the flags"); }

  void apply_config() const {
    if (config_path_.empty()) return;
    std::ifstream in(config_path_);
    if (!in) throw UsageError("cannot read config file " + config_path_);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string_view body = detail::trim(line);
      if (body.empty() || body.front() == '#') continue;
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) {
        throw UsageError(config_path_ + ":" + std::to_string(line_no) + ": expected key=value");
      }
      std::string key(detail::trim(body.substr(0, eq)));
      const std::string value(detail::trim(body.substr(eq + 1)));
      for (char& c : key) {
        if (c == '_') c = '-';
      }
      auto it = setters_.find(key);
      if (it == setters_.end()) {
        throw UsageError(config_path_ + ":" + std::to_string(line_no) + ": unknown key \"" + key + "\"");
      }
      if (options_.at(key)->count() > 0) continue;
      if (!it->second(value)) {
        throw UsageError(config_path_ + ":" + std::to_string(line_no) + ": bad value \"" + value + "\" for " + key);
      }
    }
  }

 private:
  CLI::App* app_;
  std::string config_path_;
  std::map<std::string, CLI::Option*> options_;
  std::map<std::string, std::function<bool(const std::string&)>> setters_;
};

inline void require_flag(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required flag --") + flag);
}

struct TrainFlags {
  std::string corpus, embeddings, model, out;
  std::size_t epochs = 10;
  double lr = 0.1;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
  double lambda = 1.0;
  double beta = 1.0;
  double smoothing = 0.1;
  std::size_t hidden = 0;
  std::size_t max_len = kDefaultMaxLen;
  double clip = 5.0;
  std::size_t vocab_limit = 0;
};

inline void register_train(FlagSet& f, TrainFlags& t) {
  f.add("corpus", t.corpus, "training text, one sentence per line");
  f.add("embeddings", t.embeddings, "pretrained vectors, word2vec text format");
  f.add("model", t.model, "basic | ce-kld | nvi");
  f.add("out", t.out, "checkpoint path to write");
  f.add("epochs", t.epochs, "training epochs (default 10)");
  f.add("lr", t.lr, "SGD learning rate (default 0.1)");
  f.add("batch", t.batch, "batch size (default 32)");
  f.add("seed", t.seed, "random seed (default 0)");
  f.add("lambda", t.lambda, "token KL weight (default 1)");
  f.add("beta", t.beta, "Gaussian KL weight (default 1)");
  f.add("smoothing", t.smoothing, "label smoothing of the KL targets (default 0.1)");
  f.add("hidden", t.hidden, "hidden units (default 2 x embedding dim)");
  f.add("max-len", t.max_len, "tokens kept per sentence (default 30)");
  f.add("clip", t.clip, "global gradient-norm clip (default 5)");
  f.add("vocab-limit", t.vocab_limit, "keep only the first N pretrained words (default all)");
  f.add_config_flag();
}

inline int run_train(const TrainFlags& t, std::ostream& out, std::ostream& err) {
  require_flag(t.corpus, "corpus");
  require_flag(t.embeddings, "embeddings");
  require_flag(t.model, "model");
  require_flag(t.out, "out");
  TrainConfig config;
  config.loss.variant = parse_variant(t.model);
  config.loss.lambda_kld = t.lambda;
  config.loss.beta = t.beta;
  config.loss.smoothing_eps = t.smoothing;
  config.lr = t.lr;
  config.epochs = t.epochs;
  config.batch_size = t.batch;
  config.clip_norm = t.clip;
  config.seed = t.seed;
  config.max_len = t.max_len;
  config.hidden_dim = t.hidden;
  if (t.vocab_limit > 0) config.vocab_limit = t.vocab_limit;
  config.validate();

  const PretrainedEmbeddings emb = load_embeddings(t.embeddings, config.vocab_limit, config.seed);
  for (const std::string& w : emb.warnings) err << "warning: " << w << '\n';
  const std::vector<std::string> corpus = load_corpus(t.corpus);
  const TrainResult result = train(corpus, emb, config, [&out](const EpochLog& e) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\t%.17g\t%.17g\n", e.epoch, e.total, e.ce, e.token_kld,
                  e.gauss_kld);
    out << buf << std::flush;
  });
  save_checkpoint(result.checkpoint, t.out);
  return kExitOk;
}

struct EmbedFlags {
  std::string checkpoint, input, out;
};

inline void register_embed(FlagSet& f, EmbedFlags& e) {
  f.add("checkpoint", e.checkpoint, "trained checkpoint");
  f.add("input", e.input, "sentences, one per line");
  f.add("out", e.out, "output TSV (default standard output)");
  f.add_config_flag();
}

inline std::string embedding_line(const std::string& sentence, const ContextVector& v) {
  std::string line = sentence;
  line += '\t';
  char buf[40];
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g", v.values[i]);
    if (i) line += ' ';
    line += buf;
  }
  return line;
}

inline int run_embed(const EmbedFlags& e, std::ostream& out, std::ostream& err) {
  require_flag(e.checkpoint, "checkpoint");
  require_flag(e.input, "input");
  const Checkpoint ckpt = load_checkpoint(e.checkpoint);
  std::ifstream in = detail::open_input(e.input);
  std::ofstream file;
  if (!e.out.empty()) {
    file.open(e.out, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("cannot write " + e.out);
  }
  std::ostream& dst = e.out.empty() ? out : file;
  std::string line;
  std::size_t line_no = 0;
  while (detail::read_line(in, line)) {
    ++line_no;
    const auto v = embed_sentence(ckpt, line);
    if (!v) {
      err << "warning: " << e.input << ":" << line_no << ": no tokens, skipped\n";
      continue;
    }
    dst << embedding_line(line, *v) << '\n';
  }
  return kExitOk;
}

struct EvalFlags {
  std::string checkpoint, pairs, format, gold, out;
};

inline void register_eval(FlagSet& f, EvalFlags& e) {
  f.add("checkpoint", e.checkpoint, "trained checkpoint");
  f.add("pairs", e.pairs, "sentence-pair file");
  f.add("format", e.format, "sick | sts");
  f.add("gold", e.gold, "gold scores for sts (default: sibling STS.gs.* file)");
  f.add("out", e.out, "report TSV (default standard output)");
  f.add_config_flag();
}

inline int run_eval(const EvalFlags& e, std::ostream& out, std::ostream& err) {
  require_flag(e.checkpoint, "checkpoint");
  require_flag(e.pairs, "pairs");
  require_flag(e.format, "format");
  PairFormat format;
  if (e.format == "sick") {
    format = PairFormat::kSick;
  } else if (e.format == "sts") {
    format = PairFormat::kSts;
  } else {
    throw UsageError("--format must be sick or sts, got \"" + e.format + "\"");
  }
  const Checkpoint ckpt = load_checkpoint(e.checkpoint);
  std::optional<std::filesystem::path> gold;
  if (!e.gold.empty()) gold = e.gold;
  const SentencePairDataset ds = load_pairs(e.pairs, format, gold);
  const EvalReport report = evaluate(ckpt, ds);
  for (const std::string& x : report.excluded) err << "excluded: " << x << '\n';
  if (e.out.empty()) {
    write_report(out, report);
  } else {
    std::ofstream file(e.out, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("cannot write " + e.out);
    write_report(file, report);
  }
  err << report.model << '\t' << report.dataset << '\t' << format_fixed(report.pearson_r, 4) << '\n';
  return kExitOk;
}

// Entry point shared by the svae binary and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"LSTM sentence autoencoders: train, embed, evaluate"};
  app.require_subcommand(1);
  CLI::App* train_cmd = app.add_subcommand("train", "train an autoencoder and write a checkpoint");
  CLI::App* embed_cmd = app.add_subcommand("embed", "write sentence embeddings as TSV");
  CLI::App* eval_cmd = app.add_subcommand("eval", "cosine/Pearson evaluation on sentence pairs");
  FlagSet train_flags(train_cmd), embed_flags(embed_cmd), eval_flags(eval_cmd);
  TrainFlags tf;
  EmbedFlags ef;
  EvalFlags vf;
  register_train(train_flags, tf);
  register_embed(embed_flags, ef);
  register_eval(eval_flags, vf);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  CLI::App* active = app.got_subcommand(train_cmd) ? train_cmd : app.got_subcommand(embed_cmd) ? embed_cmd : eval_cmd;
  try {
    if (active == train_cmd) {
      train_flags.apply_config();
      return run_train(tf, out, err);
    }
    if (active == embed_cmd) {
      embed_flags.apply_config();
      return run_embed(ef, out, err);
    }
    eval_flags.apply_config();
    return run_eval(vf, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n' << active->help();
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n' << active->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace svae::cli
