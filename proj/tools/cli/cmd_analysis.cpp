// Copyright 2026 The longdoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <chrono>
#include <cstdio>
#include <memory>
#include <new>

#include "cli/commands.hpp"
#include "cli/common.hpp"
#include "longdoc/analysis.hpp"
#include "longdoc/attention.hpp"
#include "longdoc/checkpoint.hpp"
#include "longdoc/errors.hpp"
#include "longdoc/rng.hpp"

namespace longdoc::cli {

namespace {

struct AttentionFlags {
  CommonFlags common;
  std::string ckpt;
  std::string data;
  std::string kind;
  std::string corpus_path;
  std::string out = "-";
};

void analyze_attention(const AttentionFlags& f) {
  const ckpt::Checkpoint model = ckpt::load(f.ckpt);
  std::vector<std::string> texts;
  if (!f.corpus_path.empty()) {
    texts = corpus::read_corpus(f.corpus_path);
  } else {
    if (f.data.empty()) throw ConfigError("analyze-attention: give --data or --corpus");
    const std::string kind = f.kind.empty() ? model.metadata.value("kind", std::string()) : f.kind;
    if (kind.empty()) throw ConfigError("analyze-attention: --kind is required for this checkpoint");
    for (const auto& r : load_task(f.data, data::task_kind_from_string(kind))) {
      texts.push_back(data::record_text(r));
    }
  }
  const analysis::AttentionProfile p =
      analysis::attention_profile(model.state, model.tokenizer, texts, f.common.resolved_threads());
  for (const auto& w : p.warnings) note("warning: " + w);
  const nlohmann::json effective{{"command", "analyze-attention"},
                                 {"checkpoint_task", model.metadata.value("task", "")},
                                 {"documents", texts.size()}};
  write_text(f.out, "# config: " + effective.dump() + "\n" + analysis::to_csv(p));
}

struct LengthFlags {
  CommonFlags common;
  std::string ckpt;
  std::string data;
  std::string kind;
  std::string threshold = "auto";
  std::size_t limit = 512;
  std::string out = "-";
};

void analyze_length(const LengthFlags& f) {
  std::optional<std::size_t> fixed;
  if (f.threshold != "auto") {
    try {
      std::size_t used = 0;
      fixed = std::stoul(f.threshold, &used);
      if (used != f.threshold.size()) throw std::invalid_argument(f.threshold);
    } catch (const std::logic_error&) {
      throw ConfigError("--threshold must be 'auto' or a word count, got '" + f.threshold + "'");
    }
  }
  const ckpt::Checkpoint model = ckpt::load(f.ckpt);
  const std::string kind_name = f.kind.empty() ? model.metadata.value("kind", std::string()) : f.kind;
  if (kind_name.empty()) throw ConfigError("analyze-length: --kind is required for this checkpoint");
  if (!model.metadata.contains("labels")) {
    throw ConfigError("analyze-length: checkpoint has no label space; save it with finetune --save-model");
  }
  const data::TaskKind kind = data::task_kind_from_string(kind_name);
  const train::LabelSpace labels{model.metadata.at("labels").get<std::vector<std::string>>()};
  const auto records = load_task(f.data, kind);
  const std::size_t threshold =
      fixed ? *fixed : analysis::length_threshold(records, model.tokenizer, f.limit);
  const train::Predictions pred =
      train::predict(model.state, model.tokenizer, kind, labels, records, f.common.resolved_threads());
  nlohmann::json j = analysis::to_json(analysis::error_rate_by_length(records, pred, threshold));
  j["config"] = {{"command", "analyze-length"},
                 {"kind", kind_name},
                 {"threshold", f.threshold},
                 {"limit", f.limit},
                 {"records", records.size()}};
  write_json(f.out, j);
}

struct BenchFlags {
  CommonFlags common;
  std::string sizes = "512,1024,2048,4096";
  int window = 512;
  int heads = 1;
  int head_dim = 64;
  std::size_t reps = 3;
  std::size_t max_dense = 8192;
  std::string out = "-";
};

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (auto& v : t.data()) v = static_cast<Real>(rng.normal());
  return t;
}

template <typename F>
double best_seconds(std::size_t reps, F&& body) {
  double best = 1e300;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void bench_attention(const BenchFlags& f) {
  const std::vector<std::size_t> sizes = parse_sizes(f.sizes);
  attn::AttentionSpec spec;
  spec.n_heads = f.heads;
  spec.head_dim = f.head_dim;
  spec.window = f.window;
  spec.global_indices = {0};
  for (std::size_t n : sizes) {
    if (n < static_cast<std::size_t>(f.window)) {
      throw ConfigError("bench-attention: n = " + std::to_string(n) + " is below the window");
    }
    spec.validate(n);
  }
  Rng rng(f.common.seed.value_or(0));
  const std::size_t hidden = static_cast<std::size_t>(spec.hidden());

  std::string csv = "# config: " +
                    nlohmann::json{{"command", "bench-attention"}, {"window", f.window},
                                   {"heads", f.heads}, {"head_dim", f.head_dim},
                                   {"globals", spec.global_indices}, {"reps", f.reps}}
                        .dump() +
                    "\n" + "n,pattern,seconds,score_entries,mults,entries_ratio_to_previous,status\n";
  std::uint64_t prev_dense = 0, prev_sparse = 0;
  std::string ratios = "# sparse/dense score entries:";
  char line[256];
  for (std::size_t n : sizes) {
    const attn::AttentionCost dense = attn::full_attention_cost(n, f.heads, f.head_dim);
    const attn::AttentionCost sparse = attn::attention_cost(n, spec);
    attn::Qkv local{random_matrix(n, hidden, rng), random_matrix(n, hidden, rng),
                    random_matrix(n, hidden, rng)};
    attn::Qkv global{random_matrix(spec.global_indices.size(), hidden, rng), local.k, local.v};

    std::string status = "ok";
    double dense_s = 0.0;
    if (n > f.max_dense) {
      status = "skipped";
    } else {
      try {
        dense_s = best_seconds(f.reps, [&] { attn::full_attention(local.q, local.k, local.v, f.heads); });
      } catch (const std::bad_alloc&) {
        status = "skipped";
      }
    }
    auto ratio = [](std::uint64_t cur, std::uint64_t prev) {
      return prev == 0 ? std::string() : std::to_string(static_cast<double>(cur) / static_cast<double>(prev));
    };
    std::snprintf(line, sizeof line, "%zu,full,%.6f,%llu,%llu,%s,%s\n", n, dense_s,
                  static_cast<unsigned long long>(dense.score_entries),
                  static_cast<unsigned long long>(dense.mults), ratio(dense.score_entries, prev_dense).c_str(),
                  status.c_str());
    csv += line;
    const double sparse_s =
        best_seconds(f.reps, [&] { attn::sliding_global_attention(local, global, spec); });
    std::snprintf(line, sizeof line, "%zu,sliding_global,%.6f,%llu,%llu,%s,ok\n", n, sparse_s,
                  static_cast<unsigned long long>(sparse.score_entries),
                  static_cast<unsigned long long>(sparse.mults),
                  ratio(sparse.score_entries, prev_sparse).c_str());
    csv += line;
    ratios += " n=" + std::to_string(n) + ":" +
              std::to_string(static_cast<double>(sparse.score_entries) /
                             static_cast<double>(dense.score_entries));
    prev_dense = dense.score_entries;
    prev_sparse = sparse.score_entries;
  }
  write_text(f.out, csv + ratios + "\n");
}

}  // namespace

void add_analysis_commands(CLI::App& app) {
  {
    auto f = std::make_shared<AttentionFlags>();
    auto* cmd = app.add_subcommand("analyze-attention", "Per-word-position [CLS] attention profile (CSV)");
    add_common_flags(cmd, f->common, false);
    cmd->add_option("--ckpt", f->ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    cmd->add_option("--data", f->data, "Task records to profile")->check(CLI::ExistingFile);
    cmd->add_option("--kind", f->kind, "Kind of --data (default: from the checkpoint)")
        ->check(CLI::IsMember(kTaskKindNames));
    cmd->add_option("--corpus", f->corpus_path, "Plain documents, one per line")->check(CLI::ExistingFile);
    cmd->add_option("--out", f->out, "Profile CSV ('-' for standard output)");
    cmd->callback([f] { analyze_attention(*f); });
  }
  {
    auto f = std::make_shared<LengthFlags>();
    auto* cmd = app.add_subcommand("analyze-length", "Error rates of short and long documents");
    add_common_flags(cmd, f->common, false);
    cmd->add_option("--ckpt", f->ckpt, "Fine-tuned checkpoint (finetune --save-model)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--data", f->data, "Test records")->required()->check(CLI::ExistingFile);
    cmd->add_option("--kind", f->kind, "Task kind (default: from the checkpoint)")
        ->check(CLI::IsMember(kTaskKindNames));
    cmd->add_option("--threshold", f->threshold, "'auto' or a word count");
    cmd->add_option("--limit", f->limit, "Token limit used by 'auto'")->check(CLI::PositiveNumber);
    cmd->add_option("--out", f->out, "Buckets JSON ('-' for standard output)");
    cmd->callback([f] { analyze_length(*f); });
  }
  {
    auto f = std::make_shared<BenchFlags>();
    auto* cmd = app.add_subcommand("bench-attention", "Time and count full vs sliding+global attention");
    add_common_flags(cmd, f->common);
    cmd->add_option("--n", f->sizes, "Comma-separated sequence lengths");
    cmd->add_option("--window", f->window, "Window (total span)");
    cmd->add_option("--heads", f->heads, "Heads")->check(CLI::PositiveNumber);
    cmd->add_option("--head-dim", f->head_dim, "Head dimension")->check(CLI::PositiveNumber);
    cmd->add_option("--reps", f->reps, "Repetitions (best time kept)")->check(CLI::PositiveNumber);
    cmd->add_option("--max-dense", f->max_dense, "Skip full attention above this length");
    cmd->add_option("--out", f->out, "CSV ('-' for standard output)");
    cmd->callback([f] { bench_attention(*f); });
  }
}

}  // namespace longdoc::cli
