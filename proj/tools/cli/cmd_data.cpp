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

#include <memory>

#include "cli/commands.hpp"
#include "cli/common.hpp"
#include "longdoc/corpus.hpp"
#include "longdoc/datasets.hpp"
#include "longdoc/errors.hpp"
#include "longdoc/tokenizer.hpp"

namespace longdoc::cli {

namespace {

struct SynthFlags {
  CommonFlags common;
  std::string kind;
  std::size_t size = 200;
  std::string out;
  data::SynthOptions options;
  std::size_t words_per_doc = 600;
  std::size_t alphabet = 40;
};

void synth(const SynthFlags& f) {
  const std::uint64_t seed = f.common.seed.value_or(0);
  if (f.kind == "pattern") {
    std::string text;
    for (const auto& doc : corpus::synth_pattern_corpus(f.size, f.words_per_doc, f.alphabet, seed)) {
      text += doc + "\n";
    }
    write_text(f.out, text);
    return;
  }
  const data::TaskKind kind = data::task_kind_from_string(f.kind);
  write_text(f.out, data::format_task_text(data::synth_generate(kind, f.size, seed, f.options), kind));
}

struct TokenizerFlags {
  CommonFlags common;
  std::vector<std::string> corpora;
  std::vector<std::string> task_files;
  std::string kind;
  std::optional<std::size_t> vocab_size;
  std::optional<std::size_t> min_freq;
  bool lowercase = false;
  bool no_nfc = false;
  std::string out;
};

void tokenizer_train(const TokenizerFlags& f) {
  PipelineConfig config = load_config(f.common.config);
  if (f.vocab_size) config.tokenizer.vocab_size = *f.vocab_size;
  if (f.min_freq) config.tokenizer.min_freq = *f.min_freq;
  if (f.lowercase) config.tokenizer.normalizer.lowercase = true;
  if (f.no_nfc) config.tokenizer.normalizer.nfc = false;
  if (!f.task_files.empty() && f.kind.empty()) throw ConfigError("--task-file needs --kind");

  std::vector<std::string> docs;
  for (const auto& path : f.corpora) {
    auto d = corpus::read_corpus(path);
    docs.insert(docs.end(), d.begin(), d.end());
  }
  for (const auto& path : f.task_files) {
    for (const auto& r : load_task(path, data::task_kind_from_string(f.kind))) {
      docs.push_back(data::record_text(r));
    }
  }
  if (docs.empty()) throw ConfigError("tokenizer-train: no input documents");

  tok::TrainOptions options;
  options.target_size = config.tokenizer.vocab_size;
  options.min_freq = config.tokenizer.min_freq;
  options.normalizer = config.tokenizer.normalizer;
  const tok::Tokenizer t = tok::train_wordpiece(docs, options);
  nlohmann::json j = t;
  j["hash"] = t.hash();
  j["config"] = {{"command", "tokenizer-train"},
                 {"tokenizer", to_json(config).at("tokenizer")},
                 {"documents", docs.size()}};
  write_json(f.out, j);
  note("vocabulary of " + std::to_string(t.vocab().size()) + " tokens from " +
       std::to_string(docs.size()) + " documents");
}

struct PackFlags {
  CommonFlags common;
  std::string corpus_path;
  std::string tokenizer;
  std::optional<int> seq_len;
  std::optional<int> min_body;
  std::string out;
  std::string stats = "-";
};

void pack(const PackFlags& f) {
  const PipelineConfig config = load_config(f.common.config);
  corpus::PackingConfig pc = config.packing_for(config.model);
  if (f.seq_len) {
    pc.seq_len = *f.seq_len;
    if (!config.packing && !f.min_body) pc.min_body = std::min(512, pc.seq_len - 2);
  }
  if (f.min_body) pc.min_body = *f.min_body;
  pc.validate();

  const tok::Tokenizer t = load_tokenizer(f.tokenizer);
  const auto docs = corpus::read_corpus(f.corpus_path);
  corpus::PackStats stats;
  const auto seqs = corpus::pack_corpus(docs, t, pc, &stats, f.common.resolved_threads());
  corpus::write_shard(f.out, seqs, pc.seq_len);
  write_json(f.stats, {{"config", {{"command", "pack"},
                                   {"seq_len", pc.seq_len},
                                   {"min_body", pc.min_body},
                                   {"tokenizer_hash", t.hash()}}},
                       {"documents", stats.documents},
                       {"empty_documents", stats.empty_documents},
                       {"sequences", stats.sequences},
                       {"dropped_tails", stats.dropped_tails},
                       {"dropped_tokens", stats.dropped_tokens}});
}

}  // namespace

void add_data_commands(CLI::App& app) {
  {
    auto f = std::make_shared<SynthFlags>();
    auto* cmd = app.add_subcommand("synth", "Generate a synthetic task file or pattern corpus");
    add_common_flags(cmd, f->common);
    cmd->add_option("--kind", f->kind, "Task kind or 'pattern'")
        ->required()
        ->check(CLI::IsMember({"pos", "ner", "multiclass", "multilabel", "sts", "mcqa", "pattern"}));
    cmd->add_option("--size", f->size, "Records (documents for 'pattern')")->check(CLI::PositiveNumber);
    cmd->add_option("--out", f->out, "Output file ('-' for standard output)")->required();
    cmd->add_option("--classes", f->options.n_classes, "Classes or entity types");
    cmd->add_option("--min-words", f->options.min_words, "Shortest document in words");
    cmd->add_option("--max-words", f->options.max_words, "Longest document in words");
    cmd->add_option("--filler-vocab", f->options.filler_vocab, "Distinct filler words");
    cmd->add_flag("--signal-at-start", f->options.signal_at_start,
                  "MULTICLASS: label keyword opens the document");
    cmd->add_option("--words-per-doc", f->words_per_doc, "Pattern corpus: words per document");
    cmd->add_option("--alphabet", f->alphabet, "Pattern corpus: distinct words");
    cmd->callback([f] { synth(*f); });
  }
  {
    auto f = std::make_shared<TokenizerFlags>();
    auto* cmd = app.add_subcommand("tokenizer-train", "Train a WordPiece vocabulary");
    add_common_flags(cmd, f->common, false);
    cmd->add_option("--corpus", f->corpora, "Text corpus, one document per line (repeatable)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--task-file", f->task_files, "Task file whose texts are added (repeatable)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--kind", f->kind, "Kind of the --task-file inputs")
        ->check(CLI::IsMember(kTaskKindNames));
    cmd->add_option("--vocab-size", f->vocab_size, "Target vocabulary size")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--min-freq", f->min_freq, "Minimum pair frequency for a merge");
    cmd->add_flag("--lowercase", f->lowercase, "Lowercase during normalization");
    cmd->add_flag("--no-nfc", f->no_nfc, "Skip NFC normalization");
    cmd->add_option("--out", f->out, "Tokenizer JSON")->required();
    cmd->callback([f] { tokenizer_train(*f); });
  }
  {
    auto f = std::make_shared<PackFlags>();
    auto* cmd = app.add_subcommand("pack", "Pack a corpus into fixed-length MLM sequences");
    add_common_flags(cmd, f->common, false);
    cmd->add_option("--corpus", f->corpus_path, "Text corpus, one document per line")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--tokenizer", f->tokenizer, "Tokenizer JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seq-len", f->seq_len, "Sequence length including [CLS] and [EOS]");
    cmd->add_option("--min-body", f->min_body, "Shortest chunk kept, in tokens");
    cmd->add_option("--out", f->out, "Shard file")->required();
    cmd->add_option("--stats", f->stats, "Packing statistics JSON ('-' for standard output)");
    cmd->callback([f] { pack(*f); });
  }
}

}  // namespace longdoc::cli
