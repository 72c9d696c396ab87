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

#include <cmath>
#include <fstream>
#include <memory>

#include "cli/commands.hpp"
#include "cli/common.hpp"
#include "longdoc/checkpoint.hpp"
#include "longdoc/errors.hpp"
#include "longdoc/rng.hpp"
#include "longdoc/training.hpp"

namespace longdoc::cli {

namespace {

struct PretrainFlags {
  CommonFlags common;
  std::string strategy = "scratch";
  std::string corpus_path;
  std::string shard;
  std::string tokenizer;
  std::string init;
  std::string out;
  std::string log;
  std::optional<std::size_t> steps;
  std::optional<double> lr;
  std::optional<std::size_t> warmup;
  std::optional<std::size_t> batch_size;
  std::optional<int> window;
  std::size_t log_every = 0;
};

tok::Tokenizer scratch_tokenizer(const PretrainFlags& f, const PipelineConfig& config) {
  if (!f.tokenizer.empty()) return load_tokenizer(f.tokenizer);
  if (f.corpus_path.empty()) throw ConfigError("pretrain: --shard needs --tokenizer");
  tok::TrainOptions options;
  options.target_size = config.tokenizer.vocab_size;
  options.min_freq = config.tokenizer.min_freq;
  options.normalizer = config.tokenizer.normalizer;
  return tok::train_wordpiece(corpus::read_corpus(f.corpus_path), options);
}

void pretrain(const PretrainFlags& f) {
  PipelineConfig config = load_config(f.common.config);
  train::TrainConfig& tc = config.pretrain;
  tc.strategy = train::strategy_from_string(f.strategy);
  if (f.common.seed) tc.seed = *f.common.seed;
  if (f.steps) tc.schedule.total_steps = *f.steps;
  if (f.lr) tc.schedule.peak_lr = *f.lr;
  if (f.warmup) tc.schedule.warmup_steps = *f.warmup;
  if (f.batch_size) tc.batch_size = *f.batch_size;
  if (f.window) config.model.window = *f.window;
  tc.validate();
  if (tc.strategy != train::Strategy::kScratch && f.init.empty()) {
    throw ConfigError("pretrain: strategy '" + f.strategy + "' needs --init");
  }
  if (tc.strategy == train::Strategy::kScratch && !f.init.empty()) {
    throw ConfigError("pretrain: --init is not used by strategy 'scratch'");
  }

  ckpt::Checkpoint start;
  switch (tc.strategy) {
    case train::Strategy::kScratch: {
      start.tokenizer = scratch_tokenizer(f, config);
      config.model.vocab_size = static_cast<int>(start.tokenizer.vocab().size());
      config.model.validate();
      start.state = ckpt::init_from_scratch(config.model, HeadConfig{HeadKind::kMlm, config.model.vocab_size},
                                            derive_seed(tc.seed, "init"));
      break;
    }
    case train::Strategy::kConvert:
      start = ckpt::convert_bert_to_longformer(ckpt::load(f.init), config.model.window,
                                               derive_seed(tc.seed, "convert"));
      break;
    case train::Strategy::kContinual:
      start = ckpt::init_continual(ckpt::load(f.init));
      break;
  }
  if (!start.state.head || start.state.head->kind != HeadKind::kMlm) {
    ckpt::init_head(start.state, HeadConfig{HeadKind::kMlm, start.state.config.vocab_size},
                    derive_seed(tc.seed, "head"));
  }
  config.model = start.state.config;

  std::vector<corpus::PackedSequence> seqs;
  corpus::PackingConfig pc = config.packing_for(config.model);
  if (!f.shard.empty()) {
    seqs = corpus::read_shard(f.shard);
    if (!seqs.empty()) pc.seq_len = static_cast<int>(seqs.front().ids.size());
  } else {
    if (f.corpus_path.empty()) throw ConfigError("pretrain: give --corpus or --shard");
    seqs = corpus::pack_corpus(corpus::read_corpus(f.corpus_path), start.tokenizer, pc, nullptr,
                               f.common.resolved_threads());
  }
  if (pc.seq_len > config.model.max_positions) {
    throw ConfigError("pretrain: sequences of " + std::to_string(pc.seq_len) +
                      " tokens exceed the model's " + std::to_string(config.model.max_positions));
  }
  for (const auto& s : seqs) {
    for (TokenId id : s.ids) {
      if (id < 0 || id >= config.model.vocab_size) {
        throw DataError("pretrain: token id " + std::to_string(id) +
                        " outside the vocabulary; shard and tokenizer disagree");
      }
    }
  }

  std::ofstream log;
  if (!f.log.empty()) {
    log.open(f.log, std::ios::trunc);
    if (!log) throw DataError("cannot open " + f.log);
  }
  train::StepLog last;
  auto result = train::pretrain_mlm(start.state, seqs, tc, [&](const train::StepLog& s) {
    last = s;
    if (log) log << train::to_json_line(s).dump() << "\n";
    if (f.log_every > 0 && (s.step % f.log_every == 0 || s.step + 1 == tc.schedule.total_steps)) {
      note("step " + std::to_string(s.step) + " loss " + std::to_string(s.loss) + " accuracy " +
           std::to_string(s.accuracy));
    }
  });

  ckpt::Checkpoint out{std::move(result.state), start.tokenizer, nlohmann::json::object()};
  nlohmann::json effective = to_json(config);
  effective["packing"] = {{"seq_len", pc.seq_len}, {"min_body", pc.min_body}};
  out.metadata = {{"command", "pretrain"},
                  {"strategy", f.strategy},
                  {"config", effective},
                  {"sequences", seqs.size()},
                  {"final_step", {{"loss", last.loss}, {"accuracy", last.accuracy}}}};
  if (!f.init.empty()) out.metadata["init_tokenizer_hash"] = start.tokenizer.hash();
  ckpt::save(out, f.out);
  note("saved " + f.out + " after " + std::to_string(tc.schedule.total_steps) + " steps, loss " +
       std::to_string(last.loss));
}

struct ConvertFlags {
  CommonFlags common;
  std::string src;
  std::string out;
  std::optional<int> window;
};

void convert(const ConvertFlags& f) {
  const PipelineConfig config = load_config(f.common.config);
  const int window = f.window.value_or(config.model.window);
  const std::uint64_t seed = f.common.seed.value_or(config.pretrain.seed);
  ckpt::Checkpoint out = ckpt::convert_bert_to_longformer(ckpt::load(f.src), window,
                                                          derive_seed(seed, "convert"));
  out.metadata["command"] = "convert";
  out.metadata["config"] = {{"window", window}, {"seed", seed}};
  ckpt::save(out, f.out);
}

struct InspectFlags {
  std::string path;
  bool tensors = false;
  std::string out = "-";
};

void inspect(const InspectFlags& f) {
  nlohmann::json header = ckpt::read_header(f.path);
  const ModelConfig config = header.at("config").get<ModelConfig>();
  std::optional<HeadConfig> head;
  if (header.contains("head") && !header.at("head").is_null()) head = header.at("head").get<HeadConfig>();
  header["parameter_count"] = parameter_count(config, head);
  header["tensor_count"] = header.at("tensors").size();
  if (!f.tensors) header.erase("tensors");
  header["tokenizer"].erase("tokens");
  write_json(f.out, header);
}

}  // namespace

void add_model_commands(CLI::App& app) {
  {
    auto f = std::make_shared<PretrainFlags>();
    auto* cmd = app.add_subcommand("pretrain", "MLM pre-training with one of three initializations");
    add_common_flags(cmd, f->common);
    cmd->add_option("--strategy", f->strategy, "scratch, convert or continual")
        ->check(CLI::IsMember({"scratch", "convert", "continual"}));
    cmd->add_option("--corpus", f->corpus_path, "Text corpus, one document per line")
        ->check(CLI::ExistingFile);
    cmd->add_option("--shard", f->shard, "Packed shard (instead of --corpus)")->check(CLI::ExistingFile);
    cmd->add_option("--tokenizer", f->tokenizer, "Tokenizer JSON (scratch; trained on --corpus if absent)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--init", f->init, "Starting checkpoint (convert, continual)")->check(CLI::ExistingFile);
    cmd->add_option("--out", f->out, "Output checkpoint")->required();
    cmd->add_option("--log", f->log, "Per-step JSON lines");
    cmd->add_option("--steps", f->steps, "Optimizer updates")->check(CLI::PositiveNumber);
    cmd->add_option("--lr", f->lr, "Peak learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--warmup", f->warmup, "Warmup steps");
    cmd->add_option("--batch-size", f->batch_size, "Sequences per micro-batch")->check(CLI::PositiveNumber);
    cmd->add_option("--window", f->window, "Attention window (scratch, convert)");
    cmd->add_option("--log-every", f->log_every, "Progress on standard error every N steps");
    cmd->get_option("--shard")->excludes("--corpus");
    cmd->callback([f] { pretrain(*f); });
  }
  {
    auto f = std::make_shared<ConvertFlags>();
    auto* cmd = app.add_subcommand("convert", "Convert a 512-position checkpoint to 4,096 positions");
    add_common_flags(cmd, f->common);
    cmd->add_option("--src", f->src, "BERT-shaped checkpoint")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", f->out, "Output checkpoint")->required();
    cmd->add_option("--window", f->window, "Attention window of the result");
    cmd->callback([f] { convert(*f); });
  }
  {
    auto f = std::make_shared<InspectFlags>();
    auto* cmd = app.add_subcommand("ckpt-inspect", "Print a checkpoint header");
    cmd->add_option("--ckpt", f->path, "Checkpoint")->required()->check(CLI::ExistingFile);
    cmd->add_flag("--tensors", f->tensors, "Include the tensor manifest");
    cmd->add_option("--out", f->out, "Output JSON ('-' for standard output)");
    cmd->callback([f] { inspect(*f); });
  }
}

}  // namespace longdoc::cli
