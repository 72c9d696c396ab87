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

#ifndef LONGDOC_TOOLS_COMMON_HPP_
#define LONGDOC_TOOLS_COMMON_HPP_

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "longdoc/corpus.hpp"
#include "longdoc/datasets.hpp"
#include "longdoc/encoder.hpp"
#include "longdoc/finetune.hpp"
#include "longdoc/tokenizer.hpp"
#include "longdoc/training.hpp"

namespace longdoc::cli {

inline const std::vector<std::string> kTaskKindNames{"pos", "ner", "multiclass",
                                                     "multilabel", "sts", "mcqa"};

struct TokenizerSettings {
  std::size_t vocab_size = 8000;
  std::size_t min_freq = 1;
  tok::NormalizerOptions normalizer;
};

// Every command reads the sections it needs from one JSON file; flags
// override individual fields. Missing sections keep their defaults.
struct PipelineConfig {
  ModelConfig model;
  TokenizerSettings tokenizer;
  std::optional<corpus::PackingConfig> packing;  // default derived from the model
  train::TrainConfig pretrain;
  train::FinetuneConfig finetune;
  train::GridSpec grid;
  data::SplitSpec split;

  // Packing for the model geometry: seq_len = max_positions and
  // min_body = min(512, seq_len - 2) unless configured.
  corpus::PackingConfig packing_for(const ModelConfig& m) const;
};

PipelineConfig load_config(const std::string& path);
nlohmann::json to_json(const PipelineConfig& c);

// "-" or empty means standard output.
void write_text(const std::string& path, const std::string& content);
void write_json(const std::string& path, const nlohmann::json& j);
std::string read_text(const std::string& path);
nlohmann::json read_json(const std::string& path);

tok::Tokenizer load_tokenizer(const std::string& path);
std::vector<data::TaskRecord> load_task(const std::string& path, data::TaskKind kind);

// Parses "a,b,c" lists of numbers.
std::vector<double> parse_doubles(const std::string& list);
std::vector<std::size_t> parse_sizes(const std::string& list);

// Writes one prediction per line as JSON.
std::string predictions_jsonl(data::TaskKind kind, const std::vector<data::TaskRecord>& records,
                              const train::Predictions& pred);

// Diagnostics on standard error.
void note(const std::string& message);

}  // namespace longdoc::cli

#endif  // LONGDOC_TOOLS_COMMON_HPP_
