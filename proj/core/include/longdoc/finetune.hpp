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

#ifndef LONGDOC_FINETUNE_HPP_
#define LONGDOC_FINETUNE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "longdoc/checkpoint.hpp"
#include "longdoc/datasets.hpp"
#include "longdoc/metrics.hpp"
#include "longdoc/training.hpp"

namespace longdoc::inline LONGDOC_ABI::train {

struct Task {
  std::string name;
  data::TaskKind kind = data::TaskKind::kMulticlass;
  data::Splits splits;
};

// Sorted label strings seen in the training split: tags (token tasks),
// class labels, multilabel labels, or MCQA answer combinations ("AB").
struct LabelSpace {
  std::vector<std::string> labels;

  std::size_t size() const { return labels.size(); }
  // -1 for a label never seen in training.
  int index(const std::string& label) const;
};

LabelSpace build_label_space(data::TaskKind kind, const std::vector<data::TaskRecord>& train);
HeadConfig head_for(data::TaskKind kind, const LabelSpace& labels);

// One encoder input. Token tasks keep the mapping from words to their
// first subword; sequence tasks carry their target.
struct ModelInput {
  std::vector<TokenId> ids;
  std::size_t record = 0;
  // Token tasks.
  std::size_t word_begin = 0;             // first word of the record covered
  std::vector<std::size_t> word_first;    // index in ids of each covered word
  std::vector<std::int32_t> token_labels; // per id; -1 = ignored
  // Sequence tasks.
  std::int32_t label = -1;                // MULTICLASS / MCQA
  std::vector<Real> targets;              // MULTILABEL (0/1 per label) or STS (one score)
};

// Joins segments as [CLS] s0 [SEP] s1 ... [EOS], trimming the longest
// segment one token at a time until the whole fits in max_len.
std::vector<TokenId> sequence_template(std::vector<std::vector<TokenId>> segments,
                                       std::size_t max_len);

// Builds the inputs of one record. Token tasks: one input per document for
// the sliding geometry, per sentence otherwise; a unit longer than the
// model limit is halved at the word holding its middle subword until it
// fits. Sequence tasks follow the task templates.
std::vector<ModelInput> build_inputs(const data::TaskRecord& record, std::size_t index,
                                     const tok::Tokenizer& tokenizer, const ModelConfig& config,
                                     const LabelSpace& labels);

struct Predictions {
  std::vector<std::string> labels;               // MULTICLASS, MCQA (combination)
  std::vector<metrics::LabelSet> label_sets;     // MULTILABEL, MCQA (letters)
  std::vector<double> scores;                    // STS
  std::vector<metrics::TagSequence> tags;        // POS, NER
};

Predictions predict(const EncoderState& state, const tok::Tokenizer& tokenizer, data::TaskKind kind,
                    const LabelSpace& labels, const std::vector<data::TaskRecord>& records,
                    int threads = 1);

// Primary metric per task kind: span F1 (NER; POS in IOB2 form), token F1
// (plain POS tags), weighted F1 (MULTICLASS, MULTILABEL), EDRM (STS, with
// Spearman as extra), Hamming score (MCQA, with EMR and weighted F1 over
// answer combinations as extras).
metrics::MetricReport evaluate(const std::string& task, data::TaskKind kind,
                               const std::vector<data::TaskRecord>& gold, const Predictions& pred);

// Exact correctness of one prediction (token tasks: every tag; STS: score
// within 0.5 of gold).
bool is_correct(const data::TaskRecord& gold, const Predictions& pred, std::size_t i);

struct FinetuneConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 2;
  double lr = 5e-5;
  double warmup_ratio = 0.0;
  std::uint64_t seed = 0;
  AdamWConfig optimizer;
  int threads = 1;  // evaluation only
  bool keep_model = false;
};

void to_json(nlohmann::json& j, const FinetuneConfig& c);
void from_json(const nlohmann::json& j, FinetuneConfig& c);

struct EpochLog {
  std::size_t epoch = 0;
  std::string split;
  double metric = 0.0;
  double loss = 0.0;
};

struct RunResult {
  double lr = 0.0;
  std::uint64_t seed = 0;
  std::vector<EpochLog> trace;
  std::size_t best_epoch = 0;
  double validation_metric = 0.0;
  metrics::MetricReport test;
  Predictions test_predictions;
  LabelSpace labels;
  std::optional<EncoderState> model;  // with keep_model
};

nlohmann::json to_json(const RunResult& r);
nlohmann::json to_json_line(const EpochLog& log);

// Fine-tunes a fresh task head on top of the checkpoint encoder, keeping
// the epoch with the best validation metric (last epoch without a
// validation split), and scores the test split.
RunResult finetune(const Task& task, const ckpt::Checkpoint& init, const FinetuneConfig& config);

}  // namespace longdoc::inline LONGDOC_ABI::train

#endif  // LONGDOC_FINETUNE_HPP_
