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

#ifndef LONGDOC_ANALYSIS_HPP_
#define LONGDOC_ANALYSIS_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "longdoc/datasets.hpp"
#include "longdoc/encoder.hpp"
#include "longdoc/finetune.hpp"
#include "longdoc/tokenizer.hpp"

namespace longdoc::inline LONGDOC_ABI::analysis {

// ---------------------------------------------------------------------------
// Error rate by length

// Largest word count W such that every record with at most W words
// tokenizes to at most `limit` tokens (specials excluded). When no record
// exceeds the limit, the longest record's word count.
std::size_t length_threshold(const std::vector<data::TaskRecord>& records,
                             const tok::Tokenizer& tokenizer, std::size_t limit = 512);

struct Bucket {
  std::size_t count = 0;
  std::size_t errors = 0;
  std::optional<double> rate;  // absent for an empty bucket
};

struct LengthBuckets {
  std::size_t threshold = 0;
  Bucket short_docs;  // word_count <= threshold
  Bucket long_docs;   // word_count > threshold
};

LengthBuckets error_rate_by_length(std::span<const std::size_t> word_counts,
                                   const std::vector<bool>& correct, std::size_t threshold);
// Error = not exactly correct (multilabel: predicted set != gold set).
LengthBuckets error_rate_by_length(const std::vector<data::TaskRecord>& gold,
                                   const train::Predictions& pred, std::size_t threshold);

// Percentage with two decimals ("14.10"), or "-" when absent.
std::string format_rate(const std::optional<double>& rate);
nlohmann::json to_json(const LengthBuckets& buckets);

// ---------------------------------------------------------------------------
// [CLS] attention profile

using WordSpan = std::pair<std::size_t, std::size_t>;  // token range [first, second)

struct AttentionProfile {
  std::vector<double> mean_weight;     // per word position
  std::vector<std::size_t> doc_count;  // documents reaching the position
  std::size_t n_heads = 0;
  std::vector<std::string> warnings;
};

// Word weights of one document: the [CLS] rows (heads x n) are summed over
// heads, then over the tokens of each word. Spans index the body, which
// starts after [CLS] at row position 1.
std::vector<double> word_weights(const Tensor& cls_rows, std::span<const WordSpan> spans);

// Sum of one document's raw [CLS] rows over all keys; equals the head count
// up to rounding.
double attention_mass(const Tensor& cls_rows);

// Averages word weights per position over the documents long enough to
// reach it.
AttentionProfile average_profile(const std::vector<std::vector<double>>& documents,
                                 std::size_t n_heads);

struct ProfileDocument {
  std::vector<double> weights;
  double mass = 0.0;
  bool truncated = false;
};

// Encodes each text as [CLS] body [EOS] with last-layer attention capture;
// bodies longer than the model allows are truncated with a warning and
// only fully kept words are profiled.
std::vector<ProfileDocument> profile_documents(const EncoderState& state,
                                               const tok::Tokenizer& tokenizer,
                                               const std::vector<std::string>& texts,
                                               int threads = 1);
AttentionProfile attention_profile(const EncoderState& state, const tok::Tokenizer& tokenizer,
                                   const std::vector<std::string>& texts, int threads = 1);

// Share of the total profile weight held by the first ceil(fraction * P)
// positions.
double leading_mass_share(const AttentionProfile& profile, double fraction);

// CSV with a commented header stating the normalization, then
// "position,mean_weight,doc_count" rows (positions from 0).
std::string to_csv(const AttentionProfile& profile);

}  // namespace longdoc::inline LONGDOC_ABI::analysis

#endif  // LONGDOC_ANALYSIS_HPP_
