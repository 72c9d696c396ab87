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

#ifndef LONGDOC_METRICS_HPP_
#define LONGDOC_METRICS_HPP_

#include <compare>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "longdoc/real.hpp"

namespace longdoc::inline LONGDOC_ABI::metrics {

using TagSequence = std::vector<std::string>;
using LabelSet = std::vector<std::string>;

struct EntitySpan {
  std::string label;
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive

  auto operator<=>(const EntitySpan&) const = default;
};

// Strict IOB2: an entity opens only at B-X and extends over following I-X
// of the same type; any other I-X belongs to no entity. Raises FormatError
// for a tag other than O, B-X, I-X.
std::vector<EntitySpan> iob2_extract_strict(std::span<const std::string> tags);

// Every token as its own one-token span (plain tag sets such as POS).
std::vector<EntitySpan> unit_spans(std::span<const std::string> tags);

// True when every tag is O, B-X or I-X.
bool is_iob2(std::span<const std::string> tags);

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_gold = 0;
  std::size_t n_pred = 0;
  std::size_t n_correct = 0;
};

// Micro-averaged exact (label, start, end) matching over a corpus.
// Precision is 0 without predictions, recall 0 without gold entities; with
// neither, all three are 1. Raises AlignmentError on a length mismatch.
PrfScore span_f1(const std::vector<TagSequence>& gold, const std::vector<TagSequence>& pred);
// Same counting over unit spans: micro F1 over tokens.
PrfScore unit_span_f1(const std::vector<TagSequence>& gold, const std::vector<TagSequence>& pred);

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct WeightedF1 {
  double value = 0.0;
  std::map<std::string, ClassScore> per_class;
};

// Per-class F1 weighted by gold support; classes absent from gold weigh 0.
// Raises EmptySelectionError on empty input.
WeightedF1 weighted_f1(std::span<const std::string> gold, std::span<const std::string> pred);
// Multilabel: binary F1 per class across examples, weighted by the number
// of examples whose gold set contains the class.
WeightedF1 weighted_f1_multilabel(const std::vector<LabelSet>& gold,
                                  const std::vector<LabelSet>& pred);

struct EmrHamming {
  double emr = 0.0;
  double hamming = 0.0;
};

// EMR: exact set equality; Hamming score: mean |G n P| / |G u P| with two
// empty sets counting as 1.
EmrHamming emr_hamming(const std::vector<LabelSet>& gold, const std::vector<LabelSet>& pred);

// Pearson correlation of average ranks. Raises UndefinedCorrelationError
// when either rank vector is constant.
double spearman(std::span<const double> x, std::span<const double> y);
std::vector<double> average_ranks(std::span<const double> values);

// 1 - mean min(1, |p - g| / max(g, 5 - g)) with predictions clamped to
// [0, 5]. Raises RangeError for gold outside [0, 5].
double edrm(std::span<const double> gold, std::span<const double> pred);

struct TTest {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
};

// Two-sided pooled-variance Student's t-test. Zero pooled variance gives
// p = 1 for equal means and p = 0 otherwise.
TTest students_ttest(std::span<const double> a, std::span<const double> b);

struct MetricReport {
  std::string task;
  std::string metric;  // primary metric name
  double value = 0.0;
  std::map<std::string, double> extra;  // secondary metrics
  std::size_t support = 0;
  std::map<std::string, ClassScore> per_class;
};

nlohmann::json to_json(const MetricReport& report);
std::string csv_header();
std::string csv_row(const MetricReport& report);

}  // namespace longdoc::inline LONGDOC_ABI::metrics

#endif  // LONGDOC_METRICS_HPP_
