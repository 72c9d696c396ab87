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

#include "longdoc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "longdoc/errors.hpp"

namespace longdoc::inline LONGDOC_ABI::metrics {

namespace {

// 'B', 'I' or 'O'; raises FormatError otherwise.
char tag_prefix(const std::string& tag, std::size_t i) {
  if (tag == "O") return 'O';
  if (tag.size() >= 3 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') return tag[0];
  throw FormatError("tag '" + tag + "' at position " + std::to_string(i) +
                    " is not O, B-X or I-X");
}

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

PrfScore score_spans(const std::vector<TagSequence>& gold, const std::vector<TagSequence>& pred,
                     std::vector<EntitySpan> (*extract)(std::span<const std::string>)) {
  if (gold.size() != pred.size()) {
    throw AlignmentError("span_f1: " + std::to_string(gold.size()) + " gold vs " +
                         std::to_string(pred.size()) + " predicted sequences");
  }
  PrfScore s;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size()) {
      throw AlignmentError("span_f1: sequence " + std::to_string(i) + " has " +
                           std::to_string(gold[i].size()) + " gold vs " +
                           std::to_string(pred[i].size()) + " predicted tags");
    }
    const auto g = extract(gold[i]);
    const auto p = extract(pred[i]);
    const std::set<EntitySpan> gs(g.begin(), g.end());
    s.n_gold += g.size();
    s.n_pred += p.size();
    for (const auto& e : p) s.n_correct += gs.count(e);
  }
  if (s.n_gold == 0 && s.n_pred == 0) {
    s.precision = s.recall = s.f1 = 1.0;
    return s;
  }
  s.precision = s.n_pred ? static_cast<double>(s.n_correct) / static_cast<double>(s.n_pred) : 0.0;
  s.recall = s.n_gold ? static_cast<double>(s.n_correct) / static_cast<double>(s.n_gold) : 0.0;
  s.f1 = f1_of(s.precision, s.recall);
  return s;
}

}  // namespace

std::vector<EntitySpan> iob2_extract_strict(std::span<const std::string> tags) {
  std::vector<EntitySpan> out;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const char prefix = tag_prefix(tags[i], i);
    if (prefix == 'I' && open && tags[i].compare(2, std::string::npos, out.back().label) == 0) {
      out.back().end = i + 1;
      continue;
    }
    open = prefix == 'B';
    if (open) out.push_back({tags[i].substr(2), i, i + 1});
  }
  return out;
}

std::vector<EntitySpan> unit_spans(std::span<const std::string> tags) {
  std::vector<EntitySpan> out;
  out.reserve(tags.size());
  for (std::size_t i = 0; i < tags.size(); ++i) out.push_back({tags[i], i, i + 1});
  return out;
}

bool is_iob2(std::span<const std::string> tags) {
  return std::all_of(tags.begin(), tags.end(), [](const std::string& t) {
    return t == "O" || (t.size() >= 3 && (t[0] == 'B' || t[0] == 'I') && t[1] == '-');
  });
}

PrfScore span_f1(const std::vector<TagSequence>& gold, const std::vector<TagSequence>& pred) {
  return score_spans(gold, pred, &iob2_extract_strict);
}

PrfScore unit_span_f1(const std::vector<TagSequence>& gold, const std::vector<TagSequence>& pred) {
  return score_spans(gold, pred, &unit_spans);
}

// ---------------------------------------------------------------------------

namespace {

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

WeightedF1 weigh(const std::map<std::string, Counts>& counts) {
  WeightedF1 out;
  double total = 0.0, acc = 0.0;
  for (const auto& [label, c] : counts) {
    ClassScore s;
    s.support = c.tp + c.fn;
    s.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    s.recall = s.support ? static_cast<double>(c.tp) / static_cast<double>(s.support) : 0.0;
    s.f1 = f1_of(s.precision, s.recall);
    total += static_cast<double>(s.support);
    acc += static_cast<double>(s.support) * s.f1;
    out.per_class[label] = s;
  }
  out.value = total > 0.0 ? acc / total : 0.0;
  return out;
}

}  // namespace

WeightedF1 weighted_f1(std::span<const std::string> gold, std::span<const std::string> pred) {
  if (gold.size() != pred.size()) throw AlignmentError("weighted_f1: length mismatch");
  if (gold.empty()) throw EmptySelectionError("weighted_f1: no examples");
  std::map<std::string, Counts> counts;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] == pred[i]) {
      ++counts[gold[i]].tp;
    } else {
      ++counts[gold[i]].fn;
      ++counts[pred[i]].fp;
    }
  }
  return weigh(counts);
}

WeightedF1 weighted_f1_multilabel(const std::vector<LabelSet>& gold,
                                  const std::vector<LabelSet>& pred) {
  if (gold.size() != pred.size()) throw AlignmentError("weighted_f1: length mismatch");
  if (gold.empty()) throw EmptySelectionError("weighted_f1: no examples");
  std::map<std::string, Counts> counts;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const std::set<std::string> g(gold[i].begin(), gold[i].end());
    const std::set<std::string> p(pred[i].begin(), pred[i].end());
    for (const auto& l : g) {
      if (p.contains(l)) {
        ++counts[l].tp;
      } else {
        ++counts[l].fn;
      }
    }
    for (const auto& l : p) {
      if (!g.contains(l)) ++counts[l].fp;
    }
  }
  return weigh(counts);
}

EmrHamming emr_hamming(const std::vector<LabelSet>& gold, const std::vector<LabelSet>& pred) {
  if (gold.size() != pred.size()) throw AlignmentError("emr_hamming: length mismatch");
  if (gold.empty()) throw EmptySelectionError("emr_hamming: no examples");
  EmrHamming out;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const std::set<std::string> g(gold[i].begin(), gold[i].end());
    const std::set<std::string> p(pred[i].begin(), pred[i].end());
    std::size_t both = 0;
    for (const auto& l : g) both += p.count(l);
    const std::size_t either = g.size() + p.size() - both;
    out.emr += g == p ? 1.0 : 0.0;
    out.hamming += either ? static_cast<double>(both) / static_cast<double>(either) : 1.0;
  }
  out.emr /= static_cast<double>(gold.size());
  out.hamming /= static_cast<double>(gold.size());
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw AlignmentError("spearman: length mismatch");
  if (x.size() < 2) throw ConfigError("spearman: needs at least two pairs");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedCorrelationError("spearman: constant input has no rank variance");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double edrm(std::span<const double> gold, std::span<const double> pred) {
  if (gold.size() != pred.size()) throw AlignmentError("edrm: length mismatch");
  if (gold.empty()) throw EmptySelectionError("edrm: no pairs");
  double total = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const double g = gold[i];
    if (!(g >= 0.0 && g <= 5.0)) {
      throw RangeError("edrm: gold score " + std::to_string(g) + " outside [0, 5]");
    }
    const double p = std::clamp(pred[i], 0.0, 5.0);
    total += std::min(1.0, std::abs(p - g) / std::max(g, 5.0 - g));
  }
  return 1.0 - total / static_cast<double>(gold.size());
}

TTest students_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ConfigError("t-test: needs at least two samples each");
  auto moments = [](std::span<const double> s) {
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    double ss = 0.0;
    for (double v : s) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss};
  };
  const auto [ma, ssa] = moments(a);
  const auto [mb, ssb] = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  TTest out;
  out.df = na + nb - 2.0;
  const double pooled = (ssa + ssb) / out.df;
  if (pooled == 0.0) {
    if (ma == mb) {
      out.t = 0.0;
      out.p = 1.0;
    } else {
      out.t = ma > mb ? INFINITY : -INFINITY;
      out.p = 0.0;
    }
    return out;
  }
  out.t = (ma - mb) / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  const boost::math::students_t dist(out.df);
  out.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t)));
  out.p = std::clamp(out.p, 0.0, 1.0);
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j{{"task", r.task}, {"metric", r.metric}, {"value", r.value},
                   {"support", r.support}, {"extra", r.extra}};
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& [label, s] : r.per_class) {
    classes[label] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
                      {"support", s.support}};
  }
  j["per_class"] = classes;
  return j;
}

std::string csv_header() { return "task,metric,value,support,extra"; }

std::string csv_row(const MetricReport& r) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed << r.task << ',' << r.metric << ',' << r.value << ',' << r.support << ',';
  bool first = true;
  for (const auto& [name, v] : r.extra) {
    out << (first ? "" : ";") << name << '=' << v;
    first = false;
  }
  return out.str();
}

}  // namespace longdoc::inline LONGDOC_ABI::metrics
