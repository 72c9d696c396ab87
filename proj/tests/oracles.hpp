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

// Independent reference implementations used by the unit and acceptance
// tests. Deliberately naive.

#ifndef LONGDOC_TESTS_ORACLES_HPP_
#define LONGDOC_TESTS_ORACLES_HPP_

#include <cmath>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace longdoc::oracle {

using Span = std::tuple<std::string, std::size_t, std::size_t>;

// Every [start, end) that opens at B-X, continues with I-X only and is not
// followed by another I-X.
inline std::set<Span> strict_spans(const std::vector<std::string>& tags) {
  std::set<Span> out;
  const std::size_t n = tags.size();
  for (std::size_t s = 0; s < n; ++s) {
    if (!tags[s].starts_with("B-")) continue;
    const std::string type = tags[s].substr(2);
    for (std::size_t e = s + 1; e <= n; ++e) {
      bool inner = true;
      for (std::size_t k = s + 1; k < e; ++k) inner = inner && tags[k] == "I-" + type;
      const bool closed = e == n || tags[e] != "I-" + type;
      if (inner && closed) out.emplace(type, s, e);
    }
  }
  return out;
}

struct SpanCounts {
  std::size_t gold = 0, pred = 0, correct = 0;
};

inline SpanCounts count_spans(const std::vector<std::vector<std::string>>& gold,
                              const std::vector<std::vector<std::string>>& pred) {
  SpanCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto g = strict_spans(gold[i]);
    const auto p = strict_spans(pred[i]);
    c.gold += g.size();
    c.pred += p.size();
    for (const auto& s : p) c.correct += g.count(s);
  }
  return c;
}

// Weighted F1 from an explicit confusion count per gold class.
inline double weighted_f1(const std::vector<std::string>& gold, const std::vector<std::string>& pred) {
  std::set<std::string> classes(gold.begin(), gold.end());
  double total = 0;
  for (const auto& c : classes) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      tp += gold[i] == c && pred[i] == c;
      fp += gold[i] != c && pred[i] == c;
      fn += gold[i] == c && pred[i] != c;
    }
    const double f1 = tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
    total += f1 * (tp + fn);
  }
  return total / static_cast<double>(gold.size());
}

// Average ranks by counting, in extended precision.
inline std::vector<long double> ranks(const std::vector<double>& v) {
  std::vector<long double> r;
  for (double a : v) {
    long double less = 0, equal = 0;
    for (double b : v) {
      less += b < a;
      equal += b == a;
    }
    r.push_back(1 + less + (equal - 1) / 2);
  }
  return r;
}

inline long double pearson(const std::vector<long double>& x, const std::vector<long double>& y) {
  const auto n = static_cast<long double>(x.size());
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return static_cast<double>(pearson(ranks(x), ranks(y)));
}

// Two-sided p of Student's t from the density integrated with Simpson's rule.
inline double two_sided_p(double t, double df) {
  const long double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  auto density = [&](long double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const long double upper = std::abs(t);
  const int steps = 200000;
  const long double h = upper / steps;
  long double sum = density(0) + density(upper);
  for (int i = 1; i < steps; ++i) sum += density(i * h) * (i % 2 ? 4 : 2);
  return static_cast<double>(1 - 2 * sum * h / 3);
}

// Pooled-variance t statistic.
inline double pooled_t(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (double v : a) ma += v / static_cast<double>(a.size());
  for (double v : b) mb += v / static_cast<double>(b.size());
  double ss = 0;
  for (double v : a) ss += (v - ma) * (v - ma);
  for (double v : b) ss += (v - mb) * (v - mb);
  const double df = static_cast<double>(a.size() + b.size() - 2);
  return (ma - mb) / std::sqrt(ss / df * (1.0 / static_cast<double>(a.size()) + 1.0 / static_cast<double>(b.size())));
}

}  // namespace longdoc::oracle

#endif  // LONGDOC_TESTS_ORACLES_HPP_
