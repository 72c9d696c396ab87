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


#include "longdoc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "longdoc/errors.hpp"
#include "longdoc/parallel.hpp"

namespace longdoc::inline LONGDOC_ABI::analysis {

std::size_t length_threshold(const std::vector<data::TaskRecord>& records,
                             const tok::Tokenizer& tokenizer, std::size_t limit) {
  std::optional<std::size_t> shortest_over;
  std::size_t longest = 0;
  for (const auto& r : records) {
    longest = std::max(longest, r.word_count);
    if (tokenizer.encode(data::record_text(r)).ids.size() > limit) {
      shortest_over = std::min(shortest_over.value_or(r.word_count), r.word_count);
    }
  }
  if (!shortest_over) return longest;
  return *shortest_over == 0 ? 0 : *shortest_over - 1;
}

namespace {

void close(Bucket& b) {
  if (b.count > 0) b.rate = static_cast<double>(b.errors) / static_cast<double>(b.count);
}

}  // namespace

LengthBuckets error_rate_by_length(std::span<const std::size_t> word_counts,
                                   const std::vector<bool>& correct, std::size_t threshold) {
  if (word_counts.size() != correct.size()) {
    throw AlignmentError("length buckets: " + std::to_string(word_counts.size()) +
                         " word counts vs " + std::to_string(correct.size()) + " predictions");
  }
  LengthBuckets out;
  out.threshold = threshold;
  for (std::size_t i = 0; i < word_counts.size(); ++i) {
    Bucket& b = word_counts[i] <= threshold ? out.short_docs : out.long_docs;
    ++b.count;
    b.errors += !correct[i];
  }
  close(out.short_docs);
  close(out.long_docs);
  return out;
}

LengthBuckets error_rate_by_length(const std::vector<data::TaskRecord>& gold,
                                   const train::Predictions& pred, std::size_t threshold) {
  std::vector<std::size_t> counts;
  std::vector<bool> correct;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    counts.push_back(gold[i].word_count);
    correct.push_back(train::is_correct(gold[i], pred, i));
  }
  return error_rate_by_length(counts, correct, threshold);
}

std::string format_rate(const std::optional<double>& rate) {
  if (!rate) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *rate * 100.0);
  return buf;
}

nlohmann::json to_json(const LengthBuckets& b) {
  auto bucket = [](const Bucket& x) {
    nlohmann::json j{{"count", x.count}, {"errors", x.errors}, {"percent", format_rate(x.rate)}};
    j["rate"] = x.rate ? nlohmann::json(*x.rate) : nlohmann::json(nullptr);
    return j;
  };
  return nlohmann::json{{"threshold", b.threshold},
                        {"short", bucket(b.short_docs)},
                        {"long", bucket(b.long_docs)}};
}

std::vector<double> word_weights(const Tensor& cls_rows, std::span<const WordSpan> spans) {
  const std::size_t n = cls_rows.cols();
  std::vector<double> per_token(n, 0.0);
  for (std::size_t h = 0; h < cls_rows.rows(); ++h) {
    for (std::size_t k = 0; k < n; ++k) per_token[k] += cls_rows(h, k);
  }
  std::vector<double> out;
  out.reserve(spans.size());
  for (const auto& [first, last] : spans) {
    if (last + 1 > n || first > last) {
      throw AlignmentError("attention profile: word span [" + std::to_string(first) + ", " +
                           std::to_string(last) + ") outside " + std::to_string(n) + " keys");
    }
    double w = 0.0;
    for (std::size_t k = first + 1; k < last + 1; ++k) w += per_token[k];
    out.push_back(w);
  }
  return out;
}

double attention_mass(const Tensor& cls_rows) {
  double total = 0.0;
  for (Real v : cls_rows.data()) total += v;
  return total;
}

AttentionProfile average_profile(const std::vector<std::vector<double>>& documents,
                                 std::size_t n_heads) {
  AttentionProfile p;
  p.n_heads = n_heads;
  std::size_t longest = 0;
  for (const auto& d : documents) longest = std::max(longest, d.size());
  p.mean_weight.assign(longest, 0.0);
  p.doc_count.assign(longest, 0);
  for (const auto& d : documents) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      p.mean_weight[i] += d[i];
      ++p.doc_count[i];
    }
  }
  for (std::size_t i = 0; i < longest; ++i) {
    p.mean_weight[i] /= static_cast<double>(p.doc_count[i]);
  }
  return p;
}

std::vector<ProfileDocument> profile_documents(const EncoderState& state,
                                               const tok::Tokenizer& tokenizer,
                                               const std::vector<std::string>& texts,
                                               int threads) {
  const SpecialIds sp;
  const auto body_limit = static_cast<std::size_t>(state.config.max_positions) - 2;
  std::vector<ProfileDocument> docs(texts.size());
  parallel_for(texts.size(), threads, [&](std::size_t d) {
    const tok::Encoding enc = tokenizer.encode(texts[d]);
    ProfileDocument& doc = docs[d];
    std::vector<TokenId> ids{sp.cls};
    const std::size_t body = std::min(enc.ids.size(), body_limit);
    doc.truncated = body < enc.ids.size();
    ids.insert(ids.end(), enc.ids.begin(), enc.ids.begin() + static_cast<std::ptrdiff_t>(body));
    ids.push_back(sp.eos);
    std::vector<WordSpan> spans;
    for (const auto& s : enc.word_spans) {
      if (s.second > body) break;
      spans.push_back(s);
    }
    ForwardOptions options;
    options.capture_attention = true;
    const EncodeResult r = encode(state, ids, cls_globals(), {}, options);
    doc.weights = word_weights(r.cls_attention, spans);
    doc.mass = attention_mass(r.cls_attention);
  });
  return docs;
}

AttentionProfile attention_profile(const EncoderState& state, const tok::Tokenizer& tokenizer,
                                   const std::vector<std::string>& texts, int threads) {
  const auto docs = profile_documents(state, tokenizer, texts, threads);
  std::vector<std::vector<double>> weights;
  std::vector<std::string> warnings;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    weights.push_back(docs[d].weights);
    if (docs[d].truncated) {
      warnings.push_back("document " + std::to_string(d) + " truncated to " +
                         std::to_string(state.config.max_positions) + " tokens");
    }
  }
  AttentionProfile p = average_profile(weights, static_cast<std::size_t>(state.config.n_heads));
  p.warnings = std::move(warnings);
  return p;
}

double leading_mass_share(const AttentionProfile& profile, double fraction) {
  const std::size_t n = profile.mean_weight.size();
  if (n == 0) throw EmptySelectionError("attention profile: no positions");
  const auto lead = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  double head = 0.0, total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += profile.mean_weight[i];
    if (i < lead) head += profile.mean_weight[i];
  }
  return total > 0.0 ? head / total : 0.0;
}

std::string to_csv(const AttentionProfile& profile) {
  std::string out =
      "# mean_weight: last-layer [CLS] attention summed over " + std::to_string(profile.n_heads) +
      " heads and over the subwords of the word, averaged over the doc_count documents that "
      "reach the position (no division by the head count)\n"
      "position,mean_weight,doc_count\n";
  char buf[96];
  for (std::size_t i = 0; i < profile.mean_weight.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%zu\n", i, profile.mean_weight[i], profile.doc_count[i]);
    out += buf;
  }
  return out;
}

}  // namespace longdoc::inline LONGDOC_ABI::analysis
