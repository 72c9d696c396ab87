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

#include "longdoc/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "longdoc/errors.hpp"
#include "longdoc/ops.hpp"
#include "longdoc/parallel.hpp"
#include "longdoc/rng.hpp"

namespace longdoc::inline LONGDOC_ABI::train {

using data::TaskKind;
using data::TaskRecord;

int LabelSpace::index(const std::string& label) const {
  auto it = std::lower_bound(labels.begin(), labels.end(), label);
  return it != labels.end() && *it == label ? static_cast<int>(it - labels.begin()) : -1;
}

LabelSpace build_label_space(TaskKind kind, const std::vector<TaskRecord>& train) {
  std::set<std::string> seen;
  for (const auto& r : train) {
    switch (kind) {
      case TaskKind::kPos:
      case TaskKind::kNer: seen.insert(r.tags.begin(), r.tags.end()); break;
      case TaskKind::kMulticlass: seen.insert(r.label); break;
      case TaskKind::kMultilabel: seen.insert(r.labels.begin(), r.labels.end()); break;
      case TaskKind::kMcqa: seen.insert(r.correct); break;
      case TaskKind::kSts: break;
    }
  }
  if (kind != TaskKind::kSts && seen.empty()) {
    throw ConfigError("label space: training split has no labels");
  }
  return LabelSpace{std::vector<std::string>(seen.begin(), seen.end())};
}

HeadConfig head_for(TaskKind kind, const LabelSpace& labels) {
  switch (kind) {
    case TaskKind::kPos:
    case TaskKind::kNer: return {HeadKind::kTokenCls, static_cast<int>(labels.size())};
    case TaskKind::kSts: return {HeadKind::kStsReg, 1};
    default: return {HeadKind::kSeqCls, static_cast<int>(labels.size())};
  }
}

// ---------------------------------------------------------------------------
// Inputs

std::vector<TokenId> sequence_template(std::vector<std::vector<TokenId>> segments,
                                       std::size_t max_len) {
  const SpecialIds sp;
  const std::size_t specials = segments.size() + 1;
  if (max_len <= specials) throw ConfigError("template: max_len too small for the specials");
  auto total = [&] {
    std::size_t n = 0;
    for (const auto& s : segments) n += s.size();
    return n;
  };
  while (total() + specials > max_len) {
    auto longest = std::max_element(segments.begin(), segments.end(),
                                    [](const auto& a, const auto& b) { return a.size() < b.size(); });
    longest->pop_back();
  }
  std::vector<TokenId> ids{sp.cls};
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i > 0) ids.push_back(sp.sep);
    ids.insert(ids.end(), segments[i].begin(), segments[i].end());
  }
  ids.push_back(sp.eos);
  return ids;
}

namespace {

void add_token_units(const tok::Encoding& enc, std::size_t wb, std::size_t we, std::size_t limit,
                     const std::vector<std::int32_t>& word_labels, std::size_t record,
                     std::vector<ModelInput>& out) {
  const std::size_t first = enc.word_spans[wb].first;
  const std::size_t count = enc.word_spans[we - 1].second - first;
  if (count + 2 > limit && we - wb > 1) {
    const std::size_t mid = first + count / 2;
    std::size_t split = wb;
    while (split < we && enc.word_spans[split].second <= mid) ++split;
    split = std::clamp(split, wb + 1, we - 1);
    add_token_units(enc, wb, split, limit, word_labels, record, out);
    add_token_units(enc, split, we, limit, word_labels, record, out);
    return;
  }
  const SpecialIds sp;
  ModelInput in;
  in.record = record;
  in.word_begin = wb;
  in.ids.push_back(sp.cls);
  for (std::size_t w = wb; w < we; ++w) {
    const auto [s, e] = enc.word_spans[w];
    if (in.ids.size() + 1 >= limit) break;
    in.word_first.push_back(in.ids.size());
    for (std::size_t k = s; k < e && in.ids.size() + 1 < limit; ++k) in.ids.push_back(enc.ids[k]);
  }
  in.ids.push_back(sp.eos);
  in.token_labels.assign(in.ids.size(), kIgnoreLabel);
  for (std::size_t k = 0; k < in.word_first.size(); ++k) {
    in.token_labels[in.word_first[k]] = word_labels.empty() ? kIgnoreLabel : word_labels[wb + k];
  }
  out.push_back(std::move(in));
}

std::vector<TokenId> ids_of(const tok::Tokenizer& t, const std::string& text) {
  return t.encode(text).ids;
}

}  // namespace

std::vector<ModelInput> build_inputs(const TaskRecord& r, std::size_t index,
                                     const tok::Tokenizer& tokenizer, const ModelConfig& config,
                                     const LabelSpace& labels) {
  const auto limit = static_cast<std::size_t>(config.max_positions);
  std::vector<ModelInput> out;
  if (data::is_token_task(r.kind)) {
    const tok::Encoding enc = tokenizer.encode_words(r.tokens);
    std::vector<std::int32_t> word_labels;
    for (const auto& t : r.tags) word_labels.push_back(labels.index(t));
    std::vector<std::size_t> bounds;
    if (config.sliding()) {
      bounds = {0, r.tokens.size()};
    } else {
      bounds = r.sentence_starts;
      bounds.push_back(r.tokens.size());
    }
    for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
      if (bounds[s] < bounds[s + 1]) {
        add_token_units(enc, bounds[s], bounds[s + 1], limit, word_labels, index, out);
      }
    }
    return out;
  }

  ModelInput in;
  in.record = index;
  std::vector<std::vector<TokenId>> segments;
  switch (r.kind) {
    case TaskKind::kMcqa:
      segments.push_back(ids_of(tokenizer, r.question));
      for (const auto& a : r.answers) segments.push_back(ids_of(tokenizer, a));
      in.label = labels.index(r.correct);
      break;
    default:
      for (const auto& t : r.texts) segments.push_back(ids_of(tokenizer, t));
      break;
  }
  if (r.kind == TaskKind::kMulticlass) in.label = labels.index(r.label);
  if (r.kind == TaskKind::kMultilabel) {
    in.targets.assign(labels.size(), 0);
    for (const auto& l : r.labels) {
      if (int i = labels.index(l); i >= 0) in.targets[static_cast<std::size_t>(i)] = 1;
    }
  }
  if (r.kind == TaskKind::kSts) in.targets = {static_cast<Real>(r.score)};
  in.ids = sequence_template(std::move(segments), limit);
  out.push_back(std::move(in));
  return out;
}

// ---------------------------------------------------------------------------
// Loss and prediction

namespace {

struct Forward {
  EncodeResult enc;
  HeadOutput head;
};

Forward forward(const EncoderState& state, const ModelInput& in, const ForwardOptions& options) {
  Forward f;
  f.enc = encode(state, in.ids, cls_globals(), {}, options);
  f.head = apply_head(state, f.enc.hidden);
  return f;
}

// Returns nullopt when the input carries no usable target.
std::optional<LossResult> task_loss(TaskKind kind, const ModelInput& in, const Tensor& logits) {
  switch (kind) {
    case TaskKind::kPos:
    case TaskKind::kNer:
      if (std::all_of(in.token_labels.begin(), in.token_labels.end(),
                      [](std::int32_t l) { return l < 0; })) {
        return std::nullopt;
      }
      return cross_entropy(logits, in.token_labels);
    case TaskKind::kMulticlass:
    case TaskKind::kMcqa: {
      if (in.label < 0) return std::nullopt;
      const std::int32_t label = in.label;
      return cross_entropy(logits, std::span<const std::int32_t>(&label, 1));
    }
    case TaskKind::kMultilabel:
      return binary_cross_entropy(logits, Tensor({1, in.targets.size()}, in.targets));
    case TaskKind::kSts:
      return mean_squared_error(logits, in.targets);
  }
  return std::nullopt;
}

std::size_t argmax_row(const Tensor& t, std::size_t r) {
  const Real* row = t.raw() + r * t.cols();
  return static_cast<std::size_t>(std::max_element(row, row + t.cols()) - row);
}

}  // namespace

Predictions predict(const EncoderState& state, const tok::Tokenizer& tokenizer, TaskKind kind,
                    const LabelSpace& labels, const std::vector<TaskRecord>& records, int threads) {
  std::vector<ModelInput> inputs;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto units = build_inputs(records[i], i, tokenizer, state.config, labels);
    std::move(units.begin(), units.end(), std::back_inserter(inputs));
  }
  std::vector<Tensor> logits(inputs.size());
  parallel_for(inputs.size(), threads, [&](std::size_t u) {
    logits[u] = forward(state, inputs[u], {}).head.logits;
  });

  Predictions p;
  const std::size_t n = records.size();
  switch (kind) {
    case TaskKind::kPos:
    case TaskKind::kNer:
      p.tags.resize(n);
      for (std::size_t i = 0; i < n; ++i) p.tags[i].assign(records[i].tokens.size(), "O");
      for (std::size_t u = 0; u < inputs.size(); ++u) {
        const auto& in = inputs[u];
        for (std::size_t k = 0; k < in.word_first.size(); ++k) {
          p.tags[in.record][in.word_begin + k] = labels.labels[argmax_row(logits[u], in.word_first[k])];
        }
      }
      break;
    case TaskKind::kMulticlass:
      for (std::size_t u = 0; u < n; ++u) p.labels.push_back(labels.labels[argmax_row(logits[u], 0)]);
      break;
    case TaskKind::kMcqa:
      for (std::size_t u = 0; u < n; ++u) {
        const std::string& combo = labels.labels[argmax_row(logits[u], 0)];
        p.labels.push_back(combo);
        metrics::LabelSet letters;
        for (char c : combo) letters.emplace_back(1, c);
        p.label_sets.push_back(letters);
      }
      break;
    case TaskKind::kMultilabel:
      for (std::size_t u = 0; u < n; ++u) {
        metrics::LabelSet set;
        for (std::size_t l = 0; l < labels.size(); ++l) {
          if (logits[u][l] > 0) set.push_back(labels.labels[l]);
        }
        p.label_sets.push_back(set);
      }
      break;
    case TaskKind::kSts:
      for (std::size_t u = 0; u < n; ++u) {
        p.scores.push_back(std::clamp(static_cast<double>(logits[u][0]), 0.0, 5.0));
      }
      break;
  }
  return p;
}

metrics::MetricReport evaluate(const std::string& task, TaskKind kind,
                               const std::vector<TaskRecord>& gold, const Predictions& pred) {
  metrics::MetricReport r;
  r.task = task;
  r.support = gold.size();
  switch (kind) {
    case TaskKind::kPos:
    case TaskKind::kNer: {
      std::vector<metrics::TagSequence> g;
      bool iob = true;
      for (const auto& rec : gold) {
        g.push_back(rec.tags);
        iob = iob && metrics::is_iob2(rec.tags);
      }
      const bool strict = kind == TaskKind::kNer || iob;
      const auto s = strict ? metrics::span_f1(g, pred.tags) : metrics::unit_span_f1(g, pred.tags);
      r.metric = strict ? "span_f1" : "token_f1";
      r.value = s.f1;
      r.extra = {{"precision", s.precision}, {"recall", s.recall}};
      break;
    }
    case TaskKind::kMulticlass: {
      std::vector<std::string> g;
      std::size_t right = 0;
      for (std::size_t i = 0; i < gold.size(); ++i) {
        g.push_back(gold[i].label);
        right += gold[i].label == pred.labels[i];
      }
      const auto w = metrics::weighted_f1(g, pred.labels);
      r.metric = "weighted_f1";
      r.value = w.value;
      r.per_class = w.per_class;
      r.extra = {{"accuracy", static_cast<double>(right) / static_cast<double>(gold.size())}};
      break;
    }
    case TaskKind::kMultilabel: {
      std::vector<metrics::LabelSet> g;
      for (const auto& rec : gold) g.push_back(rec.labels);
      const auto w = metrics::weighted_f1_multilabel(g, pred.label_sets);
      r.metric = "weighted_f1";
      r.value = w.value;
      r.per_class = w.per_class;
      r.extra = {{"emr", metrics::emr_hamming(g, pred.label_sets).emr}};
      break;
    }
    case TaskKind::kSts: {
      std::vector<double> g;
      for (const auto& rec : gold) g.push_back(rec.score);
      r.metric = "edrm";
      r.value = metrics::edrm(g, pred.scores);
      try {
        r.extra = {{"spearman", metrics::spearman(g, pred.scores)}};
      } catch (const UndefinedCorrelationError&) {
        // Constant predictions: Spearman is undefined and left out.
      }
      break;
    }
    case TaskKind::kMcqa: {
      std::vector<metrics::LabelSet> g;
      std::vector<std::string> combos;
      for (const auto& rec : gold) {
        metrics::LabelSet letters;
        for (char c : rec.correct) letters.emplace_back(1, c);
        g.push_back(letters);
        combos.push_back(rec.correct);
      }
      const auto eh = metrics::emr_hamming(g, pred.label_sets);
      r.metric = "hamming";
      r.value = eh.hamming;
      r.extra = {{"emr", eh.emr}, {"weighted_f1", metrics::weighted_f1(combos, pred.labels).value}};
      break;
    }
  }
  return r;
}

bool is_correct(const TaskRecord& gold, const Predictions& pred, std::size_t i) {
  switch (gold.kind) {
    case TaskKind::kPos:
    case TaskKind::kNer: return pred.tags.at(i) == gold.tags;
    case TaskKind::kMulticlass: return pred.labels.at(i) == gold.label;
    case TaskKind::kMultilabel: {
      auto p = pred.label_sets.at(i);
      std::sort(p.begin(), p.end());
      return p == gold.labels;
    }
    case TaskKind::kSts: return std::abs(pred.scores.at(i) - gold.score) < 0.5;
    case TaskKind::kMcqa: return pred.labels.at(i) == gold.correct;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Training loop

void to_json(nlohmann::json& j, const FinetuneConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"lr", c.lr},
                     {"warmup_ratio", c.warmup_ratio}, {"seed", c.seed},
                     {"optimizer", c.optimizer}};
}

void from_json(const nlohmann::json& j, FinetuneConfig& c) {
  FinetuneConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.lr = j.value("lr", d.lr);
  c.warmup_ratio = j.value("warmup_ratio", d.warmup_ratio);
  c.seed = j.value("seed", d.seed);
  c.optimizer = j.value("optimizer", d.optimizer);
}

nlohmann::json to_json_line(const EpochLog& log) {
  return nlohmann::json{{"epoch", log.epoch}, {"split", log.split}, {"metric", log.metric},
                        {"loss", log.loss}};
}

nlohmann::json to_json(const RunResult& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& e : r.trace) trace.push_back(to_json_line(e));
  return nlohmann::json{{"lr", r.lr},
                        {"seed", r.seed},
                        {"best_epoch", r.best_epoch},
                        {"validation_metric", r.validation_metric},
                        {"test", metrics::to_json(r.test)},
                        {"labels", r.labels.labels},
                        {"trace", trace}};
}

RunResult finetune(const Task& task, const ckpt::Checkpoint& init, const FinetuneConfig& config) {
  if (config.epochs == 0 || config.batch_size == 0) {
    throw ConfigError("finetune: epochs and batch_size must be positive");
  }
  if (task.splits.train.empty()) throw ConfigError("finetune: empty training split");
  if (task.splits.test.empty()) throw ConfigError("finetune: empty test split");

  RunResult result;
  result.lr = config.lr;
  result.seed = config.seed;
  result.labels = build_label_space(task.kind, task.splits.train);

  EncoderState state = init.state;
  ckpt::init_head(state, head_for(task.kind, result.labels), derive_seed(config.seed, "head"));
  state.zero_grad();

  std::vector<ModelInput> inputs;
  for (std::size_t i = 0; i < task.splits.train.size(); ++i) {
    auto units = build_inputs(task.splits.train[i], i, init.tokenizer, state.config, result.labels);
    std::move(units.begin(), units.end(), std::back_inserter(inputs));
  }
  const std::size_t steps_per_epoch = (inputs.size() + config.batch_size - 1) / config.batch_size;
  Schedule schedule;
  schedule.peak_lr = config.lr;
  schedule.total_steps = steps_per_epoch * config.epochs;
  schedule.warmup_steps = static_cast<std::size_t>(
      std::llround(config.warmup_ratio * static_cast<double>(schedule.total_steps)));
  schedule.validate();

  AdamW optimizer(config.optimizer);
  const std::uint64_t order_seed = derive_seed(config.seed, "order");
  const std::uint64_t dropout_seed = derive_seed(config.seed, "dropout");
  const bool has_validation = !task.splits.validation.empty();
  ParameterMap best = state.params;
  double best_metric = -INFINITY;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(inputs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(order_seed, epoch));
    rng.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++step) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      state.zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        const ModelInput& in = inputs[order[b]];
        ForwardOptions options;
        options.train = true;
        options.record = true;
        options.dropout_seed = derive_seed(dropout_seed, step * config.batch_size + (b - start));
        Forward f = forward(state, in, options);
        auto loss = task_loss(task.kind, in, f.head.logits);
        if (!loss) continue;
        if (!std::isfinite(loss->loss)) {
          throw NumericError("finetune: non-finite loss at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(step));
        }
        epoch_loss += loss->loss;
        for (auto& g : loss->dlogits.data()) g = static_cast<Real>(g * scale);
        const Tensor d_hidden = apply_head_backward(state, f.head, loss->dlogits);
        encode_backward(state, f.enc, d_hidden);
      }
      optimizer.step(state.params, lr_at(step, schedule));
    }
    epoch_loss /= static_cast<double>(std::max<std::size_t>(1, inputs.size()));
    result.trace.push_back({epoch, "train", 0.0, epoch_loss});

    if (has_validation) {
      const Predictions p = predict(state, init.tokenizer, task.kind, result.labels,
                                    task.splits.validation, config.threads);
      const double metric = evaluate(task.name, task.kind, task.splits.validation, p).value;
      result.trace.push_back({epoch, "validation", metric, 0.0});
      if (metric > best_metric) {
        best_metric = metric;
        best = state.params;
        result.best_epoch = epoch;
      }
    }
  }
  if (has_validation) {
    state.params = std::move(best);
    result.validation_metric = best_metric;
  } else {
    result.best_epoch = config.epochs - 1;
  }
  state.zero_grad();

  result.test_predictions = predict(state, init.tokenizer, task.kind, result.labels,
                                    task.splits.test, config.threads);
  result.test = evaluate(task.name, task.kind, task.splits.test, result.test_predictions);
  result.trace.push_back({result.best_epoch, "test", result.test.value, 0.0});
  if (config.keep_model) result.model = std::move(state);
  return result;
}

}  // namespace longdoc::inline LONGDOC_ABI::train
