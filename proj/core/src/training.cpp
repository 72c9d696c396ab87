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

#include "longdoc/training.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "longdoc/errors.hpp"
#include "longdoc/metrics.hpp"
#include "longdoc/ops.hpp"
#include "longdoc/parallel.hpp"
#include "longdoc/rng.hpp"

namespace longdoc::inline LONGDOC_ABI::train {

// ---------------------------------------------------------------------------
// Schedule and optimizer

void Schedule::validate() const {
  if (!(peak_lr >= 0.0) || !std::isfinite(peak_lr)) throw ConfigError("schedule: peak_lr must be >= 0");
  if (total_steps == 0) throw ConfigError("schedule: total_steps must be positive");
  if (warmup_steps > total_steps) throw ConfigError("schedule: warmup_steps exceeds total_steps");
}

double lr_at(std::size_t step, const Schedule& s) {
  if (step >= s.total_steps) return 0.0;
  if (step < s.warmup_steps) {
    return s.peak_lr * (static_cast<double>(step) / static_cast<double>(s.warmup_steps));
  }
  return s.peak_lr * (static_cast<double>(s.total_steps - step) /
                      static_cast<double>(s.total_steps - s.warmup_steps));
}

void to_json(nlohmann::json& j, const AdamWConfig& c) {
  j = nlohmann::json{{"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps},
                     {"weight_decay", c.weight_decay}, {"clip_norm", c.clip_norm}};
}

void from_json(const nlohmann::json& j, AdamWConfig& c) {
  AdamWConfig d;
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.eps = j.value("eps", d.eps);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  c.clip_norm = j.value("clip_norm", d.clip_norm);
}

double AdamW::step(ParameterMap& params, double lr) {
  double norm_sq = 0.0;
  for (const auto& [name, p] : params) {
    for (Real g : p.grad.data()) norm_sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(norm_sq);
  if (!std::isfinite(norm)) throw NumericError("optimizer: non-finite gradient norm");
  const double clip = config_.clip_norm > 0.0 && norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;

  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    Moments& mo = moments_[name];
    const std::size_t n = p.value.size();
    if (mo.m.size() != n) {
      mo.m.assign(n, 0.0);
      mo.v.assign(n, 0.0);
    }
    const bool decay = p.value.rank() >= 2 && config_.weight_decay > 0.0;
    auto value = p.value.data();
    auto grad = p.grad.data();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = static_cast<double>(grad[i]) * clip;
      mo.m[i] = config_.beta1 * mo.m[i] + (1.0 - config_.beta1) * g;
      mo.v[i] = config_.beta2 * mo.v[i] + (1.0 - config_.beta2) * g * g;
      if (lr == 0.0) continue;
      double update = (mo.m[i] / c1) / (std::sqrt(mo.v[i] / c2) + config_.eps);
      if (decay) update += config_.weight_decay * value[i];
      value[i] = static_cast<Real>(value[i] - lr * update);
    }
  }
  return norm;
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kScratch: return "scratch";
    case Strategy::kConvert: return "convert";
    case Strategy::kContinual: return "continual";
  }
  return "unknown";
}

Strategy strategy_from_string(std::string_view name) {
  for (Strategy s : {Strategy::kScratch, Strategy::kConvert, Strategy::kContinual}) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown strategy '" + std::string(name) +
                    "' (expected scratch, convert or continual)");
}

void TrainConfig::validate() const {
  schedule.validate();
  if (batch_size == 0 || grad_accum_steps == 0) {
    throw ConfigError("train: batch_size and grad_accum_steps must be positive");
  }
  if (!(mlm.select_rate > 0.0 && mlm.select_rate <= 1.0) || mlm.mask_share < 0 ||
      mlm.random_share < 0 || mlm.mask_share + mlm.random_share > 1.0) {
    throw ConfigError("train: invalid MLM rates");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"peak_lr", c.schedule.peak_lr},
                     {"warmup_steps", c.schedule.warmup_steps},
                     {"total_steps", c.schedule.total_steps},
                     {"batch_size", c.batch_size},
                     {"grad_accum_steps", c.grad_accum_steps},
                     {"seed", c.seed},
                     {"strategy", std::string(to_string(c.strategy))},
                     {"optimizer", c.optimizer},
                     {"mlm", {{"select_rate", c.mlm.select_rate},
                              {"mask_share", c.mlm.mask_share},
                              {"random_share", c.mlm.random_share}}}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.schedule.peak_lr = j.value("peak_lr", d.schedule.peak_lr);
  c.schedule.total_steps = j.value("total_steps", d.schedule.total_steps);
  c.schedule.warmup_steps = j.value("warmup_steps", d.schedule.warmup_steps);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.grad_accum_steps = j.value("grad_accum_steps", d.grad_accum_steps);
  c.seed = j.value("seed", d.seed);
  c.strategy = strategy_from_string(j.value("strategy", std::string("scratch")));
  c.optimizer = j.value("optimizer", d.optimizer);
  if (j.contains("mlm")) {
    const auto& m = j.at("mlm");
    c.mlm.select_rate = m.value("select_rate", d.mlm.select_rate);
    c.mlm.mask_share = m.value("mask_share", d.mlm.mask_share);
    c.mlm.random_share = m.value("random_share", d.mlm.random_share);
  }
}

nlohmann::json to_json_line(const StepLog& log) {
  return nlohmann::json{{"step", log.step}, {"lr", log.lr}, {"loss", log.loss},
                        {"accuracy", log.accuracy}};
}

// ---------------------------------------------------------------------------
// MLM

namespace {

struct MlmExample {
  double loss = 0.0;
  std::size_t correct = 0;
  std::size_t positions = 0;
};

// Forward over the real prefix of one masked sequence; with `grads`, also
// the backward pass with the loss scaled by `grad_scale`.
MlmExample run_mlm(const EncoderState& state, EncoderState* grads,
                   const corpus::PackedSequence& seq, std::uint64_t mask_seed,
                   const corpus::MlmConfig& mlm, bool train, std::uint64_t dropout_seed,
                   double grad_scale) {
  const auto batch = corpus::sample_mlm(seq, state.config.vocab_size, mask_seed, mlm);
  const auto n = static_cast<std::size_t>(seq.n_real > 0 ? seq.n_real : static_cast<int>(seq.ids.size()));
  std::span<const TokenId> tokens(batch.input_ids.data(), n);

  ForwardOptions options;
  options.train = train;
  options.record = grads != nullptr;
  options.dropout_seed = dropout_seed;
  const EncodeResult enc = encode(state, tokens, cls_globals(), {}, options);
  const HeadOutput head = apply_head(state, enc.hidden, batch.positions);

  std::vector<std::int32_t> labels;
  labels.reserve(batch.positions.size());
  for (int p : batch.positions) labels.push_back(batch.labels[static_cast<std::size_t>(p)]);
  LossResult loss = cross_entropy(head.logits, labels);

  MlmExample out;
  out.loss = loss.loss;
  out.positions = labels.size();
  const std::size_t v = head.logits.cols();
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const Real* row = head.logits.raw() + r * v;
    const auto best = static_cast<std::int32_t>(std::max_element(row, row + v) - row);
    out.correct += best == labels[r];
  }
  if (options.record) {
    if (!std::isfinite(loss.loss)) return out;
    for (auto& g : loss.dlogits.data()) g = static_cast<Real>(g * grad_scale);
    const Tensor d_hidden = apply_head_backward(*grads, head, loss.dlogits);
    encode_backward(*grads, enc, d_hidden);
  }
  return out;
}

void require_mlm_head(const EncoderState& state) {
  if (!state.head || state.head->kind != HeadKind::kMlm) {
    throw ConfigError("MLM training needs a state with an MLM head");
  }
}

}  // namespace

PretrainResult pretrain_mlm(EncoderState init, std::span<const corpus::PackedSequence> data,
                            const TrainConfig& config, const StepCallback& on_step) {
  config.validate();
  require_mlm_head(init);
  if (data.empty()) throw ConfigError("pretrain: no training sequences");

  PretrainResult result;
  result.state = std::move(init);
  EncoderState& state = result.state;
  AdamW optimizer(config.optimizer);
  const std::uint64_t order_seed = derive_seed(config.seed, "order");
  const std::uint64_t mask_seed = derive_seed(config.seed, "mlm");
  const std::uint64_t dropout_seed = derive_seed(config.seed, "dropout");
  const std::size_t per_step = config.effective_batch();
  const double scale = 1.0 / static_cast<double>(per_step);

  std::vector<std::size_t> order;
  std::size_t order_epoch = static_cast<std::size_t>(-1);
  for (std::size_t step = 0; step < config.schedule.total_steps; ++step) {
    state.zero_grad();
    StepLog log;
    log.step = step;
    log.lr = lr_at(step, config.schedule);
    std::size_t correct = 0, positions = 0;
    for (std::size_t b = 0; b < per_step; ++b) {
      const std::size_t example = step * per_step + b;
      const std::size_t epoch = example / data.size();
      if (epoch != order_epoch) {
        order.resize(data.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(derive_seed(order_seed, epoch));
        rng.shuffle(order);
        order_epoch = epoch;
      }
      const auto& seq = data[order[example % data.size()]];
      const MlmExample ex = run_mlm(state, &state, seq, derive_seed(mask_seed, example), config.mlm, true,
                                    derive_seed(dropout_seed, example), scale);
      if (!std::isfinite(ex.loss)) {
        throw NumericError("pretrain: non-finite loss at step " + std::to_string(step));
      }
      log.loss += ex.loss * scale;
      correct += ex.correct;
      positions += ex.positions;
    }
    log.accuracy = positions ? static_cast<double>(correct) / static_cast<double>(positions) : 0.0;
    optimizer.step(state.params, log.lr);
    result.trace.push_back(log);
    if (on_step) on_step(log);
  }
  state.zero_grad();
  return result;
}

MlmEval evaluate_mlm(const EncoderState& state, std::span<const corpus::PackedSequence> data,
                     std::uint64_t seed, const corpus::MlmConfig& mlm, int threads) {
  require_mlm_head(state);
  std::vector<MlmExample> results(data.size());
  const std::uint64_t mask_seed = derive_seed(seed, "mlm-eval");
  parallel_for(data.size(), threads, [&](std::size_t i) {
    results[i] = run_mlm(state, nullptr, data[i], derive_seed(mask_seed, i), mlm, false, 0, 0.0);
  });
  MlmEval out;
  for (const auto& r : results) {
    out.loss += r.loss;
    out.accuracy += static_cast<double>(r.correct);
    out.positions += r.positions;
  }
  if (!results.empty()) out.loss /= static_cast<double>(results.size());
  if (out.positions) out.accuracy /= static_cast<double>(out.positions);
  return out;
}

// ---------------------------------------------------------------------------
// Grid

void GridSpec::validate() const {
  if (learning_rates.empty()) throw ConfigError("grid: no learning rates");
  if (runs_per_lr == 0) throw ConfigError("grid: runs_per_lr must be positive");
  for (double lr : learning_rates) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("grid: invalid learning rate");
  }
}

std::uint64_t GridSpec::run_seed(std::size_t r) const { return derive_seed(seed, r); }

const GridCell& GridResult::selected() const {
  for (const auto& c : cells) {
    if (c.lr == selected_lr && c.mean) return c;
  }
  throw GridError("grid: no selected cell");
}

std::vector<double> GridResult::selected_metrics() const {
  std::vector<double> out;
  for (const auto& r : selected().runs) {
    if (r.metric) out.push_back(*r.metric);
  }
  return out;
}

GridResult select_grid(std::vector<GridCell> cells) {
  GridResult g;
  g.cells = std::move(cells);
  bool found = false;
  for (auto& c : g.cells) {
    double sum = 0.0;
    std::size_t ok = 0;
    for (const auto& r : c.runs) {
      if (r.metric) {
        sum += *r.metric;
        ++ok;
      }
    }
    c.mean = ok ? std::optional<double>(sum / static_cast<double>(ok)) : std::nullopt;
    if (!c.mean) continue;
    if (!found || *c.mean > g.selected_mean || (*c.mean == g.selected_mean && c.lr < g.selected_lr)) {
      g.selected_lr = c.lr;
      g.selected_mean = *c.mean;
      found = true;
    }
  }
  if (!found) throw GridError("grid: every run of every learning rate failed");
  return g;
}

GridResult run_grid(const GridRunner& runner, const GridSpec& spec, int threads) {
  spec.validate();
  const std::size_t runs = spec.runs_per_lr;
  std::vector<GridCell> cells(spec.learning_rates.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i].lr = spec.learning_rates[i];
    cells[i].runs.resize(runs);
  }
  parallel_for(cells.size() * runs, threads, [&](std::size_t job) {
    GridCell& cell = cells[job / runs];
    const std::uint64_t seed = spec.run_seed(job % runs);
    RunOutcome& out = cell.runs[job % runs];
    try {
      out = runner(cell.lr, seed);
    } catch (const Error& e) {
      out = RunOutcome{};
      out.error = e.what();
    }
    out.seed = seed;
  });
  return select_grid(std::move(cells));
}

nlohmann::json to_json(const GridResult& g) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : g.cells) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : c.runs) {
      nlohmann::json jr{{"seed", r.seed}};
      jr["metric"] = r.metric ? nlohmann::json(*r.metric) : nlohmann::json(nullptr);
      if (!r.error.empty()) jr["error"] = r.error;
      if (!r.details.is_null()) jr["details"] = r.details;
      runs.push_back(jr);
    }
    cells.push_back({{"lr", c.lr},
                     {"mean", c.mean ? nlohmann::json(*c.mean) : nlohmann::json(nullptr)},
                     {"runs", runs}});
  }
  return nlohmann::json{{"cells", cells}, {"selected_lr", g.selected_lr},
                        {"selected_mean", g.selected_mean}};
}

// ---------------------------------------------------------------------------
// Report

ComparisonReport compare(const std::vector<ReportCell>& cells, double alpha) {
  ComparisonReport report;
  report.alpha = alpha;
  std::vector<std::string> tasks;
  for (const auto& c : cells) {
    if (std::find(tasks.begin(), tasks.end(), c.task) == tasks.end()) tasks.push_back(c.task);
    if (std::find(report.models.begin(), report.models.end(), c.model) == report.models.end()) {
      report.models.push_back(c.model);
    }
  }
  for (const auto& task : tasks) {
    ComparisonRow row;
    row.task = task;
    const ReportCell* best = nullptr;
    for (const auto& c : cells) {
      if (c.task != task) continue;
      row.mean[c.model] = c.grid.selected_mean;
      if (!best || c.grid.selected_mean > best->grid.selected_mean) best = &c;
    }
    row.best_model = best->model;
    const auto reference = best->grid.selected_metrics();
    for (const auto& c : cells) {
      if (c.task != task) continue;
      if (&c == best) {
        row.p_value[c.model] = 1.0;
        row.significant[c.model] = false;
        continue;
      }
      const auto other = c.grid.selected_metrics();
      if (reference.size() >= 2 && other.size() >= 2) {
        const auto t = metrics::students_ttest(reference, other);
        row.p_value[c.model] = t.p;
        row.significant[c.model] = t.p < alpha;
      } else {
        row.p_value[c.model] = 1.0;
        row.significant[c.model] = false;
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string render_markdown(const ComparisonReport& report) {
  std::ostringstream out;
  out << "| Task |";
  for (const auto& m : report.models) out << ' ' << m << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < report.models.size(); ++i) out << "---:|";
  out << '\n';
  for (const auto& row : report.rows) {
    out << "| " << row.task << " |";
    for (const auto& m : report.models) {
      auto it = row.mean.find(m);
      if (it == row.mean.end()) {
        out << " - |";
        continue;
      }
      std::ostringstream v;
      v << std::fixed << std::setprecision(2) << 100.0 * it->second;
      std::string cell = v.str();
      if (m == row.best_model) cell = "**" + cell + "**";
      if (row.significant.at(m)) cell += "*";
      out << ' ' << cell << " |";
    }
    out << '\n';
  }
  out << "\nBest model per task in bold; * marks p < " << report.alpha
      << " (Student's t-test against the best model).\n";
  return out.str();
}

nlohmann::json to_json(const ComparisonReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"task", r.task}, {"best_model", r.best_model}, {"mean", r.mean},
                    {"p_value", r.p_value}, {"significant", r.significant}});
  }
  return nlohmann::json{{"models", report.models}, {"alpha", report.alpha}, {"rows", rows}};
}

}  // namespace longdoc::inline LONGDOC_ABI::train
