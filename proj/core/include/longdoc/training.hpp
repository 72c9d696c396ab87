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

#ifndef LONGDOC_TRAINING_HPP_
#define LONGDOC_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "longdoc/corpus.hpp"
#include "longdoc/encoder.hpp"

namespace longdoc::inline LONGDOC_ABI::train {

// Linear warmup from 0 to peak_lr over warmup_steps, then linear decay to
// 0 at total_steps. Update i (0-based) uses lr_at(i).
struct Schedule {
  double peak_lr = 5e-5;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 1;

  void validate() const;
};

double lr_at(std::size_t step, const Schedule& schedule);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // applied to matrices (rank >= 2) only
  double clip_norm = 1.0;      // global gradient norm; <= 0 disables
};

void to_json(nlohmann::json& j, const AdamWConfig& c);
void from_json(const nlohmann::json& j, AdamWConfig& c);

class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  // Clips, then updates every parameter from its gradient. Returns the
  // gradient norm before clipping.
  double step(ParameterMap& params, double lr);
  std::size_t steps() const { return t_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  AdamWConfig config_;
  std::map<std::string, Moments> moments_;
  std::size_t t_ = 0;
};

enum class Strategy { kScratch, kConvert, kContinual };
std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view name);

struct TrainConfig {
  Schedule schedule;
  std::size_t batch_size = 8;
  std::size_t grad_accum_steps = 1;
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::kScratch;
  AdamWConfig optimizer;
  corpus::MlmConfig mlm;

  std::size_t effective_batch() const { return batch_size * grad_accum_steps; }
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct StepLog {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;  // masked-token accuracy of the step's batch
};

nlohmann::json to_json_line(const StepLog& log);

struct PretrainResult {
  EncoderState state;
  std::vector<StepLog> trace;
};

using StepCallback = std::function<void(const StepLog&)>;

// MLM pre-training. `init` must carry an MLM head. Each example is masked
// with a seed derived from (seed, example index), so runs are reproducible
// bit for bit. Raises NumericError naming the step on a non-finite loss.
PretrainResult pretrain_mlm(EncoderState init, std::span<const corpus::PackedSequence> data,
                            const TrainConfig& config, const StepCallback& on_step = {});

struct MlmEval {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t positions = 0;
};

// Mean masked-token loss / accuracy in eval mode.
MlmEval evaluate_mlm(const EncoderState& state, std::span<const corpus::PackedSequence> data,
                     std::uint64_t seed, const corpus::MlmConfig& mlm = {}, int threads = 1);

// ---------------------------------------------------------------------------
// Learning-rate grid

struct GridSpec {
  std::vector<double> learning_rates{1e-4, 1e-5, 2e-5, 5e-5};
  std::size_t runs_per_lr = 4;
  std::uint64_t seed = 0;

  void validate() const;
  // Seed of run r; identical across learning rates.
  std::uint64_t run_seed(std::size_t r) const;
};

struct RunOutcome {
  std::uint64_t seed = 0;
  std::optional<double> metric;  // absent when the run failed
  std::string error;
  nlohmann::json details;  // free-form run record (trace, test report)
};

struct GridCell {
  double lr = 0.0;
  std::vector<RunOutcome> runs;
  std::optional<double> mean;  // over successful runs; absent if all failed
};

struct GridResult {
  std::vector<GridCell> cells;  // in GridSpec order
  double selected_lr = 0.0;
  double selected_mean = 0.0;

  const GridCell& selected() const;
  // Metrics of the successful runs at the selected learning rate.
  std::vector<double> selected_metrics() const;
};

nlohmann::json to_json(const GridResult& g);

// The runner returns the run's metric plus details. Errors derived from
// longdoc::Error are recorded as failed runs. Picks the learning rate with
// the best mean (ties: smallest lr); raises GridError when every learning
// rate failed on all runs.
using GridRunner = std::function<RunOutcome(double lr, std::uint64_t seed)>;
GridResult run_grid(const GridRunner& runner, const GridSpec& spec, int threads = 1);
// Selection only, from given metrics (pure).
GridResult select_grid(std::vector<GridCell> cells);

// ---------------------------------------------------------------------------
// Comparison report (tasks x models)

struct ReportCell {
  std::string task;
  std::string model;
  GridResult grid;
};

struct ComparisonRow {
  std::string task;
  std::string best_model;
  std::map<std::string, double> mean;         // per model
  std::map<std::string, double> p_value;      // vs the best model
  std::map<std::string, bool> significant;    // p < alpha
};

struct ComparisonReport {
  std::vector<std::string> models;
  std::vector<ComparisonRow> rows;
  double alpha = 0.05;
};

ComparisonReport compare(const std::vector<ReportCell>& cells, double alpha = 0.05);
// Markdown table: best mean in bold, '*' where the t-test against the best
// model gives p < alpha. Values are shown as percentages.
std::string render_markdown(const ComparisonReport& report);
nlohmann::json to_json(const ComparisonReport& report);

}  // namespace longdoc::inline LONGDOC_ABI::train

#endif  // LONGDOC_TRAINING_HPP_
