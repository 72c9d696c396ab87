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

#include <memory>

#include "cli/commands.hpp"
#include "cli/common.hpp"
#include "longdoc/checkpoint.hpp"
#include "longdoc/errors.hpp"
#include "longdoc/finetune.hpp"

namespace longdoc::cli {

namespace {

struct TaskFlags {
  std::string name;
  std::string kind;
  std::string data;
  std::string train;
  std::string validation;
  std::string test;
};

void add_task_flags(CLI::App* cmd, TaskFlags& f, bool kind_required) {
  auto* kind = cmd->add_option("--kind", f.kind, "Task kind")->check(CLI::IsMember(kTaskKindNames));
  if (kind_required) kind->required();
  cmd->add_option("--task-name", f.name, "Name used in reports (default: the kind)");
  cmd->add_option("--data", f.data, "All records, split by the configured ratios")
      ->check(CLI::ExistingFile);
  cmd->add_option("--train", f.train, "Training records")->check(CLI::ExistingFile);
  cmd->add_option("--validation", f.validation, "Validation records")->check(CLI::ExistingFile);
  cmd->add_option("--test", f.test, "Test records")->check(CLI::ExistingFile);
}

train::Task load_splits(const TaskFlags& f, const data::SplitSpec& split) {
  train::Task task;
  task.kind = data::task_kind_from_string(f.kind);
  task.name = f.name.empty() ? f.kind : f.name;
  const bool explicit_splits = !f.train.empty() || !f.test.empty();
  if (!f.data.empty() == explicit_splits) {
    throw ConfigError("give either --data or --train/--test (with optional --validation)");
  }
  if (!f.data.empty()) {
    task.splits = data::split(load_task(f.data, task.kind), split);
    return task;
  }
  if (f.train.empty() || f.test.empty()) throw ConfigError("--train and --test go together");
  task.splits.train = load_task(f.train, task.kind);
  if (!f.validation.empty()) task.splits.validation = load_task(f.validation, task.kind);
  task.splits.test = load_task(f.test, task.kind);
  return task;
}

struct FinetuneOverrides {
  std::optional<double> lr;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> warmup_ratio;

  void add(CLI::App* cmd, bool with_lr) {
    if (with_lr) cmd->add_option("--lr", lr, "Learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
    cmd->add_option("--batch-size", batch_size, "Examples per update")->check(CLI::PositiveNumber);
    cmd->add_option("--warmup-ratio", warmup_ratio, "Share of updates spent warming up")
        ->check(CLI::Range(0.0, 1.0));
  }
  void apply(train::FinetuneConfig& c) const {
    if (lr) c.lr = *lr;
    if (epochs) c.epochs = *epochs;
    if (batch_size) c.batch_size = *batch_size;
    if (warmup_ratio) c.warmup_ratio = *warmup_ratio;
  }
};

struct FinetuneFlags {
  CommonFlags common;
  TaskFlags task;
  FinetuneOverrides overrides;
  std::string init;
  std::string out = "-";
  std::string predictions;
  std::string save_model;
};

void finetune(const FinetuneFlags& f) {
  PipelineConfig config = load_config(f.common.config);
  f.overrides.apply(config.finetune);
  if (f.common.seed) config.finetune.seed = *f.common.seed;
  config.finetune.threads = f.common.resolved_threads();
  config.finetune.keep_model = !f.save_model.empty();
  const train::Task task = load_splits(f.task, config.split);
  const ckpt::Checkpoint init = ckpt::load(f.init);

  train::RunResult r = train::finetune(task, init, config.finetune);
  nlohmann::json effective{{"command", "finetune"},
                           {"task", task.name},
                           {"kind", f.task.kind},
                           {"init", init.metadata.value("strategy", "unknown")},
                           {"finetune", config.finetune},
                           {"split", to_json(config).at("split")}};
  nlohmann::json out = train::to_json(r);
  out["config"] = effective;
  write_json(f.out, out);
  if (!f.predictions.empty()) {
    write_text(f.predictions, predictions_jsonl(task.kind, task.splits.test, r.test_predictions));
  }
  if (!f.save_model.empty()) {
    ckpt::Checkpoint model{std::move(*r.model), init.tokenizer, nlohmann::json::object()};
    model.metadata = {{"command", "finetune"},
                      {"task", task.name},
                      {"kind", f.task.kind},
                      {"labels", r.labels.labels},
                      {"config", effective},
                      {"test", metrics::to_json(r.test)}};
    ckpt::save(model, f.save_model);
  }
  note(task.name + " test " + r.test.metric + " = " + std::to_string(r.test.value));
}

struct GridFlags {
  CommonFlags common;
  std::vector<std::string> tasks;   // name:kind:path
  std::vector<std::string> models;  // name=checkpoint
  FinetuneOverrides overrides;
  std::string lrs;
  std::optional<std::size_t> runs;
  std::string out = "-";
  std::string report;
};

std::pair<std::string, std::string> split_once(const std::string& s, char sep, const char* what) {
  const auto at = s.find(sep);
  if (at == std::string::npos || at == 0 || at + 1 == s.size()) {
    throw ConfigError(std::string("malformed ") + what + ": '" + s + "'");
  }
  return {s.substr(0, at), s.substr(at + 1)};
}

void grid(const GridFlags& f) {
  PipelineConfig config = load_config(f.common.config);
  f.overrides.apply(config.finetune);
  if (!f.lrs.empty()) config.grid.learning_rates = parse_doubles(f.lrs);
  if (f.runs) config.grid.runs_per_lr = *f.runs;
  if (f.common.seed) config.grid.seed = *f.common.seed;
  config.grid.validate();
  const int threads = f.common.resolved_threads();

  std::vector<train::Task> tasks;
  for (const auto& spec : f.tasks) {
    const auto [name, rest] = split_once(spec, ':', "--task (want name:kind:path)");
    const auto [kind, path] = split_once(rest, ':', "--task (want name:kind:path)");
    TaskFlags tf;
    tf.name = name;
    tf.kind = kind;
    tf.data = path;
    data::task_kind_from_string(kind);
    tasks.push_back(load_splits(tf, config.split));
  }
  std::vector<std::pair<std::string, ckpt::Checkpoint>> models;
  for (const auto& spec : f.models) {
    const auto [name, path] = split_once(spec, '=', "--model (want name=checkpoint)");
    models.emplace_back(name, ckpt::load(path));
  }

  std::vector<train::ReportCell> cells;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& task : tasks) {
    for (const auto& [name, model] : models) {
      auto runner = [&, &model = model](double lr, std::uint64_t seed) {
        train::FinetuneConfig fc = config.finetune;
        fc.lr = lr;
        fc.seed = seed;
        fc.threads = 1;
        const train::RunResult r = train::finetune(task, model, fc);
        return train::RunOutcome{seed, r.test.value, "", train::to_json(r)};
      };
      train::GridResult g = train::run_grid(runner, config.grid, threads);
      note(task.name + " / " + name + ": lr " + std::to_string(g.selected_lr) + " mean " +
           std::to_string(g.selected_mean));
      runs.push_back({{"task", task.name}, {"model", name}, {"grid", train::to_json(g)}});
      cells.push_back({task.name, name, std::move(g)});
    }
  }
  const train::ComparisonReport report = train::compare(cells);
  write_json(f.out, {{"config", {{"command", "grid"},
                                 {"grid", to_json(config).at("grid")},
                                 {"finetune", config.finetune},
                                 {"split", to_json(config).at("split")},
                                 {"tasks", f.tasks},
                                 {"models", f.models}}},
                     {"runs", runs},
                     {"report", train::to_json(report)}});
  if (!f.report.empty()) write_text(f.report, train::render_markdown(report));
}

struct EvalFlags {
  CommonFlags common;
  std::string ckpt;
  TaskFlags task;
  std::string corpus_path;
  std::string shard;
  std::string format = "json";
  std::string out = "-";
  std::string predictions;
};

void eval(const EvalFlags& f) {
  const PipelineConfig config = load_config(f.common.config);
  const ckpt::Checkpoint model = ckpt::load(f.ckpt);
  const int threads = f.common.resolved_threads();

  if (!f.corpus_path.empty() || !f.shard.empty()) {
    if (!model.state.head || model.state.head->kind != HeadKind::kMlm) {
      throw ConfigError("eval: MLM evaluation needs a checkpoint with an MLM head");
    }
    std::vector<corpus::PackedSequence> seqs;
    if (!f.shard.empty()) {
      seqs = corpus::read_shard(f.shard);
    } else {
      seqs = corpus::pack_corpus(corpus::read_corpus(f.corpus_path), model.tokenizer,
                                 config.packing_for(model.state.config), nullptr, threads);
    }
    const std::uint64_t seed = f.common.seed.value_or(0);
    const train::MlmEval e = train::evaluate_mlm(model.state, seqs, seed, config.pretrain.mlm, threads);
    metrics::MetricReport r;
    r.task = "mlm";
    r.metric = "masked_accuracy";
    r.value = e.accuracy;
    r.support = e.positions;
    r.extra = {{"loss", e.loss}};
    if (f.format == "csv") {
      write_text(f.out, metrics::csv_header() + "\n" + metrics::csv_row(r) + "\n");
    } else {
      nlohmann::json j = metrics::to_json(r);
      j["config"] = {{"command", "eval"}, {"seed", seed}, {"sequences", seqs.size()}};
      write_json(f.out, j);
    }
    return;
  }

  if (f.task.data.empty()) throw ConfigError("eval: give --data (task records) or --corpus/--shard");
  const std::string kind_name =
      f.task.kind.empty() ? model.metadata.value("kind", std::string()) : f.task.kind;
  if (kind_name.empty()) throw ConfigError("eval: --kind is required for this checkpoint");
  if (!model.metadata.contains("labels")) {
    throw ConfigError("eval: checkpoint has no label space; save it with finetune --save-model");
  }
  const data::TaskKind kind = data::task_kind_from_string(kind_name);
  const train::LabelSpace labels{model.metadata.at("labels").get<std::vector<std::string>>()};
  const auto records = load_task(f.task.data, kind);
  const train::Predictions pred = train::predict(model.state, model.tokenizer, kind, labels, records, threads);
  const std::string name = f.task.name.empty() ? model.metadata.value("task", kind_name) : f.task.name;
  const metrics::MetricReport r = train::evaluate(name, kind, records, pred);
  if (f.format == "csv") {
    write_text(f.out, metrics::csv_header() + "\n" + metrics::csv_row(r) + "\n");
  } else {
    nlohmann::json j = metrics::to_json(r);
    j["config"] = {{"command", "eval"}, {"kind", kind_name}, {"records", records.size()}};
    write_json(f.out, j);
  }
  if (!f.predictions.empty()) write_text(f.predictions, predictions_jsonl(kind, records, pred));
}

}  // namespace

void add_task_commands(CLI::App& app) {
  {
    auto f = std::make_shared<FinetuneFlags>();
    auto* cmd = app.add_subcommand("finetune", "Fine-tune a task head and score the test split");
    add_common_flags(cmd, f->common);
    add_task_flags(cmd, f->task, true);
    f->overrides.add(cmd, true);
    cmd->add_option("--init", f->init, "Pre-trained checkpoint")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", f->out, "Run record JSON ('-' for standard output)");
    cmd->add_option("--predictions", f->predictions, "Test predictions as JSON lines");
    cmd->add_option("--save-model", f->save_model, "Checkpoint of the selected epoch");
    cmd->callback([f] { finetune(*f); });
  }
  {
    auto f = std::make_shared<GridFlags>();
    auto* cmd = app.add_subcommand("grid", "Learning-rate grid over tasks and models with a t-test report");
    add_common_flags(cmd, f->common);
    cmd->add_option("--task", f->tasks, "name:kind:path (repeatable)")->required();
    cmd->add_option("--model", f->models, "name=checkpoint (repeatable)")->required();
    f->overrides.add(cmd, false);
    cmd->add_option("--lrs", f->lrs, "Comma-separated learning rates");
    cmd->add_option("--runs", f->runs, "Runs per learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--out", f->out, "Grid JSON ('-' for standard output)");
    cmd->add_option("--report", f->report, "Markdown comparison table");
    cmd->callback([f] { grid(*f); });
  }
  {
    auto f = std::make_shared<EvalFlags>();
    auto* cmd = app.add_subcommand("eval", "Score a checkpoint on task records or an MLM corpus");
    add_common_flags(cmd, f->common);
    cmd->add_option("--ckpt", f->ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    cmd->add_option("--kind", f->task.kind, "Task kind (default: from the checkpoint)")
        ->check(CLI::IsMember(kTaskKindNames));
    cmd->add_option("--task-name", f->task.name, "Name used in the report");
    cmd->add_option("--data", f->task.data, "Task records to score")->check(CLI::ExistingFile);
    cmd->add_option("--corpus", f->corpus_path, "Text corpus for MLM scoring")->check(CLI::ExistingFile);
    cmd->add_option("--shard", f->shard, "Packed shard for MLM scoring")->check(CLI::ExistingFile);
    cmd->add_option("--format", f->format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--out", f->out, "Report ('-' for standard output)");
    cmd->add_option("--predictions", f->predictions, "Predictions as JSON lines");
    cmd->callback([f] { eval(*f); });
  }
}

}  // namespace longdoc::cli
