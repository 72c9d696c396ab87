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

#include "cli/common.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "longdoc/errors.hpp"

namespace longdoc::cli {

corpus::PackingConfig PipelineConfig::packing_for(const ModelConfig& m) const {
  if (packing) return *packing;
  corpus::PackingConfig p;
  p.seq_len = m.max_positions;
  p.min_body = std::min(512, p.seq_len - 2);
  return p;
}

PipelineConfig load_config(const std::string& path) {
  PipelineConfig c;
  if (path.empty()) return c;
  const nlohmann::json j = read_json(path);
  try {
    if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
    if (j.contains("tokenizer")) {
      const auto& t = j.at("tokenizer");
      c.tokenizer.vocab_size = t.value("vocab_size", c.tokenizer.vocab_size);
      c.tokenizer.min_freq = t.value("min_freq", c.tokenizer.min_freq);
      c.tokenizer.normalizer.nfc = t.value("nfc", c.tokenizer.normalizer.nfc);
      c.tokenizer.normalizer.lowercase = t.value("lowercase", c.tokenizer.normalizer.lowercase);
    }
    if (j.contains("packing")) {
      const auto& p = j.at("packing");
      corpus::PackingConfig pc = c.packing_for(c.model);
      pc.seq_len = p.value("seq_len", pc.seq_len);
      pc.min_body = p.value("min_body", std::min(pc.min_body, pc.seq_len - 2));
      c.packing = pc;
    }
    if (j.contains("pretrain")) c.pretrain = j.at("pretrain").get<train::TrainConfig>();
    if (j.contains("finetune")) c.finetune = j.at("finetune").get<train::FinetuneConfig>();
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      c.grid.learning_rates = g.value("learning_rates", c.grid.learning_rates);
      c.grid.runs_per_lr = g.value("runs_per_lr", c.grid.runs_per_lr);
      c.grid.seed = g.value("seed", c.grid.seed);
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      c.split.train = s.value("train", c.split.train);
      c.split.validation = s.value("validation", c.split.validation);
      c.split.test = s.value("test", c.split.test);
      c.split.seed = s.value("seed", c.split.seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

nlohmann::json to_json(const PipelineConfig& c) {
  const corpus::PackingConfig p = c.packing_for(c.model);
  return nlohmann::json{
      {"model", c.model},
      {"tokenizer", {{"vocab_size", c.tokenizer.vocab_size},
                     {"min_freq", c.tokenizer.min_freq},
                     {"nfc", c.tokenizer.normalizer.nfc},
                     {"lowercase", c.tokenizer.normalizer.lowercase}}},
      {"packing", {{"seq_len", p.seq_len}, {"min_body", p.min_body}}},
      {"pretrain", c.pretrain},
      {"finetune", c.finetune},
      {"grid", {{"learning_rates", c.grid.learning_rates},
                {"runs_per_lr", c.grid.runs_per_lr},
                {"seed", c.grid.seed}}},
      {"split", {{"train", c.split.train},
                 {"validation", c.split.validation},
                 {"test", c.split.test},
                 {"seed", c.split.seed}}}};
}

void write_text(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    std::cout.flush();
    return;
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp + " for writing");
    out << content;
    if (!out) throw DataError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw DataError("cannot rename " + tmp + " to " + path);
  }
}

void write_json(const std::string& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, e.what());
  }
}

tok::Tokenizer load_tokenizer(const std::string& path) {
  try {
    return read_json(path).get<tok::Tokenizer>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": not a tokenizer file (" + e.what() + ")");
  }
}

std::vector<data::TaskRecord> load_task(const std::string& path, data::TaskKind kind) {
  return data::read_task_file(path, kind);
}

namespace {

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& list, Parse parse) {
  std::vector<T> out;
  std::stringstream s(list);
  std::string item;
  while (std::getline(s, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(parse(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty list: '" + list + "'");
  return out;
}

}  // namespace

std::vector<double> parse_doubles(const std::string& list) {
  return parse_list<double>(list, [](const std::string& s, std::size_t* n) { return std::stod(s, n); });
}

std::vector<std::size_t> parse_sizes(const std::string& list) {
  return parse_list<std::size_t>(
      list, [](const std::string& s, std::size_t* n) { return std::stoul(s, n); });
}

std::string predictions_jsonl(data::TaskKind kind, const std::vector<data::TaskRecord>& records,
                              const train::Predictions& pred) {
  std::string out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    nlohmann::json j{{"index", i}, {"correct", train::is_correct(records[i], pred, i)}};
    switch (kind) {
      case data::TaskKind::kPos:
      case data::TaskKind::kNer: j["tags"] = pred.tags[i]; break;
      case data::TaskKind::kMulticlass: j["label"] = pred.labels[i]; break;
      case data::TaskKind::kMultilabel: j["labels"] = pred.label_sets[i]; break;
      case data::TaskKind::kSts: j["score"] = pred.scores[i]; break;
      case data::TaskKind::kMcqa: j["correct_answers"] = pred.label_sets[i]; break;
    }
    out += j.dump() + "\n";
  }
  return out;
}

void note(const std::string& message) { std::cerr << "longdoc: " << message << "\n"; }

}  // namespace longdoc::cli
