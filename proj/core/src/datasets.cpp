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

#include "longdoc/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "longdoc/errors.hpp"
#include "longdoc/rng.hpp"
#include "longdoc/tokenizer.hpp"

namespace longdoc::inline LONGDOC_ABI::data {

namespace {

constexpr std::string_view kDocStart = "-DOCSTART-";

struct KindName {
  TaskKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {TaskKind::kPos, "pos"},         {TaskKind::kNer, "ner"},
    {TaskKind::kMulticlass, "multiclass"}, {TaskKind::kMultilabel, "multilabel"},
    {TaskKind::kSts, "sts"},         {TaskKind::kMcqa, "mcqa"},
};

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  for (const auto& k : kKindNames) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

TaskKind task_kind_from_string(std::string_view name) {
  for (const auto& k : kKindNames) {
    if (k.name == name) return k.kind;
  }
  throw ConfigError("unknown task kind '" + std::string(name) +
                    "' (expected pos, ner, multiclass, multilabel, sts or mcqa)");
}

bool is_token_task(TaskKind kind) { return kind == TaskKind::kPos || kind == TaskKind::kNer; }

std::vector<std::string> iob2_problems(const std::vector<std::string>& tags) {
  std::vector<std::string> problems;
  std::string open;  // type of the entity the previous tag belongs to
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& t = tags[i];
    if (t == "O") {
      open.clear();
      continue;
    }
    if (t.size() < 3 || (t[0] != 'B' && t[0] != 'I') || t[1] != '-') {
      throw FormatError("tag '" + t + "' at token " + std::to_string(i) + " is not O, B-X or I-X");
    }
    const std::string type = t.substr(2);
    if (t[0] == 'I' && open != type) {
      problems.push_back("token " + std::to_string(i) + ": " + t + " does not continue an entity");
    }
    open = type;
  }
  return problems;
}

std::string record_text(const TaskRecord& r) {
  if (is_token_task(r.kind)) return join_words(r.tokens);
  if (r.kind == TaskKind::kMcqa) {
    std::vector<std::string> parts{r.question};
    parts.insert(parts.end(), r.answers.begin(), r.answers.end());
    return join_words(parts);
  }
  return join_words(r.texts);
}

void finalize_record(TaskRecord& r, const std::string& location) {
  auto fail = [&](const std::string& what) { throw ParseError(location, what); };
  switch (r.kind) {
    case TaskKind::kPos:
    case TaskKind::kNer: {
      if (r.tokens.empty()) fail("record has no tokens");
      if (r.tokens.size() != r.tags.size()) fail("token and tag counts differ");
      for (const auto& t : r.tags) {
        if (t.empty()) fail("empty tag");
      }
      if (r.sentence_starts.empty() || r.sentence_starts.front() != 0) {
        r.sentence_starts.insert(r.sentence_starts.begin(), 0);
      }
      if (r.kind == TaskKind::kNer) {
        try {
          r.warnings = iob2_problems(r.tags);
        } catch (const FormatError& e) {
          fail(e.what());
        }
      }
      r.word_count = r.tokens.size();
      return;
    }
    case TaskKind::kMulticlass:
      if (r.texts.size() != 1 && r.texts.size() != 4) {
        fail("multiclass record needs one text or a source plus three candidates");
      }
      if (r.label.empty()) fail("missing label");
      break;
    case TaskKind::kMultilabel: {
      if (r.texts.size() != 1) fail("multilabel record needs exactly one text");
      std::set<std::string> unique(r.labels.begin(), r.labels.end());
      if (unique.contains("")) fail("empty label");
      r.labels.assign(unique.begin(), unique.end());
      break;
    }
    case TaskKind::kSts:
      if (r.texts.size() != 2) fail("sts record needs exactly two texts");
      if (!std::isfinite(r.score) || r.score < 0.0 || r.score > 5.0) {
        fail("sts score " + std::to_string(r.score) + " outside [0, 5]");
      }
      break;
    case TaskKind::kMcqa: {
      if (r.answers.size() != kAnswerLetters.size()) fail("mcqa record needs exactly five answers");
      std::set<char> letters;
      for (char c : r.correct) {
        if (kAnswerLetters.find(c) == std::string_view::npos) {
          fail(std::string("answer letter '") + c + "' outside A-E");
        }
        letters.insert(c);
      }
      if (letters.empty()) fail("mcqa record needs at least one correct answer");
      r.correct.assign(letters.begin(), letters.end());
      break;
    }
  }
  r.word_count = tok::word_count(record_text(r));
}

// ---------------------------------------------------------------------------
// Reading

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

std::vector<TaskRecord> parse_conll(std::string_view text, TaskKind kind, const std::string& origin) {
  const auto lines = split_lines(text);
  bool documents = false;
  for (auto line : lines) {
    if (line.substr(0, line.find('\t')) == kDocStart) documents = true;
  }

  std::vector<TaskRecord> out;
  TaskRecord current;
  current.kind = kind;
  bool sentence_open = false;
  std::size_t record_line = 0;

  auto flush_record = [&]() {
    if (!current.tokens.empty()) {
      current.source_line = record_line;
      finalize_record(current, origin + ":" + std::to_string(record_line));
      out.push_back(std::move(current));
    }
    current = TaskRecord{};
    current.kind = kind;
    sentence_open = false;
  };

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = lines[i];
    const std::string where = origin + ":" + std::to_string(i + 1);
    if (is_blank(line)) {
      if (documents) {
        sentence_open = false;
      } else {
        flush_record();
      }
      continue;
    }
    std::vector<std::string> fields;
    for (std::size_t start = 0;;) {
      const std::size_t tab = line.find('\t', start);
      fields.emplace_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (fields[0] == kDocStart) {
      flush_record();
      continue;
    }
    if (fields.size() < 2) throw ParseError(where, "expected 'token<TAB>tag'");
    if (fields.size() > 2) {
      throw ParseError(where, "extra tag columns (overlapping annotations must be flattened first)");
    }
    if (fields[0].empty()) throw ParseError(where, "empty token");
    if (current.tokens.empty()) record_line = i + 1;
    if (!sentence_open && !current.tokens.empty()) current.sentence_starts.push_back(current.tokens.size());
    sentence_open = true;
    current.tokens.push_back(fields[0]);
    current.tags.push_back(fields[1]);
  }
  flush_record();
  return out;
}

template <typename T>
T field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ParseError(where, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(where, std::string("field '") + key + "' has the wrong type");
  }
}

TaskRecord parse_json_record(const nlohmann::json& j, TaskKind kind, const std::string& where) {
  if (!j.is_object()) throw ParseError(where, "expected a JSON object");
  TaskRecord r;
  r.kind = kind;
  switch (kind) {
    case TaskKind::kMulticlass:
      if (j.contains("texts")) {
        r.texts = field<std::vector<std::string>>(j, "texts", where);
      } else {
        r.texts = {field<std::string>(j, "text", where)};
      }
      r.label = field<std::string>(j, "label", where);
      break;
    case TaskKind::kMultilabel:
      r.texts = {field<std::string>(j, "text", where)};
      r.labels = field<std::vector<std::string>>(j, "labels", where);
      break;
    case TaskKind::kSts:
      r.texts = {field<std::string>(j, "text1", where), field<std::string>(j, "text2", where)};
      r.score = field<double>(j, "score", where);
      break;
    case TaskKind::kMcqa: {
      r.question = field<std::string>(j, "question", where);
      r.answers = field<std::vector<std::string>>(j, "answers", where);
      for (const auto& c : field<std::vector<std::string>>(j, "correct", where)) {
        if (c.size() != 1) throw ParseError(where, "answer letters must be single characters");
        r.correct += c;
      }
      break;
    }
    default:
      throw ConfigError("token tasks are read from TSV, not JSON lines");
  }
  finalize_record(r, where);
  return r;
}

}  // namespace

std::vector<TaskRecord> parse_task_text(std::string_view text, TaskKind kind,
                                        const std::string& origin) {
  if (is_token_task(kind)) return parse_conll(text, kind, origin);
  std::vector<TaskRecord> out;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const std::string where = origin + ":" + std::to_string(i + 1);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where, std::string("invalid JSON: ") + e.what());
    }
    TaskRecord r = parse_json_record(j, kind, where);
    r.source_line = i + 1;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TaskRecord> read_task_file(const std::string& path, TaskKind kind) {
  return parse_task_text(detail::read_file(path), kind, path);
}

std::string format_task_text(const std::vector<TaskRecord>& records, TaskKind kind) {
  std::string out;
  if (is_token_task(kind)) {
    const bool documents = std::any_of(records.begin(), records.end(), [](const TaskRecord& r) {
      return r.sentence_starts.size() > 1;
    });
    for (const auto& r : records) {
      if (documents) out += std::string(kDocStart) + "\n\n";
      for (std::size_t i = 0; i < r.tokens.size(); ++i) {
        if (i > 0 && std::find(r.sentence_starts.begin(), r.sentence_starts.end(), i) !=
                         r.sentence_starts.end()) {
          out += '\n';
        }
        out += r.tokens[i] + "\t" + r.tags[i] + "\n";
      }
      out += '\n';
    }
    return out;
  }
  for (const auto& r : records) {
    nlohmann::json j;
    switch (kind) {
      case TaskKind::kMulticlass:
        if (r.texts.size() == 1) {
          j["text"] = r.texts[0];
        } else {
          j["texts"] = r.texts;
        }
        j["label"] = r.label;
        break;
      case TaskKind::kMultilabel:
        j["text"] = r.texts.at(0);
        j["labels"] = r.labels;
        break;
      case TaskKind::kSts:
        j["text1"] = r.texts.at(0);
        j["text2"] = r.texts.at(1);
        j["score"] = r.score;
        break;
      case TaskKind::kMcqa: {
        j["question"] = r.question;
        j["answers"] = r.answers;
        std::vector<std::string> letters;
        for (char c : r.correct) letters.emplace_back(1, c);
        j["correct"] = letters;
        break;
      }
      default:
        break;
    }
    out += j.dump() + "\n";
  }
  return out;
}

void write_task_file(const std::string& path, const std::vector<TaskRecord>& records,
                     TaskKind kind) {
  detail::write_file_atomic(path, format_task_text(records, kind));
}

// ---------------------------------------------------------------------------
// Splits

void SplitSpec::validate() const {
  if (train < 0 || validation < 0 || test < 0 || std::abs(train + validation + test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be nonnegative and sum to 1");
  }
}

Splits split(const std::vector<TaskRecord>& records, const SplitSpec& spec) {
  spec.validate();
  if (records.size() < 3) throw ConfigError("split needs at least 3 records");
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(order);
  const auto n = static_cast<double>(records.size());
  const auto n_train = std::min(records.size(), static_cast<std::size_t>(std::lround(spec.train * n)));
  const auto n_val = std::min(records.size() - n_train,
                              static_cast<std::size_t>(std::lround(spec.validation * n)));
  Splits s;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const TaskRecord& r = records[order[i]];
    if (i < n_train) {
      s.train.push_back(r);
    } else if (i < n_train + n_val) {
      s.validation.push_back(r);
    } else {
      s.test.push_back(r);
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic tasks

namespace {

const std::vector<std::string>& pos_tags() {
  static const std::vector<std::string> tags{"DET", "NOUN", "VERB", "ADJ", "ADP"};
  return tags;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

class Synth {
 public:
  Synth(std::uint64_t seed, const SynthOptions& o) : rng_(seed), o_(o) {}

  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_.uniform_int(n)); }
  std::size_t length() { return o_.min_words + pick(o_.max_words - o_.min_words + 1); }
  std::string filler() { return "f" + std::to_string(pick(o_.filler_vocab)); }
  std::vector<std::string> fillers(std::size_t n) {
    std::vector<std::string> w(n);
    for (auto& s : w) s = filler();
    return w;
  }

  TaskRecord multiclass() {
    TaskRecord r;
    r.kind = TaskKind::kMulticlass;
    const std::size_t c = pick(o_.n_classes);
    auto words = fillers(length());
    if (o_.signal_at_start) {
      words[0] = keyword(c);
      if (o_.n_classes > 1) {
        for (int k = 0; k < 2; ++k) {
          const std::size_t other = (c + 1 + pick(o_.n_classes - 1)) % o_.n_classes;
          words[words.size() / 2 + pick(words.size() - words.size() / 2)] = keyword(other);
        }
      }
    } else {
      words[pick(words.size())] = keyword(c);
    }
    r.texts = {join_words(words)};
    r.label = "c" + std::to_string(c);
    return r;
  }

  TaskRecord multilabel() {
    TaskRecord r;
    r.kind = TaskKind::kMultilabel;
    std::vector<std::size_t> on;
    for (std::size_t c = 0; c < o_.n_classes; ++c) {
      if (rng_.uniform() < 0.5) on.push_back(c);
    }
    if (on.empty()) on.push_back(pick(o_.n_classes));
    auto words = fillers(std::max(length(), on.size()));
    std::vector<std::size_t> slots(words.size());
    for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
    rng_.shuffle(slots);
    for (std::size_t k = 0; k < on.size(); ++k) {
      words[slots[k]] = keyword(on[k]);
      r.labels.push_back("l" + std::to_string(on[k]));
    }
    r.texts = {join_words(words)};
    return r;
  }

  TaskRecord ner() {
    TaskRecord r;
    r.kind = TaskKind::kNer;
    const std::size_t n_sentences = 1 + pick(3);
    for (std::size_t s = 0; s < n_sentences; ++s) {
      r.sentence_starts.push_back(r.tokens.size());
      const std::size_t n_entities = 1 + pick(3);
      for (std::size_t e = 0; e < n_entities; ++e) {
        for (std::size_t f = 1 + pick(4); f > 0; --f) {
          r.tokens.push_back(filler());
          r.tags.push_back("O");
        }
        const std::size_t type = pick(o_.n_classes);
        const std::size_t len = 1 + pick(2);
        for (std::size_t k = 0; k < len; ++k) {
          r.tokens.push_back("e" + std::to_string(type) + "x" + std::to_string(pick(6)));
          r.tags.push_back((k == 0 ? "B-T" : "I-T") + std::to_string(type));
        }
      }
      r.tokens.push_back(filler());
      r.tags.push_back("O");
    }
    return r;
  }

  TaskRecord pos() {
    TaskRecord r;
    r.kind = TaskKind::kPos;
    const std::size_t n = o_.min_words / 2 + pick(o_.min_words);
    for (std::size_t i = 0; i < std::max<std::size_t>(n, 1); ++i) {
      const auto& tag = pos_tags()[pick(pos_tags().size())];
      r.tokens.push_back(lower(tag) + "x" + std::to_string(pick(8)));
      r.tags.push_back(tag);
    }
    r.sentence_starts = {0};
    return r;
  }

  TaskRecord sts() {
    TaskRecord r;
    r.kind = TaskKind::kSts;
    const auto a = fillers(3 + pick(6));
    std::vector<std::string> b;
    const double keep = rng_.uniform();
    for (const auto& w : a) b.push_back(rng_.uniform() < keep ? w : filler());
    const std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::size_t both = 0;
    for (const auto& w : sa) both += sb.count(w);
    const double jaccard = static_cast<double>(both) / static_cast<double>(sa.size() + sb.size() - both);
    r.texts = {join_words(a), join_words(b)};
    r.score = std::round(5.0 * jaccard);
    return r;
  }

  TaskRecord mcqa() {
    TaskRecord r;
    r.kind = TaskKind::kMcqa;
    const std::size_t key = pick(10);
    auto q = fillers(3 + pick(3));
    q[pick(q.size())] = "q" + std::to_string(key);
    r.question = join_words(q);
    for (std::size_t a = 0; a < kAnswerLetters.size(); ++a) {
      const bool right = rng_.uniform() < 0.4;
      auto words = fillers(2 + pick(3));
      const std::size_t other = (key + 1 + pick(9)) % 10;
      words[pick(words.size())] = "q" + std::to_string(right ? key : other);
      r.answers.push_back(join_words(words));
      if (right) r.correct += kAnswerLetters[a];
    }
    if (r.correct.empty()) {
      const std::size_t a = pick(kAnswerLetters.size());
      auto words = fillers(3);
      words[0] = "q" + std::to_string(key);
      r.answers[a] = join_words(words);
      r.correct += kAnswerLetters[a];
    }
    return r;
  }

 private:
  std::string keyword(std::size_t c) const { return "kw" + std::to_string(c); }

  Rng rng_;
  SynthOptions o_;
};

}  // namespace

std::vector<TaskRecord> synth_generate(TaskKind kind, std::size_t size, std::uint64_t seed,
                                       const SynthOptions& options) {
  if (options.n_classes < 1 || options.min_words < 2 || options.max_words < options.min_words ||
      options.filler_vocab < 1) {
    throw ConfigError("synth: invalid options");
  }
  Synth g(seed, options);
  std::vector<TaskRecord> out;
  out.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    TaskRecord r;
    switch (kind) {
      case TaskKind::kMulticlass: r = g.multiclass(); break;
      case TaskKind::kMultilabel: r = g.multilabel(); break;
      case TaskKind::kNer: r = g.ner(); break;
      case TaskKind::kPos: r = g.pos(); break;
      case TaskKind::kSts: r = g.sts(); break;
      case TaskKind::kMcqa: r = g.mcqa(); break;
    }
    finalize_record(r, "synthetic record " + std::to_string(i));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::string> synth_oracle_tags(TaskKind kind, const std::vector<std::string>& tokens) {
  std::vector<std::string> tags;
  std::string previous_type;
  for (const auto& w : tokens) {
    const auto x = w.find('x');
    if (kind == TaskKind::kPos) {
      std::string tag = x == std::string::npos ? "X" : w.substr(0, x);
      for (auto& c : tag) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      tags.push_back(tag);
      continue;
    }
    if (w.size() > 2 && w[0] == 'e' && x != std::string::npos && x > 1) {
      const std::string type = "T" + w.substr(1, x - 1);
      tags.push_back((previous_type == type ? "I-" : "B-") + type);
      previous_type = type;
    } else {
      tags.push_back("O");
      previous_type.clear();
    }
  }
  return tags;
}

}  // namespace longdoc::inline LONGDOC_ABI::data
