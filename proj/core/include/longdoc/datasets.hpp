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

#ifndef LONGDOC_DATASETS_HPP_
#define LONGDOC_DATASETS_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "longdoc/real.hpp"

namespace longdoc::inline LONGDOC_ABI::data {

enum class TaskKind { kPos, kNer, kMulticlass, kMultilabel, kSts, kMcqa };

std::string_view to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view name);
bool is_token_task(TaskKind kind);

inline constexpr std::string_view kAnswerLetters = "ABCDE";

struct TaskRecord {
  TaskKind kind = TaskKind::kMulticlass;

  // POS / NER: one tag per token; sentence_starts holds the first token
  // index of every sentence (always starts with 0).
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  std::vector<std::size_t> sentence_starts;

  // MULTICLASS: one document, or a source plus three candidates.
  // MULTILABEL: one document. STS: the two texts.
  std::vector<std::string> texts;
  std::string label;                // MULTICLASS
  std::vector<std::string> labels;  // MULTILABEL, sorted and unique
  double score = 0.0;               // STS, in [0, 5]

  // MCQA
  std::string question;
  std::vector<std::string> answers;  // exactly five
  std::string correct;               // sorted letters, e.g. "AB"

  std::size_t word_count = 0;
  std::size_t source_line = 0;        // 1-based line of the record start, 0 if synthetic
  std::vector<std::string> warnings;  // non-fatal problems (invalid IOB2 transitions)

  friend bool operator==(const TaskRecord&, const TaskRecord&) = default;
};

// Recomputes word_count (whitespace words of the raw text, or token count
// for token tasks) and validates the record invariants; raises
// ParseError(location, problem) on a violation.
void finalize_record(TaskRecord& record, const std::string& location);

// Token tasks read CoNLL-style TSV: "token<TAB>tag", blank line between
// sentences, a "-DOCSTART-" line opening a document. With document markers a
// record is one document; without, one sentence. Other kinds read
// JSON lines (see docs/formats.md).
std::vector<TaskRecord> read_task_file(const std::string& path, TaskKind kind);
std::vector<TaskRecord> parse_task_text(std::string_view text, TaskKind kind,
                                        const std::string& origin = "input");
void write_task_file(const std::string& path, const std::vector<TaskRecord>& records,
                     TaskKind kind);
std::string format_task_text(const std::vector<TaskRecord>& records, TaskKind kind);

// Returns the transitions that strict IOB2 rejects ("I-X" not following
// "B-X"/"I-X"), as human-readable notes. Raises FormatError on a tag that is
// not O, B-X or I-X.
std::vector<std::string> iob2_problems(const std::vector<std::string>& tags);

struct SplitSpec {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Splits {
  std::vector<TaskRecord> train, validation, test;
};

// Seeded shuffle, then round(train * n) and round(validation * n) records;
// the rest is test.
Splits split(const std::vector<TaskRecord>& records, const SplitSpec& spec);

struct SynthOptions {
  std::size_t n_classes = 3;     // MULTICLASS / MULTILABEL label count, NER entity types
  std::size_t min_words = 12;
  std::size_t max_words = 24;
  std::size_t filler_vocab = 40;
  // MULTICLASS: the label keyword opens the document and keywords of other
  // classes appear later as distractors.
  bool signal_at_start = false;
};

// Learnable synthetic tasks whose labels follow from the text:
//   MULTICLASS  one class keyword "kw<c>" inside filler words "f<i>";
//   MULTILABEL  keyword "kw<c>" present exactly for the labels in the set;
//   NER         entity words "e<t>x<i>" of type T<t>, runs tagged B-/I-;
//   POS         words drawn from per-tag lexicons ("<tag>x<i>");
//   STS         score = round(5 * Jaccard) of the two word sets;
//   MCQA        answers containing a question keyword are correct.
std::vector<TaskRecord> synth_generate(TaskKind kind, std::size_t size, std::uint64_t seed,
                                       const SynthOptions& options = {});

// Tagger that recovers synthetic NER / POS tags from the word shapes above.
std::vector<std::string> synth_oracle_tags(TaskKind kind, const std::vector<std::string>& tokens);

// Raw text of a record in reading order (used for tokenizer training and
// length analysis).
std::string record_text(const TaskRecord& record);

}  // namespace longdoc::inline LONGDOC_ABI::data

#endif  // LONGDOC_DATASETS_HPP_
