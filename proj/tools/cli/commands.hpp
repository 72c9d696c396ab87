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

#ifndef LONGDOC_TOOLS_COMMANDS_HPP_
#define LONGDOC_TOOLS_COMMANDS_HPP_

#include <cstdint>
#include <optional>
#include <string>

#include "CLI11.hpp"

namespace longdoc::cli {

// Flags shared by most commands.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 0;  // 0: LONGDOC_THREADS, then hardware

  int resolved_threads() const;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags, bool with_seed = true);

void add_data_commands(CLI::App& app);      // synth, tokenizer-train, pack
void add_model_commands(CLI::App& app);     // pretrain, convert, ckpt-inspect
void add_task_commands(CLI::App& app);      // finetune, grid, eval
void add_analysis_commands(CLI::App& app);  // analyze-attention, analyze-length, bench-attention

}  // namespace longdoc::cli

#endif  // LONGDOC_TOOLS_COMMANDS_HPP_
