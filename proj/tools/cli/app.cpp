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

#include "cli/app.hpp"

#include <algorithm>
#include <exception>
#include <iostream>
#include <new>

#include "cli/commands.hpp"
#include "longdoc/errors.hpp"
#include "longdoc/parallel.hpp"

namespace longdoc::cli {

int CommonFlags::resolved_threads() const { return resolve_threads(threads); }

void add_common_flags(CLI::App* cmd, CommonFlags& flags, bool with_seed) {
  cmd->add_option("--config", flags.config, "JSON configuration file")->check(CLI::ExistingFile);
  if (with_seed) cmd->add_option("--seed", flags.seed, "Random seed (overrides the config)");
  cmd->add_option("--threads", flags.threads,
                  "Worker threads (default: LONGDOC_THREADS, then all cores)")
      ->check(CLI::NonNegativeNumber);
}

namespace {

// "analysis attention|length" and "ckpt inspect" are spellings of the
// hyphenated commands.
void rewrite_aliases(std::vector<std::string>& args) {
  if (args.size() < 3) return;
  if (args[1] == "analysis" && (args[2] == "attention" || args[2] == "length")) {
    args[1] = "analyze-" + args[2];
    args.erase(args.begin() + 2);
  } else if (args[1] == "ckpt" && args[2] == "inspect") {
    args[1] = "ckpt-inspect";
    args.erase(args.begin() + 2);
  }
}

}  // namespace

int run(std::vector<std::string> args) {
  rewrite_aliases(args);
  CLI::App app{"longdoc: long-document encoder toolkit"};
  app.name("longdoc");
  app.require_subcommand(1);
  app.fallthrough(false);
  add_data_commands(app);
  add_model_commands(app);
  add_task_commands(app);
  add_analysis_commands(app);

  std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (app.get_subcommands().empty()) std::cerr << app.help();
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "longdoc: configuration error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "longdoc: numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const GridError& e) {
    std::cerr << "longdoc: grid failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "longdoc: data error: " << e.what() << "\n";
    return 2;
  } catch (const std::bad_alloc&) {
    std::cerr << "longdoc: out of memory\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "longdoc: error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace longdoc::cli
