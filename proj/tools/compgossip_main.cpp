// Copyright 2026 The compgossip Authors. All Rights Reserved.
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
// =============================================================================

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "compgossip/config.hpp"
#include "compgossip/consensus.hpp"
#include "compgossip/harness.hpp"
#include "compgossip/metrics.hpp"
#include "compgossip/optimize.hpp"
#include "compgossip/theory_check.hpp"

namespace {

using compgossip::ConfigError;
using compgossip::ExperimentMode;
using compgossip::Settings;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

struct RunCommand {
  ExperimentMode mode;
  std::map<std::string, std::string> flags;
  std::string config_path;
  std::string out_path;
};

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

void add_run_command(CLI::App& app, const std::string& name, const std::string& help, RunCommand& command) {
  CLI::App* sub = app.add_subcommand(name, help);
  for (const auto& key : compgossip::allowed_keys(command.mode)) {
    if (key == "mode") continue;
    sub->add_option(flag_name(key), command.flags[key]);
  }
  sub->add_option("--config", command.config_path, "key = value file; its keys override the flags");
  sub->add_option("--out", command.out_path, "CSV output path (default: stdout)");
}

Settings merged_settings(const RunCommand& command) {
  Settings settings;
  for (const auto& [key, value] : command.flags) {
    if (!value.empty()) settings.set(key, value);
  }
  if (!command.config_path.empty()) {
    const Settings file = compgossip::load_settings(command.config_path);
    for (const auto& [key, value] : file.values()) settings.set(key, value);
  }
  const std::string mode = compgossip::to_string(command.mode);
  if (settings.has("mode") && settings.get("mode", "") != mode) {
    throw ConfigError("config: mode '" + settings.get("mode", "") + "' does not match the '" + mode + "' command");
  }
  settings.set("mode", mode);
  return settings;
}

template <typename Writer>
void emit(const std::string& path, Writer&& writer) {
  if (path.empty()) {
    writer(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  writer(out);
}

int run_single(const RunCommand& command) {
  const compgossip::ExperimentConfig exp = compgossip::make_experiment("cli", merged_settings(command));
  if (exp.seeds.size() != 1) throw ConfigError("config: single runs take one seed; use the suite command for repeats");
  const std::uint64_t seed = exp.seeds.front();

  if (exp.mode == ExperimentMode::kConsensus) {
    const compgossip::ConsensusSetup setup = compgossip::consensus_from(exp.settings, seed);
    const compgossip::ConsensusRun run = compgossip::run_consensus(setup.config, setup.initial);
    emit(command.out_path, [&](std::ostream& out) {
      compgossip::write_records_csv(out, compgossip::kConsensusColumns, run.records);
    });
    std::cerr << "gamma=" << compgossip::format_float(run.gamma)
              << " final_error=" << compgossip::format_float(run.records.back().value) << "\n";
    return kExitOk;
  }

  const compgossip::Problem problem = compgossip::problem_from(exp.settings);
  const compgossip::OptimizeSetup setup = compgossip::optimize_from(exp.settings, problem, seed);
  if (exp.mode == ExperimentMode::kOptimize) {
    const compgossip::OptimizationRun run =
        compgossip::run_optimization(setup.config, *problem.objective, setup.initial, problem.reference.value);
    emit(command.out_path, [&](std::ostream& out) {
      compgossip::write_records_csv(out, compgossip::kOptimizeColumns, run.records);
    });
    std::cerr << "f_star=" << compgossip::format_float(problem.reference.value)
              << " final_subopt=" << compgossip::format_float(run.records.back().value)
              << " averaged_subopt=" << compgossip::format_float(run.averaged_subopt) << "\n";
    return kExitOk;
  }

  const compgossip::GridResult grid = compgossip::grid_search(setup.config, compgossip::grid_from(exp.settings),
                                                              *problem.objective, setup.initial,
                                                              problem.reference.value);
  emit(command.out_path, [&](std::ostream& out) { compgossip::write_grid_csv(out, grid); });
  std::cerr << "best_a=" << compgossip::format_float(grid.best_a) << " best_b=" << compgossip::format_float(grid.best_b)
            << " best_subopt=" << compgossip::format_float(grid.best_subopt) << "\n";
  return kExitOk;
}

int run_check(const std::string& kind_name, std::uint64_t seed, const std::string& out_path) {
  compgossip::CheckKind kind;
  try {
    kind = compgossip::parse_check_kind(kind_name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const compgossip::CheckReport report = compgossip::theory_check(kind, seed);
  compgossip::write_check_lines(std::cout, report);
  if (!out_path.empty()) {
    emit(out_path, [&](std::ostream& out) { compgossip::write_check_csv(out, report); });
  }
  return report.ok() ? kExitOk : kExitFailure;
}

int run_suite_command(const std::string& path, const std::string& output_dir) {
  compgossip::SuiteConfig suite = compgossip::load_suite(path);
  if (!output_dir.empty()) suite.output_dir = output_dir;
  const compgossip::SuiteReport report = compgossip::run_suite(suite);
  for (const auto& file : report.files) std::cout << file << "\n";
  for (const auto& failure : report.failures) std::cerr << "failed: " << failure << "\n";
  return report.ok() ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressed gossip and decentralized SGD simulator"};
  app.require_subcommand(1);

  RunCommand consensus{ExperimentMode::kConsensus, {}, {}, {}};
  RunCommand optimize{ExperimentMode::kOptimize, {}, {}, {}};
  RunCommand sweep{ExperimentMode::kSweep, {}, {}, {}};
  add_run_command(app, "consensus", "Average consensus with exact, Q1, Q2 or Choco gossip", consensus);
  add_run_command(app, "optimize", "Decentralized SGD with exact or Choco averaging", optimize);
  add_run_command(app, "sweep", "Grid search over the practical stepsize (a, b)", sweep);

  std::string check_kind = "all";
  std::uint64_t check_seed = 1;
  std::string check_out;
  CLI::App* check = app.add_subcommand("check", "Runtime checks of the convergence bounds");
  check->add_option("kind", check_kind, "thm1|thm2|mixing_lemma|omega_contract|remark1|all");
  check->add_option("--seed", check_seed);
  check->add_option("--out", check_out, "CSV output path");

  std::string suite_path;
  std::string suite_output;
  CLI::App* suite = app.add_subcommand("suite", "Run every experiment of a suite file");
  suite->add_option("--config", suite_path)->required();
  suite->add_option("--output-dir", suite_output, "overrides output_dir of the file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (app.got_subcommand("check")) return run_check(check_kind, check_seed, check_out);
    if (app.got_subcommand("suite")) return run_suite_command(suite_path, suite_output);
    if (app.got_subcommand("consensus")) return run_single(consensus);
    if (app.got_subcommand("optimize")) return run_single(optimize);
    return run_single(sweep);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
