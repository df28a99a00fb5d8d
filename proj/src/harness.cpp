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

#include "compgossip/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <sstream>
#include <stdexcept>

#include "compgossip/consensus.hpp"
#include "compgossip/stats.hpp"

namespace compgossip {

std::string format_float(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

void write_records_csv(std::ostream& out, std::span<const char* const> columns,
                       const std::vector<MetricsRecord>& records) {
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << "\n";
  for (const auto& rec : records) {
    out << rec.iter << ',' << format_float(rec.value) << ',' << format_float(rec.spread) << ','
        << rec.bits << ',' << format_float(rec.aux) << "\n";
  }
}

void write_records_csv(const std::string& path, std::span<const char* const> columns,
                       const std::vector<MetricsRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_records_csv(out, columns, records);
}

void write_summary_csv(std::ostream& out, std::span<const char* const> columns,
                       const std::vector<std::vector<MetricsRecord>>& runs) {
  out << columns[0];
  for (std::size_t c = 1; c < columns.size(); ++c) out << ',' << columns[c] << "_mean," << columns[c] << "_std";
  out << "\n";
  if (runs.empty()) return;

  std::map<std::uint64_t, std::vector<const MetricsRecord*>> by_iter;
  for (const auto& run : runs) {
    for (const auto& rec : run) by_iter[rec.iter].push_back(&rec);
  }
  for (const auto& [iter, recs] : by_iter) {
    if (recs.size() != runs.size()) continue;
    std::vector<double> value, spread, bits, aux;
    for (const MetricsRecord* rec : recs) {
      value.push_back(rec->value);
      spread.push_back(rec->spread);
      bits.push_back(static_cast<double>(rec->bits));
      aux.push_back(rec->aux);
    }
    out << iter;
    for (const auto* column : {&value, &spread, &bits, &aux}) {
      const MeanStd ms = mean_std(*column);
      out << ',' << format_float(ms.mean) << ',' << format_float(ms.stddev);
    }
    out << "\n";
  }
}

std::vector<double> GridSpec::a_values() const {
  if (a_exponent_min > a_exponent_max) throw std::invalid_argument("grid: a exponent range is empty");
  std::vector<double> out;
  for (int e = a_exponent_min; e <= a_exponent_max; ++e) out.push_back(std::pow(10.0, e));
  return out;
}

std::vector<double> GridSpec::b_values(std::size_t d) const {
  if (b_grid.empty()) throw std::invalid_argument("grid: b grid is empty");
  std::vector<double> out;
  for (const auto& text : b_grid) out.push_back(parse_scaled(text, d));
  return out;
}

GridResult grid_search(const SgdConfig& base, const std::vector<double>& a_values,
                       const std::vector<double>& b_values, std::uint64_t iters, const Objective& objective,
                       const Eigen::MatrixXd& initial, double f_star) {
  if (a_values.empty() || b_values.empty()) throw std::invalid_argument("grid: empty grid");
  if (iters == 0) throw std::invalid_argument("grid: budget must be at least one iteration");
  std::vector<double> as = a_values;
  std::vector<double> bs = b_values;
  std::sort(as.begin(), as.end());
  std::sort(bs.begin(), bs.end());

  GridResult result;
  bool found = false;
  for (double a : as) {
    for (double b : bs) {
      GridPoint point{a, b, 0.0, false, ""};
      SgdConfig config = base;
      config.schedule = Schedule::practical(a, b, base.schedule.m);
      config.iters = iters;
      config.eval_every = iters;
      try {
        const OptimizationRun run = run_optimization(config, objective, initial, f_star);
        point.final_subopt = run.records.back().value;
        if (!std::isfinite(point.final_subopt)) {
          point.diverged = true;
          point.note = "non-finite suboptimality";
        }
      } catch (const DivergenceError& e) {
        point.diverged = true;
        point.note = e.what();
      }
      if (!point.diverged && (!found || point.final_subopt < result.best_subopt)) {
        found = true;
        result.best_a = a;
        result.best_b = b;
        result.best_subopt = point.final_subopt;
      }
      result.points.push_back(point);
    }
  }
  if (!found) {
    std::string listing;
    for (const auto& p : result.points) listing += " (a=" + format_float(p.a) + ", b=" + format_float(p.b) + ")";
    throw std::runtime_error("grid: every grid point diverged:" + listing);
  }
  return result;
}

GridResult grid_search(const SgdConfig& base, const GridSpec& grid, const Objective& objective,
                       const Eigen::MatrixXd& initial, double f_star) {
  if (grid.budget_epochs == 0) throw std::invalid_argument("grid: budget_epochs must be >= 1");
  const std::uint64_t epoch = grid.epoch_length ? grid.epoch_length : objective.epoch_length();
  return grid_search(base, grid.a_values(), grid.b_values(objective.dim()), grid.budget_epochs * epoch,
                     objective, initial, f_star);
}

GridSpec grid_from(const Settings& s) {
  GridSpec grid;
  grid.a_exponent_min = static_cast<int>(s.get_double("a_exponent_min", grid.a_exponent_min));
  grid.a_exponent_max = static_cast<int>(s.get_double("a_exponent_max", grid.a_exponent_max));
  if (s.has("b_grid")) {
    grid.b_grid.clear();
    std::string item;
    std::istringstream in(s.get("b_grid", ""));
    while (std::getline(in, item, ',')) {
      item.erase(0, item.find_first_not_of(' '));
      item.erase(item.find_last_not_of(' ') + 1);
      if (!item.empty()) grid.b_grid.push_back(item);
    }
  }
  grid.budget_epochs = s.get_uint("budget_epochs", grid.budget_epochs);
  grid.epoch_length = s.get_uint("epoch_length", 0);
  if (grid.a_exponent_min > grid.a_exponent_max) throw ConfigError("config: a_exponent_min > a_exponent_max");
  if (grid.b_grid.empty()) throw ConfigError("config: b_grid is empty");
  if (grid.budget_epochs == 0) throw ConfigError("config: budget_epochs must be >= 1");
  return grid;
}

void write_grid_csv(std::ostream& out, const GridResult& result) {
  out << "a,b,final_subopt,diverged\n";
  for (const auto& p : result.points) {
    out << format_float(p.a) << ',' << format_float(p.b) << ',' << format_float(p.final_subopt) << ','
        << (p.diverged ? 1 : 0) << "\n";
  }
}

std::optional<GammaChoice> tune_gamma(const ConsensusConfig& base, const Eigen::MatrixXd& initial,
                                      const std::vector<double>& candidates, double target) {
  std::optional<GammaChoice> best;
  std::vector<double> sorted = candidates;
  std::sort(sorted.rbegin(), sorted.rend());
  for (double gamma : sorted) {
    ConsensusConfig config = base;
    config.gamma = gamma;
    config.target_error = target;
    try {
      const ConsensusRun run = run_consensus(config, initial);
      const auto hit = iterations_to(run.records, target);
      if (hit && (!best || *hit < best->iterations)) best = GammaChoice{gamma, *hit};
    } catch (const DivergenceError&) {
      continue;
    }
  }
  return best;
}

namespace {

struct RunOutput {
  std::vector<MetricsRecord> records;
  GridResult grid;
};

RunOutput run_one(const ExperimentConfig& exp, const Problem* problem, std::uint64_t seed) {
  RunOutput out;
  if (exp.mode == ExperimentMode::kConsensus) {
    ConsensusSetup setup = consensus_from(exp.settings, seed);
    out.records = run_consensus(setup.config, setup.initial).records;
  } else {
    OptimizeSetup setup = optimize_from(exp.settings, *problem, seed);
    if (exp.mode == ExperimentMode::kOptimize) {
      out.records = run_optimization(setup.config, *problem->objective, setup.initial, problem->reference.value).records;
    } else {
      out.grid = grid_search(setup.config, grid_from(exp.settings), *problem->objective, setup.initial,
                             problem->reference.value);
    }
  }
  return out;
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

}  // namespace

SuiteReport run_suite(const SuiteConfig& suite) {
  SuiteReport report;
  std::filesystem::create_directories(suite.output_dir);
  for (const auto& exp : suite.experiments) {
    std::shared_ptr<const Problem> problem;
    if (exp.mode != ExperimentMode::kConsensus) {
      try {
        problem = std::make_shared<const Problem>(problem_from(exp.settings));
      } catch (const std::exception& e) {
        report.failures.push_back(exp.label + ": " + e.what());
        continue;
      }
    }
    // Repeats are independent; every run owns its state and output file.
    std::vector<std::future<RunOutput>> futures;
    for (std::uint64_t seed : exp.seeds) {
      futures.push_back(std::async(std::launch::async, run_one, std::cref(exp), problem.get(), seed));
    }
    std::vector<std::vector<MetricsRecord>> runs;
    std::vector<GridResult> grids;
    bool failed = false;
    for (std::size_t r = 0; r < futures.size(); ++r) {
      const std::uint64_t seed = exp.seeds[r];
      const std::string path = join_path(suite.output_dir, exp.label + "_seed" + std::to_string(seed) + ".csv");
      try {
        RunOutput out = futures[r].get();
        std::ofstream file(path, std::ios::binary);
        if (!file) throw std::runtime_error("cannot write '" + path + "'");
        if (exp.mode == ExperimentMode::kSweep) {
          write_grid_csv(file, out.grid);
          grids.push_back(std::move(out.grid));
        } else {
          write_records_csv(file, exp.mode == ExperimentMode::kConsensus ? std::span<const char* const>(kConsensusColumns)
                                                                         : std::span<const char* const>(kOptimizeColumns),
                            out.records);
          runs.push_back(std::move(out.records));
        }
        report.files.push_back(path);
      } catch (const std::exception& e) {
        failed = true;
        report.failures.push_back(exp.label + " seed " + std::to_string(seed) + ": " + e.what());
      }
    }
    if (failed) continue;

    const std::string summary_path = join_path(suite.output_dir, exp.label + "_summary.csv");
    std::ofstream summary(summary_path, std::ios::binary);
    if (!summary) {
      report.failures.push_back(exp.label + ": cannot write '" + summary_path + "'");
      continue;
    }
    if (exp.mode == ExperimentMode::kSweep) {
      summary << "a,b,final_subopt_mean,final_subopt_std,diverged_count\n";
      for (std::size_t p = 0; p < grids.front().points.size(); ++p) {
        std::vector<double> values;
        std::size_t diverged = 0;
        for (const auto& grid : grids) {
          if (grid.points[p].diverged) ++diverged;
          else values.push_back(grid.points[p].final_subopt);
        }
        const MeanStd ms = mean_std(values);
        summary << format_float(grids.front().points[p].a) << ',' << format_float(grids.front().points[p].b) << ','
                << format_float(ms.mean) << ',' << format_float(ms.stddev) << ',' << diverged << "\n";
      }
    } else {
      write_summary_csv(summary, exp.mode == ExperimentMode::kConsensus ? std::span<const char* const>(kConsensusColumns)
                                                                        : std::span<const char* const>(kOptimizeColumns),
                        runs);
    }
    report.files.push_back(summary_path);
  }
  return report;
}

}  // namespace compgossip
