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

#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "compgossip/config.hpp"
#include "compgossip/metrics.hpp"
#include "compgossip/objectives.hpp"
#include "compgossip/optimize.hpp"

namespace compgossip {

/// "%.17g" rendering used for every float in every CSV.
std::string format_float(double value);

void write_records_csv(std::ostream& out, std::span<const char* const> columns,
                       const std::vector<MetricsRecord>& records);
void write_records_csv(const std::string& path, std::span<const char* const> columns,
                       const std::vector<MetricsRecord>& records);

/// Mean and sample standard deviation per evaluation point, over the
/// iterations present in every run. Columns: iter, then <col>_mean,
/// <col>_std for every metric column.
void write_summary_csv(std::ostream& out, std::span<const char* const> columns,
                       const std::vector<std::vector<MetricsRecord>>& runs);

struct SuiteReport {
  std::vector<std::string> files;
  std::vector<std::string> failures;  // "<label> seed <s>: <reason>"
  bool ok() const { return failures.empty(); }
};

/// Runs every experiment for every seed, one CSV per (experiment, seed) plus
/// one summary CSV per experiment. A failing experiment does not stop the
/// others; it is reported in `failures`.
SuiteReport run_suite(const SuiteConfig& suite);

struct GridSpec {
  int a_exponent_min = -3;
  int a_exponent_max = 1;
  std::vector<std::string> b_grid = {"1", "0.1d", "d", "10d", "100d"};
  std::uint64_t budget_epochs = 10;
  std::uint64_t epoch_length = 0;  // 0: the objective's largest shard

  std::vector<double> a_values() const;
  std::vector<double> b_values(std::size_t d) const;
};

struct GridPoint {
  double a = 0.0;
  double b = 0.0;
  double final_subopt = 0.0;
  bool diverged = false;
  std::string note;
};

struct GridResult {
  double best_a = 0.0;
  double best_b = 0.0;
  double best_subopt = 0.0;
  std::vector<GridPoint> points;
};

/// Tunes the practical schedule eta_t = m a / (t + b): runs every (a, b) for
/// the epoch budget and keeps the smallest final suboptimality, ties going to
/// the smaller a, then the smaller b. Throws when every point diverged.
GridResult grid_search(const SgdConfig& base, const GridSpec& grid, const Objective& objective,
                       const Eigen::MatrixXd& initial, double f_star);

/// Same protocol on explicit value lists.
GridResult grid_search(const SgdConfig& base, const std::vector<double>& a_values,
                       const std::vector<double>& b_values, std::uint64_t iters, const Objective& objective,
                       const Eigen::MatrixXd& initial, double f_star);

GridSpec grid_from(const Settings& settings);

void write_grid_csv(std::ostream& out, const GridResult& result);

/// Consensus stepsize tuning: the gamma from `candidates` reaching `target`
/// in the fewest iterations (ties: the larger gamma).
struct GammaChoice {
  double gamma = 0.0;
  std::uint64_t iterations = 0;
};
std::optional<GammaChoice> tune_gamma(const ConsensusConfig& base, const Eigen::MatrixXd& initial,
                                      const std::vector<double>& candidates, double target);

}  // namespace compgossip
