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

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "compgossip/consensus.hpp"
#include "compgossip/objectives.hpp"
#include "compgossip/optimize.hpp"

namespace compgossip {

/// Invalid or unknown configuration; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat key = value settings of one section, in file order.
class Settings {
 public:
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Rejects every key outside `allowed`.
  void check_keys(const std::vector<std::string>& allowed, const std::string& where) const;

 private:
  std::map<std::string, std::string> values_;
};

enum class ExperimentMode { kConsensus, kOptimize, kSweep };

struct ExperimentConfig {
  std::string label;
  ExperimentMode mode = ExperimentMode::kConsensus;
  Settings settings;
  std::vector<std::uint64_t> seeds;  // one run per seed
};

struct SuiteConfig {
  std::string output_dir = ".";
  std::vector<ExperimentConfig> experiments;
};

/// Parses the sectioned key/value format:
///
///   [suite]
///   output_dir = results
///
///   [experiment ring_choco]
///   mode = consensus
///   topology = ring
///   ...
///
/// '#' starts a comment. Unknown sections and keys throw ConfigError.
SuiteConfig parse_suite(const std::string& text);
SuiteConfig load_suite(const std::string& path);

/// Flat "key = value" lines without sections, as read by the single-run
/// CLI commands. Duplicate keys throw ConfigError.
Settings parse_settings(const std::string& text);
Settings load_settings(const std::string& path);

/// Every key accepted by an experiment of `mode`.
std::vector<std::string> allowed_keys(ExperimentMode mode);

/// Validates keys for `mode` and derives the seed list (seeds, or
/// repeats consecutive seeds starting at seed).
ExperimentConfig make_experiment(const std::string& label, const Settings& settings);

TopologyKind topology_from(const Settings& settings);
CompressionSpec compression_from(const Settings& settings, std::size_t d);

struct ConsensusSetup {
  ConsensusConfig config;
  Eigen::MatrixXd initial;
};
ConsensusSetup consensus_from(const Settings& settings, std::uint64_t seed);

/// Objective and its reference optimum; depends only on the data keys, so
/// it is built once per experiment and shared by all seeds.
struct Problem {
  std::shared_ptr<const Objective> objective;
  ReferenceSolution reference;
  SmoothnessConstants constants;
};
Problem problem_from(const Settings& settings);

struct OptimizeSetup {
  SgdConfig config;
  Eigen::MatrixXd initial;
};
OptimizeSetup optimize_from(const Settings& settings, const Problem& problem, std::uint64_t seed);

/// "3", "0.1d", "d", "100d" -> value (multiples of d).
double parse_scaled(const std::string& text, std::size_t d);

std::string to_string(ExperimentMode mode);

}  // namespace compgossip
