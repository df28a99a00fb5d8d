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

#include "compgossip/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace compgossip {

namespace {

const std::vector<std::string> kCommonKeys = {
    "mode", "topology", "n", "torus_rows", "torus_cols", "edges_file", "compression", "k",
    "k_fraction", "levels", "probability", "tau", "inner", "value_bits", "index_cost", "gamma",
    "iters", "seed", "seeds", "repeats", "eval_every"};
const std::vector<std::string> kConsensusKeys = {"scheme", "d", "init", "init_file", "target_error",
                                                 "check_invariants"};
const std::vector<std::string> kOptimizeKeys = {
    "objective", "d", "data_path", "synthetic_m", "flip_probability", "data_seed", "partition",
    "noise_sigma", "schedule", "a", "b", "m", "averaging", "fstar_tol", "strict_theory", "init"};
const std::vector<std::string> kSweepKeys = {"a_exponent_min", "a_exponent_max", "b_grid",
                                             "budget_epochs", "epoch_length"};

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = text.find_last_not_of(" \t\r");
  return text.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_number(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v)) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t parse_count(const std::string& key, const std::string& text) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("config: key '" + key + "' expects a nonnegative integer, got '" + text + "'");
  }
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' is out of range: '" + text + "'");
  }
}

CompressionSpec named_compression(const std::string& name, const Settings& s, std::size_t d) {
  auto sparse_k = [&](CompressionSpec spec) {
    if (s.has("k")) spec.k = s.get_uint("k", 0);
    else if (s.has("k_fraction")) spec.k_fraction = s.get_double("k_fraction", 0.0);
    else throw ConfigError("config: compression '" + name + "' needs k or k_fraction");
    return spec;
  };
  if (name == "identity" || name == "none") return CompressionSpec::identity();
  if (name == "rand_k") return sparse_k(CompressionSpec::rand_k(0));
  if (name == "unbiased_rand_k") return sparse_k(CompressionSpec::rand_k(0, true));
  if (name == "top_k") return sparse_k(CompressionSpec::top_k(0));
  if (name == "qsgd" || name == "unbiased_qsgd") {
    if (!s.has("levels")) throw ConfigError("config: compression '" + name + "' needs levels");
    return CompressionSpec::qsgd(static_cast<unsigned>(s.get_uint("levels", 0)), name == "unbiased_qsgd");
  }
  if (name == "rand_gossip") return CompressionSpec::rand_gossip(s.get_double("probability", 1.0));
  if (name == "rescaled") {
    const std::string inner_name = s.get("inner", "");
    if (inner_name.empty() || inner_name == "rescaled") {
      throw ConfigError("config: compression 'rescaled' needs inner = unbiased_rand_k|unbiased_qsgd|identity");
    }
    CompressionSpec inner = named_compression(inner_name, s, d).resolved(d);
    double tau = 1.0;
    const std::string tau_text = s.get("tau", "auto");
    if (tau_text != "auto") {
      tau = parse_number("tau", tau_text);
    } else if (inner.kind == CompressionKind::kRandK) {
      tau = static_cast<double>(d) / static_cast<double>(inner.k);
    } else if (inner.kind == CompressionKind::kQsgd) {
      tau = qsgd_tau(inner.levels, d);
    }
    return CompressionSpec::rescaled(std::move(inner), tau);
  }
  throw ConfigError("config: unknown compression '" + name + "'");
}

}  // namespace

std::string Settings::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Settings::require(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: missing required key '" + key + "'");
  return it->second;
}

double Settings::get_double(const std::string& key, double fallback) const {
  return has(key) ? parse_number(key, get(key, "")) : fallback;
}

std::uint64_t Settings::get_uint(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? parse_count(key, get(key, "")) : fallback;
}

bool Settings::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get(key, "");
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: key '" + key + "' expects true/false, got '" + v + "'");
}

void Settings::check_keys(const std::vector<std::string>& allowed, const std::string& where) const {
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& [key, value] : values_) {
    if (!known.count(key)) throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

std::string to_string(ExperimentMode mode) {
  switch (mode) {
    case ExperimentMode::kConsensus: return "consensus";
    case ExperimentMode::kOptimize: return "optimize";
    case ExperimentMode::kSweep: return "sweep";
  }
  return "?";
}

std::vector<std::string> allowed_keys(ExperimentMode mode) {
  std::vector<std::string> keys = kCommonKeys;
  if (mode == ExperimentMode::kConsensus) {
    keys.insert(keys.end(), kConsensusKeys.begin(), kConsensusKeys.end());
  } else {
    keys.insert(keys.end(), kOptimizeKeys.begin(), kOptimizeKeys.end());
    if (mode == ExperimentMode::kSweep) keys.insert(keys.end(), kSweepKeys.begin(), kSweepKeys.end());
  }
  return keys;
}

ExperimentConfig make_experiment(const std::string& label, const Settings& settings) {
  ExperimentConfig exp;
  exp.label = label;
  exp.settings = settings;
  const std::string mode = settings.require("mode");
  std::vector<std::string> allowed = kCommonKeys;
  if (mode == "consensus") {
    exp.mode = ExperimentMode::kConsensus;
    allowed.insert(allowed.end(), kConsensusKeys.begin(), kConsensusKeys.end());
  } else if (mode == "optimize" || mode == "sweep") {
    exp.mode = mode == "optimize" ? ExperimentMode::kOptimize : ExperimentMode::kSweep;
    allowed.insert(allowed.end(), kOptimizeKeys.begin(), kOptimizeKeys.end());
    if (mode == "sweep") allowed.insert(allowed.end(), kSweepKeys.begin(), kSweepKeys.end());
  } else {
    throw ConfigError("config: experiment '" + label + "' has unknown mode '" + mode + "'");
  }
  settings.check_keys(allowed, "experiment '" + label + "'");

  if (settings.has("seeds")) {
    for (const auto& item : split_list(settings.get("seeds", ""))) exp.seeds.push_back(parse_count("seeds", item));
    if (settings.has("repeats") && settings.get_uint("repeats", 0) != exp.seeds.size()) {
      throw ConfigError("config: experiment '" + label + "' has repeats different from the seed list length");
    }
  } else {
    const std::uint64_t repeats = settings.get_uint("repeats", 1);
    const std::uint64_t first = settings.get_uint("seed", 1);
    for (std::uint64_t r = 0; r < repeats; ++r) exp.seeds.push_back(first + r);
  }
  if (exp.seeds.empty()) throw ConfigError("config: experiment '" + label + "' needs repeats >= 1");
  const std::set<std::uint64_t> distinct(exp.seeds.begin(), exp.seeds.end());
  if (distinct.size() != exp.seeds.size()) {
    throw ConfigError("config: experiment '" + label + "' repeats a seed");
  }
  return exp;
}

SuiteConfig parse_suite(const std::string& text) {
  SuiteConfig suite;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  enum class Section { kNone, kSuite, kExperiment } section = Section::kNone;
  std::string label;
  Settings settings;
  std::set<std::string> labels;

  auto flush = [&] {
    if (section == Section::kExperiment) suite.experiments.push_back(make_experiment(label, settings));
    settings = Settings{};
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config: " + where + ": unterminated section header");
      flush();
      std::istringstream header(line.substr(1, line.size() - 2));
      std::string kind;
      header >> kind;
      if (kind == "suite") {
        section = Section::kSuite;
      } else if (kind == "experiment") {
        section = Section::kExperiment;
        if (!(header >> label)) throw ConfigError("config: " + where + ": experiment section needs a label");
        if (!labels.insert(label).second) throw ConfigError("config: " + where + ": duplicate experiment '" + label + "'");
      } else {
        throw ConfigError("config: " + where + ": unknown section '" + kind + "'");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config: " + where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config: " + where + ": empty key");
    if (section == Section::kNone) throw ConfigError("config: " + where + ": key outside of a section");
    if (section == Section::kSuite) {
      if (key != "output_dir") throw ConfigError("config: unknown key '" + key + "' in [suite]");
      suite.output_dir = value;
    } else {
      if (settings.has(key)) throw ConfigError("config: " + where + ": duplicate key '" + key + "'");
      settings.set(key, value);
    }
  }
  flush();
  if (suite.experiments.empty()) throw ConfigError("config: no experiments");
  return suite;
}

Settings parse_settings(const std::string& text) {
  Settings settings;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config: " + where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config: " + where + ": empty key");
    if (settings.has(key)) throw ConfigError("config: " + where + ": duplicate key '" + key + "'");
    settings.set(key, trim(line.substr(eq + 1)));
  }
  return settings;
}

Settings load_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_settings(buffer.str());
}

SuiteConfig load_suite(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_suite(buffer.str());
}

TopologyKind topology_from(const Settings& s) {
  const std::string kind = s.get("topology", "ring");
  if (kind == "ring") return Ring{s.get_uint("n", 9)};
  if (kind == "full") return FullyConnected{s.get_uint("n", 9)};
  if (kind == "torus") {
    std::uint64_t rows = s.get_uint("torus_rows", 0);
    std::uint64_t cols = s.get_uint("torus_cols", 0);
    if (rows == 0 || cols == 0) {
      const std::uint64_t n = s.get_uint("n", 9);
      const auto side = static_cast<std::uint64_t>(std::llround(std::sqrt(static_cast<double>(n))));
      if (side * side != n) throw ConfigError("config: torus needs torus_rows/torus_cols or a square n");
      rows = cols = side;
    }
    return Torus{rows, cols};
  }
  if (kind == "custom") {
    try {
      return read_edge_list(s.require("edges_file"), s.get_uint("n", 0));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  throw ConfigError("config: unknown topology '" + kind + "'");
}

CompressionSpec compression_from(const Settings& s, std::size_t d) {
  CompressionSpec spec = named_compression(s.get("compression", "identity"), s, d);
  spec.value_bits = static_cast<unsigned>(s.get_uint("value_bits", 32));
  const std::string index_cost = s.get("index_cost", "ceil_log2");
  if (index_cost == "ceil_log2") spec.index_cost = IndexCost::kCeilLog2;
  else if (index_cost == "free") spec.index_cost = IndexCost::kFree;
  else throw ConfigError("config: unknown index_cost '" + index_cost + "'");
  if (spec.inner) {
    auto inner = *spec.inner;
    inner.value_bits = spec.value_bits;
    inner.index_cost = spec.index_cost;
    spec.inner = std::make_shared<const CompressionSpec>(inner);
  }
  try {
    spec = spec.resolved(d);
    validate(spec, d);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

double parse_scaled(const std::string& text, std::size_t d) {
  if (!text.empty() && text.back() == 'd') {
    const std::string factor = text.substr(0, text.size() - 1);
    return (factor.empty() ? 1.0 : parse_number("b", factor)) * static_cast<double>(d);
  }
  return parse_number("b", text);
}

namespace {

std::optional<double> gamma_from(const Settings& s) {
  const std::string text = s.get("gamma", "auto");
  if (text == "auto") return std::nullopt;
  const double gamma = parse_number("gamma", text);
  if (!(gamma > 0.0) || gamma > 1.0) throw ConfigError("config: gamma must lie in (0, 1]");
  return gamma;
}

std::shared_ptr<const GossipMatrix> matrix_from(const Settings& s) {
  try {
    return std::make_shared<const GossipMatrix>(build_gossip_matrix(topology_from(s)));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

ConsensusSetup consensus_from(const Settings& s, std::uint64_t seed) {
  ConsensusSetup setup;
  ConsensusConfig& config = setup.config;
  const std::string scheme = s.get("scheme", "choco");
  if (scheme == "exact") config.scheme = GossipScheme::kExact;
  else if (scheme == "q1") config.scheme = GossipScheme::kQ1;
  else if (scheme == "q2") config.scheme = GossipScheme::kQ2;
  else if (scheme == "choco") config.scheme = GossipScheme::kChoco;
  else throw ConfigError("config: unknown scheme '" + scheme + "'");

  config.matrix = matrix_from(s);
  const std::size_t n = config.matrix->n();
  const std::size_t d = s.get_uint("d", 100);
  if (d == 0) throw ConfigError("config: d must be positive");
  config.compression = compression_from(s, d);
  config.gamma = gamma_from(s);
  config.max_iters = s.get_uint("iters", 1000);
  config.seed = seed;
  config.eval_every = s.get_uint("eval_every", 1);
  if (config.eval_every == 0) throw ConfigError("config: eval_every must be >= 1");
  if (s.has("target_error")) config.target_error = s.get_double("target_error", 0.0);
  config.check_invariants = s.get_bool("check_invariants", false);

  if ((config.scheme == GossipScheme::kQ1 || config.scheme == GossipScheme::kQ2) &&
      !is_unbiased(config.compression)) {
    throw ConfigError("config: scheme '" + scheme + "' needs an unbiased compression (identity, "
                      "unbiased_rand_k or unbiased_qsgd), got " + describe(config.compression));
  }
  if (config.scheme == GossipScheme::kChoco && !config.gamma) {
    try {
      (void)omega(config.compression, d);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: gamma = auto needs a contractive compression: ") + e.what());
    }
  }

  const std::string init = s.get("init", "gaussian");
  if (init == "gaussian") {
    setup.initial = gaussian_initial(d, n, seed);
  } else if (init == "file") {
    try {
      setup.initial = read_initial(s.require("init_file"), d, n);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else {
    throw ConfigError("config: unknown init '" + init + "'");
  }
  return setup;
}

Problem problem_from(const Settings& s) {
  Problem problem;
  const std::uint64_t data_seed = s.get_uint("data_seed", 1);
  const std::string objective = s.get("objective", "logistic");
  const auto matrix = matrix_from(s);
  const std::size_t n = matrix->n();
  try {
    if (objective == "quadratic") {
      const std::size_t d = s.get_uint("d", 10);
      problem.objective = std::make_shared<const Objective>(
          Objective::quadratic(gaussian_initial(d, n, data_seed), s.get_double("noise_sigma", 0.0)));
    } else if (objective == "logistic") {
      std::shared_ptr<const Dataset> data;
      if (s.has("data_path")) {
        std::optional<std::size_t> dim;
        if (s.has("d")) dim = s.get_uint("d", 0);
        data = std::make_shared<const Dataset>(load_libsvm(s.get("data_path", ""), dim));
      } else {
        data = std::make_shared<const Dataset>(synthetic_logistic(
            s.get_uint("synthetic_m", 1800), s.get_uint("d", 50), s.get_double("flip_probability", 0.1), data_seed));
      }
      const std::string mode = s.get("partition", "sorted");
      PartitionMode partition_mode = PartitionMode::kSorted;
      if (mode == "shuffled") partition_mode = PartitionMode::kShuffled;
      else if (mode != "sorted") throw ConfigError("config: unknown partition '" + mode + "'");
      problem.objective = std::make_shared<const Objective>(
          Objective::logistic(data, partition(*data, n, partition_mode, data_seed)));
    } else {
      throw ConfigError("config: unknown objective '" + objective + "'");
    }
    problem.reference = solve_reference(*problem.objective, s.get_double("fstar_tol", 1e-10));
    problem.constants = problem.objective->strong_convexity_constants();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return problem;
}

OptimizeSetup optimize_from(const Settings& s, const Problem& problem, std::uint64_t seed) {
  OptimizeSetup setup;
  SgdConfig& config = setup.config;
  const Objective& objective = *problem.objective;
  const std::size_t d = objective.dim();
  config.matrix = matrix_from(s);
  config.compression = compression_from(s, d);
  config.gamma = gamma_from(s);
  config.iters = s.get_uint("iters", 1000);
  config.seed = seed;
  config.eval_every = s.get_uint("eval_every", 1);
  if (config.eval_every == 0) throw ConfigError("config: eval_every must be >= 1");
  config.strict_theory = s.get_bool("strict_theory", false);

  const std::string averaging = s.get("averaging", "choco");
  if (averaging == "exact" || averaging == "plain") config.averaging = AveragingKind::kExact;
  else if (averaging == "choco") config.averaging = AveragingKind::kChoco;
  else throw ConfigError("config: unknown averaging '" + averaging + "'");

  const std::string schedule = s.get("schedule", "practical");
  if (schedule == "practical") {
    config.schedule = Schedule::practical(s.get_double("a", 1.0), parse_scaled(s.get("b", "d"), d),
                                          s.get_double("m", static_cast<double>(objective.sample_count())));
  } else if (schedule == "theoretical") {
    double a = 0.0;
    if (s.get("a", "auto") == "auto") {
      double p = 1.0;
      if (config.matrix->n() > 1) {
        p = config.averaging == AveragingKind::kExact
                ? config.gamma.value_or(1.0) * config.matrix->delta()
                : choco_rate(config.matrix->delta(), omega(config.compression, d));
      }
      a = theoretical_stepsize_for_contraction(problem.constants.mu, problem.constants.L, p, 0).a;
    } else {
      a = s.get_double("a", 0.0);
    }
    config.schedule = Schedule::theoretical(problem.constants.mu, a);
  } else {
    throw ConfigError("config: unknown schedule '" + schedule + "'");
  }

  const std::string init = s.get("init", "zero");
  if (init == "zero") {
    setup.initial = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(objective.nodes()));
  } else if (init == "gaussian") {
    setup.initial = gaussian_initial(d, objective.nodes(), seed);
  } else {
    throw ConfigError("config: unknown init '" + init + "' for optimize");
  }
  return setup;
}

}  // namespace compgossip
