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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "compgossip/compression.hpp"
#include "compgossip/consensus.hpp"
#include "compgossip/harness.hpp"
#include "compgossip/objectives.hpp"
#include "compgossip/optimize.hpp"
#include "compgossip/theory_check.hpp"
#include "compgossip/topology.hpp"

#ifndef COMPGOSSIP_CLI
#error "COMPGOSSIP_CLI must name the command line binary"
#endif

using namespace compgossip;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, pattern, value);
  return buffer;
}

std::shared_ptr<const GossipMatrix> shared(const TopologyKind& topology) {
  return std::make_shared<const GossipMatrix>(build_gossip_matrix(topology));
}

Outcome from_check(CheckKind kind) {
  const CheckReport report = theory_check(kind);
  Outcome out{report.ok(), ""};
  for (const auto& line : report.lines) {
    if (!out.detail.empty()) out.detail += "; ";
    out.detail += line.name + " " + fmt("%.3g", line.value) + "<=" + fmt("%.3g", line.bound);
  }
  return out;
}

double relative_drift(const ConsensusRun& run, const Eigen::MatrixXd& initial) {
  const double scale = initial.rowwise().mean().norm();
  double worst = 0.0;
  for (const auto& rec : run.records) worst = std::max(worst, rec.aux / scale);
  return worst;
}

Outcome average_preservation() {
  auto matrix = shared(Ring{6});
  Eigen::MatrixXd initial = gaussian_initial(10, 6, 4);
  initial.array() += 1.0;
  const auto unbiased = CompressionSpec::rand_k(5, true);

  ConsensusConfig config;
  config.matrix = matrix;
  config.max_iters = 1000;
  config.scheme = GossipScheme::kExact;
  const double exact = relative_drift(run_consensus(config, initial), initial);

  config.scheme = GossipScheme::kQ2;
  config.compression = unbiased;
  config.gamma = 0.2;
  const double q2 = relative_drift(run_consensus(config, initial), initial);

  config.scheme = GossipScheme::kChoco;
  config.compression = CompressionSpec::top_k(2);
  config.gamma.reset();
  const double choco = relative_drift(run_consensus(config, initial), initial);

  config.scheme = GossipScheme::kQ1;
  config.compression = unbiased;
  config.gamma = 0.2;
  config.max_iters = 101;
  const ConsensusRun q1 = run_consensus(config, initial);
  const double q1_drift = q1.records.back().aux / initial.rowwise().mean().norm();

  const bool pass = exact <= 1e-10 && q2 <= 1e-10 && choco <= 1e-10 && q1_drift >= 1e-6;
  return {pass, "exact " + fmt("%.2g", exact) + " q2 " + fmt("%.2g", q2) + " choco " + fmt("%.2g", choco) +
                    " q1@100 " + fmt("%.2g", q1_drift)};
}

const std::vector<double> kGammaGrid = {1.0, 0.9, 0.8, 0.6, 0.5, 0.4, 0.2, 0.1, 0.05, 0.02, 0.01};

Outcome qsgd_replica() {
  auto matrix = shared(Ring{9});
  const Eigen::MatrixXd initial = gaussian_initial(200, 9, 1);
  ConsensusConfig config;
  config.matrix = matrix;
  config.max_iters = 3000;

  const auto exact = tune_gamma(config, initial, kGammaGrid, 1e-10);
  config.scheme = GossipScheme::kChoco;
  config.compression = CompressionSpec::qsgd(256);
  const auto choco = tune_gamma(config, initial, kGammaGrid, 1e-10);
  if (!exact || !choco) return {false, "a scheme never reached 1e-10"};

  double plateau = std::numeric_limits<double>::infinity();
  for (auto scheme : {GossipScheme::kQ1, GossipScheme::kQ2}) {
    for (double gamma : {1.0, 0.5, 0.1}) {
      ConsensusConfig classic = config;
      classic.scheme = scheme;
      classic.compression = CompressionSpec::qsgd(256, true);
      classic.gamma = gamma;
      classic.eval_every = 10;
      for (const auto& rec : run_consensus(classic, initial).records) plateau = std::min(plateau, rec.value);
    }
  }
  const bool pass = choco->iterations <= 2 * exact->iterations && plateau > 1e-6;
  return {pass, "exact " + std::to_string(exact->iterations) + " it, choco " + std::to_string(choco->iterations) +
                    " it (gamma " + fmt("%g", choco->gamma) + "), q1/q2 floor " + fmt("%.3g", plateau)};
}

Outcome rand_k_replica() {
  auto matrix = shared(Ring{9});
  const std::size_t d = 200;
  const Eigen::MatrixXd initial = gaussian_initial(d, 9, 1);
  const CompressionSpec randk = CompressionSpec::rand_k(10);
  const double w = omega(randk, d);

  ConsensusConfig config;
  config.matrix = matrix;
  config.max_iters = 20000;
  const auto exact = tune_gamma(config, initial, kGammaGrid, 1e-6);
  config.scheme = GossipScheme::kChoco;
  config.compression = randk;
  const auto choco = tune_gamma(config, initial, kGammaGrid, 1e-6);
  if (!exact || !choco) return {false, "a scheme never reached 1e-6"};

  auto bits_to_target = [&](GossipScheme scheme, double gamma) {
    ConsensusConfig run = config;
    run.scheme = scheme;
    run.gamma = gamma;
    run.target_error = 1e-6;
    return static_cast<double>(run_consensus(run, initial).records.back().bits);
  };
  const double exact_bits = bits_to_target(GossipScheme::kExact, exact->gamma);
  const double choco_bits = bits_to_target(GossipScheme::kChoco, choco->gamma);

  const double ratio = static_cast<double>(choco->iterations) / static_cast<double>(exact->iterations);
  const double bits_ratio = choco_bits / exact_bits;
  const bool pass = ratio >= 0.3 / w && ratio <= 3.0 / w && bits_ratio <= 3.0 && bits_ratio >= 1.0 / 3.0;
  return {pass, "omega " + fmt("%g", w) + ", iteration ratio " + fmt("%.4g", ratio) + " in [" + fmt("%g", 0.3 / w) +
                    ", " + fmt("%g", 3.0 / w) + "], bits ratio " + fmt("%.3g", bits_ratio) + ", choco gamma " +
                    fmt("%g", choco->gamma)};
}

Outcome centralized_equivalence() {
  const std::size_t n = 9;
  const std::size_t d = 7;
  const std::uint64_t seed = 3;
  auto data = std::make_shared<const Dataset>(synthetic_logistic(180, d, 0.1, 5));
  const Objective objective = Objective::logistic(data, partition(*data, n, PartitionMode::kShuffled, 6));
  const Schedule schedule = Schedule::practical(0.1, 20.0, 180.0);

  ExactAveraging plain(shared(FullyConnected{n}), 1.0);
  plain.reset(d, n);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(d, n);
  Eigen::VectorXd oracle = Eigen::VectorXd::Zero(d);
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    sgd_round(x, objective, schedule, plain, t, seed);
    Eigen::VectorXd batch = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng = derive_stream(seed, i, t, StreamTag::kGradient);
      batch += objective.stochastic_gradient(i, oracle, rng);
    }
    oracle -= schedule.eta(t) * batch / static_cast<double>(n);
    worst = std::max(worst, (x.colwise() - oracle).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-12, "max deviation " + fmt("%.3g", worst) + " over 200 rounds"};
}

Outcome n_scaling() {
  const std::size_t d = 10;
  double mean[2] = {0.0, 0.0};
  const std::size_t sizes[2] = {4, 16};
  for (int k = 0; k < 2; ++k) {
    const std::size_t n = sizes[k];
    SgdConfig config;
    config.matrix = shared(FullyConnected{n});
    config.schedule = Schedule::practical(1.0, 1.0, 1.0);
    config.iters = 5000;
    config.eval_every = 5000;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const Objective objective = Objective::quadratic(gaussian_initial(d, n, 1000 + seed), 1.0);
      config.seed = seed;
      const double f_star = solve_reference(objective).value;
      mean[k] += run_optimization(config, objective, Eigen::MatrixXd::Zero(d, n), f_star).records.back().value / 10.0;
    }
  }
  const double factor = mean[0] / mean[1];
  return {factor >= 2.5 && factor <= 6.0, "n=4 " + fmt("%.3g", mean[0]) + ", n=16 " + fmt("%.3g", mean[1]) +
                                              ", factor " + fmt("%.3g", factor)};
}

Outcome logistic_top_k() {
  const std::size_t n = 9;
  const std::size_t d = 50;
  const std::size_t m = 1800;
  auto data = std::make_shared<const Dataset>(synthetic_logistic(m, d, 0.05, 7));
  const Objective objective = Objective::logistic(data, partition(*data, n, PartitionMode::kSorted, 1));
  const double f_star = solve_reference(objective).value;
  const Eigen::MatrixXd initial = Eigen::MatrixXd::Zero(d, n);

  SgdConfig config;
  config.matrix = shared(Ring{n});
  config.schedule = Schedule::practical(1.0, static_cast<double>(d), static_cast<double>(m));
  config.iters = 5000;
  config.eval_every = 5000;
  config.seed = 3;
  const MetricsRecord plain = run_optimization(config, objective, initial, f_star).records.back();

  config.averaging = AveragingKind::kChoco;
  config.compression = CompressionSpec::top_k(static_cast<std::size_t>(std::ceil(0.1 * d)));
  std::optional<MetricsRecord> best;
  double best_gamma = 0.0;
  for (double gamma : {0.5, 0.2, 0.1, 0.05}) {
    config.gamma = gamma;
    try {
      const MetricsRecord rec = run_optimization(config, objective, initial, f_star).records.back();
      if (std::isfinite(rec.value) && (!best || rec.value < best->value)) {
        best = rec;
        best_gamma = gamma;
      }
    } catch (const DivergenceError&) {
    }
  }
  if (!best) return {false, "choco diverged for every gamma"};
  const double subopt_ratio = best->value / plain.value;
  const double bits_ratio = static_cast<double>(best->bits) / static_cast<double>(plain.bits);
  return {subopt_ratio <= 2.0 && bits_ratio <= 0.15,
          "plain " + fmt("%.4g", plain.value) + ", choco " + fmt("%.4g", best->value) + " (gamma " +
              fmt("%g", best_gamma) + "), ratio " + fmt("%.3g", subopt_ratio) + ", bits " + fmt("%.3g", bits_ratio)};
}

double finite_difference_error(const std::function<double(const Eigen::VectorXd&)>& f,
                               const Eigen::VectorXd& gradient, const Eigen::VectorXd& x) {
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd plus = x;
    Eigen::VectorXd minus = x;
    plus[k] += h;
    minus[k] -= h;
    worst = std::max(worst, std::abs((f(plus) - f(minus)) / (2.0 * h) - gradient[k]));
  }
  return worst;
}

Outcome gradient_correctness() {
  const std::size_t n = 4;
  const std::size_t d = 8;
  auto data = std::make_shared<const Dataset>(synthetic_logistic(120, d, 0.1, 9));
  const Objective logistic = Objective::logistic(data, partition(*data, n, PartitionMode::kShuffled, 2));
  const Objective quadratic = Objective::quadratic(gaussian_initial(d, n, 3));
  Rng rng(2026);
  double worst = 0.0;
  for (int point = 0; point < 10; ++point) {
    Eigen::VectorXd x(d);
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = rng.normal();
    for (const Objective* obj : {&logistic, &quadratic}) {
      worst = std::max(worst, finite_difference_error([&](const Eigen::VectorXd& y) { return obj->full_objective(y); },
                                                      obj->full_gradient(x), x));
      for (std::size_t i = 0; i < n; ++i) {
        worst = std::max(worst,
                         finite_difference_error([&](const Eigen::VectorXd& y) { return obj->local_objective(i, y); },
                                                 obj->local_full_gradient(i, x), x));
      }
    }
  }
  return {worst <= 1e-6, "max abs error " + fmt("%.3g", worst)};
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Outcome determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "compgossip_acceptance";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::string cli = COMPGOSSIP_CLI;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"check", "check all"},
      {"consensus", "consensus --scheme choco --topology torus --n 9 --d 20 --compression rand_k --k 4 "
                    "--gamma 0.1 --iters 300 --eval-every 10 --seed 5"},
      {"optimize", "optimize --objective logistic --synthetic-m 300 --d 10 --partition shuffled --n 9 "
                   "--averaging choco --compression qsgd --levels 16 --iters 400 --eval-every 50 --seed 8"},
  };
  std::string detail;
  bool pass = true;
  for (const auto& [name, args] : commands) {
    std::string outputs[2];
    for (int run = 0; run < 2; ++run) {
      const auto file = dir / (name + std::to_string(run) + ".csv");
      const std::string command = "\"" + cli + "\" " + args + " --out \"" + file.string() + "\" >/dev/null 2>&1";
      if (std::system(command.c_str()) != 0) {
        pass = false;
        detail += name + " exited nonzero; ";
      }
      outputs[run] = slurp(file);
    }
    const bool same = !outputs[0].empty() && outputs[0] == outputs[1];
    pass = pass && same;
    detail += name + (same ? " identical (" + std::to_string(outputs[0].size()) + " bytes)" : " DIFFERS") + "; ";
  }
  std::filesystem::remove_all(dir);
  return {pass, detail.substr(0, detail.size() - 2)};
}

struct Criterion {
  int id;
  std::string name;
  double time_limit;  // seconds; 0 = none
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "exact gossip linear rate bound", 1.0, [] { return from_check(CheckKind::kThm1); }},
      {2, "choco gossip linear rate bound", 5.0, [] { return from_check(CheckKind::kThm2); }},
      {3, "average preservation", 0.0, average_preservation},
      {4, "qsgd256 consensus replica", 10.0, qsgd_replica},
      {5, "rand_k consensus replica", 30.0, rand_k_replica},
      {6, "compression contraction monte carlo", 5.0, [] { return from_check(CheckKind::kOmegaContract); }},
      {7, "mixing lemma", 0.0, [] { return from_check(CheckKind::kMixingLemma); }},
      {8, "identity choco-sgd equals plain sgd", 0.0, [] { return from_check(CheckKind::kRemark1); }},
      {9, "complete graph equals mini-batch sgd", 0.0, centralized_equivalence},
      {10, "sgd node-count scaling", 30.0, n_scaling},
      {11, "synthetic logistic top_k replica", 60.0, logistic_top_k},
      {12, "gradient finite differences", 0.0, gradient_correctness},
      {13, "determinism across executions", 0.0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit > 0.0 && seconds >= c.time_limit) {
      outcome.pass = false;
      outcome.detail += "; over the " + fmt("%g", c.time_limit) + " s limit";
    }
    if (!outcome.pass) ++failures;
    std::printf("%s criterion %d: %s [%.2fs] %s\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), seconds,
                outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
