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

#include "compgossip/theory_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "compgossip/compression.hpp"
#include "compgossip/consensus.hpp"
#include "compgossip/harness.hpp"
#include "compgossip/objectives.hpp"
#include "compgossip/optimize.hpp"
#include "compgossip/rng.hpp"
#include "compgossip/topology.hpp"

namespace compgossip {

namespace {

constexpr double kAbsoluteSlack = 1e-9;

CheckLine line(CheckKind kind, std::string name, double value, double bound) {
  return CheckLine{to_string(kind), std::move(name), value, bound, value <= bound};
}

std::shared_ptr<const GossipMatrix> shared_matrix(const TopologyKind& kind) {
  return std::make_shared<const GossipMatrix>(build_gossip_matrix(kind));
}

void check_thm1(std::uint64_t seed, CheckReport& report) {
  auto matrix = shared_matrix(Ring{16});
  const Eigen::MatrixXd initial = gaussian_initial(32, 16, seed);
  for (double gamma : {0.5, 1.0}) {
    ConsensusConfig config;
    config.scheme = GossipScheme::kExact;
    config.gamma = gamma;
    config.matrix = matrix;
    config.max_iters = 501;
    config.seed = seed;
    const ConsensusRun run = run_consensus(config, initial);
    const double e0 = run.records.front().value;
    const double factor = (1.0 - gamma * matrix->delta()) * (1.0 - gamma * matrix->delta());
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& rec : run.records) {
      worst = std::max(worst, rec.value - std::pow(factor, static_cast<double>(rec.iter)) * e0);
    }
    report.lines.push_back(line(CheckKind::kThm1, "ring16_d32_gamma" + format_float(gamma), worst, kAbsoluteSlack));
  }
}

void check_thm2(std::uint64_t seed, CheckReport& report) {
  auto matrix = shared_matrix(Ring{8});
  const std::size_t d = 16;
  const Eigen::MatrixXd initial = gaussian_initial(d, 8, seed);

  {
    CompressionSpec top;
    top.kind = CompressionKind::kTopK;
    top.k_fraction = 0.1;
    top = top.resolved(d);
    ConsensusConfig config;
    config.scheme = GossipScheme::kChoco;
    config.compression = top;
    config.matrix = matrix;
    config.max_iters = 5001;
    config.seed = seed;
    const ConsensusRun run = run_consensus(config, initial);
    const double rate = 1.0 - choco_rate(matrix->delta(), omega(top, d));
    const double e0 = run.records.front().spread;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& rec : run.records) {
      worst = std::max(worst, rec.spread - std::pow(rate, static_cast<double>(rec.iter)) * e0);
    }
    report.lines.push_back(line(CheckKind::kThm2, "ring8_d16_top_k2", worst, kAbsoluteSlack));
  }

  {
    const CompressionSpec randk = CompressionSpec::rand_k(4);
    const std::size_t repeats = 20;
    const std::uint64_t iters = 2001;
    std::vector<double> mean_e(iters, 0.0);
    for (std::size_t r = 0; r < repeats; ++r) {
      ConsensusConfig config;
      config.scheme = GossipScheme::kChoco;
      config.compression = randk;
      config.matrix = matrix;
      config.max_iters = iters;
      config.seed = seed + r;
      const ConsensusRun run = run_consensus(config, initial);
      for (const auto& rec : run.records) mean_e[rec.iter] += rec.spread / static_cast<double>(repeats);
    }
    const double rate = 1.0 - choco_rate(matrix->delta(), omega(randk, d));
    double worst = 0.0;
    for (std::uint64_t t = 0; t < iters; ++t) {
      worst = std::max(worst, mean_e[t] / (std::pow(rate, static_cast<double>(t)) * mean_e[0]));
    }
    report.lines.push_back(line(CheckKind::kThm2, "ring8_d16_rand_k4_mean20", worst, 1.2));
  }
}

void check_mixing(CheckReport& report) {
  std::vector<TopologyKind> kinds;
  for (std::size_t n = 4; n <= 16; ++n) kinds.emplace_back(Ring{n});
  kinds.emplace_back(Torus{3, 3});
  kinds.emplace_back(Torus{4, 4});
  kinds.emplace_back(FullyConnected{9});
  for (const auto& kind : kinds) {
    const GossipMatrix matrix = build_gossip_matrix(kind);
    double worst = -std::numeric_limits<double>::infinity();
    for (unsigned k = 0; k <= 50; ++k) {
      const double bound = std::pow(1.0 - matrix.delta(), static_cast<double>(k));
      worst = std::max(worst, mixing_contraction(matrix.weights(), k) - bound);
    }
    report.lines.push_back(line(CheckKind::kMixingLemma, describe(kind) + "_k50", worst, kAbsoluteSlack));
  }
}

void check_omega(std::uint64_t seed, CheckReport& report) {
  const std::size_t d = 20;
  Rng data_rng = derive_stream(seed, 0, 0, StreamTag::kCheck);
  Eigen::VectorXd x(d);
  for (std::size_t i = 0; i < d; ++i) x[i] = data_rng.normal();
  const double norm2 = x.squaredNorm();

  const std::size_t draws = 10000;
  const std::vector<std::pair<std::string, CompressionSpec>> random_ops = {
      {"rand_k5", CompressionSpec::rand_k(5)},
      {"qsgd4", CompressionSpec::qsgd(4)},
      {"qsgd256", CompressionSpec::qsgd(256)},
      {"rand_gossip0.3", CompressionSpec::rand_gossip(0.3)},
  };
  for (std::size_t op = 0; op < random_ops.size(); ++op) {
    const auto& [name, spec] = random_ops[op];
    Rng rng = derive_stream(seed, op + 1, 0, StreamTag::kCheck);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
      const double ratio = (compress(spec, x, rng).dense_value - x).squaredNorm() / norm2;
      sum += ratio;
      sum_sq += ratio * ratio;
    }
    const double mean = sum / static_cast<double>(draws);
    const double var = std::max(0.0, (sum_sq - sum * mean) / static_cast<double>(draws - 1));
    const double se = std::sqrt(var / static_cast<double>(draws));
    report.lines.push_back(line(CheckKind::kOmegaContract, name + "_mc10000", mean, 1.0 - omega(spec, d) + 4.0 * se));
  }

  const CompressionSpec top = CompressionSpec::top_k(5);
  Rng rng = derive_stream(seed, 0, 1, StreamTag::kCheck);
  Rng unused(0);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 1000; ++i) {
    Eigen::VectorXd v(d);
    for (std::size_t j = 0; j < d; ++j) v[j] = rng.normal();
    const double ratio = (compress(top, v, unused).dense_value - v).squaredNorm() / v.squaredNorm();
    worst = std::max(worst, ratio);
  }
  report.lines.push_back(line(CheckKind::kOmegaContract, "top_k5_per_sample", worst, 1.0 - omega(top, d) + 1e-12));
}

void check_remark1(std::uint64_t seed, CheckReport& report) {
  const std::size_t n = 9;
  auto data = std::make_shared<const Dataset>(synthetic_logistic(180, 10, 0.1, seed));
  const Objective objective = Objective::logistic(data, partition(*data, n, PartitionMode::kShuffled, seed));
  auto matrix = shared_matrix(Ring{n});
  const Schedule schedule = Schedule::practical(0.1, 10.0, static_cast<double>(objective.sample_count()));

  ExactAveraging plain(matrix, 1.0);
  ChocoAveraging choco(matrix, 1.0, CompressionSpec::identity(), seed);
  plain.reset(objective.dim(), n);
  choco.reset(objective.dim(), n);
  Eigen::MatrixXd x_plain = Eigen::MatrixXd::Zero(objective.dim(), n);
  Eigen::MatrixXd x_choco = x_plain;
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    sgd_round(x_plain, objective, schedule, plain, t, seed);
    sgd_round(x_choco, objective, schedule, choco, t, seed);
    worst = std::max(worst, (x_plain - x_choco).cwiseAbs().maxCoeff());
  }
  report.lines.push_back(line(CheckKind::kRemark1, "ring9_logistic_identity_200", worst, 1e-12));
}

}  // namespace

CheckKind parse_check_kind(const std::string& name) {
  if (name == "thm1") return CheckKind::kThm1;
  if (name == "thm2") return CheckKind::kThm2;
  if (name == "mixing_lemma") return CheckKind::kMixingLemma;
  if (name == "omega_contract") return CheckKind::kOmegaContract;
  if (name == "remark1") return CheckKind::kRemark1;
  if (name == "all") return CheckKind::kAll;
  throw std::invalid_argument("unknown check '" + name +
                              "' (expected thm1, thm2, mixing_lemma, omega_contract, remark1 or all)");
}

std::string to_string(CheckKind kind) {
  switch (kind) {
    case CheckKind::kThm1: return "thm1";
    case CheckKind::kThm2: return "thm2";
    case CheckKind::kMixingLemma: return "mixing_lemma";
    case CheckKind::kOmegaContract: return "omega_contract";
    case CheckKind::kRemark1: return "remark1";
    case CheckKind::kAll: return "all";
  }
  return "unknown";
}

bool CheckReport::ok() const {
  return !lines.empty() && std::all_of(lines.begin(), lines.end(), [](const CheckLine& l) { return l.pass; });
}

CheckReport theory_check(CheckKind kind, std::uint64_t seed) {
  CheckReport report;
  const bool all = kind == CheckKind::kAll;
  if (all || kind == CheckKind::kThm1) check_thm1(seed, report);
  if (all || kind == CheckKind::kThm2) check_thm2(seed, report);
  if (all || kind == CheckKind::kMixingLemma) check_mixing(report);
  if (all || kind == CheckKind::kOmegaContract) check_omega(seed, report);
  if (all || kind == CheckKind::kRemark1) check_remark1(seed, report);
  return report;
}

void write_check_lines(std::ostream& out, const CheckReport& report) {
  for (const auto& l : report.lines) {
    out << "check=" << l.check << " case=" << l.name << " status=" << (l.pass ? "pass" : "fail")
        << " value=" << format_float(l.value) << " bound=" << format_float(l.bound) << "\n";
  }
}

void write_check_csv(std::ostream& out, const CheckReport& report) {
  out << "check,case,status,value,bound\n";
  for (const auto& l : report.lines) {
    out << l.check << ',' << l.name << ',' << (l.pass ? "pass" : "fail") << ',' << format_float(l.value) << ','
        << format_float(l.bound) << "\n";
  }
}

}  // namespace compgossip
