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
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "compgossip/compression.hpp"
#include "compgossip/metrics.hpp"
#include "compgossip/objectives.hpp"
#include "compgossip/topology.hpp"

namespace compgossip {

/// SGD stepsize eta_t, either 4 / (mu (a + t)) or m a / (t + b).
struct Schedule {
  enum class Kind { kTheoretical, kPractical };

  Kind kind = Kind::kPractical;
  double mu = 1.0;
  double a = 1.0;
  double b = 1.0;
  double m = 1.0;

  static Schedule theoretical(double mu, double a);
  static Schedule practical(double a, double b, double m);

  double eta(std::uint64_t t) const;
  // Offset of the averaging weights w_t = (offset + t)^2.
  double weight_offset() const { return kind == Kind::kTheoretical ? a : b; }
};

struct TheoreticalStepsize {
  double a = 0.0;
  double eta = 0.0;
};

/// a = max(410 / (delta^2 omega), 16 L / mu) and eta_t = 4 / (mu (a + t)).
TheoreticalStepsize theoretical_stepsize(double mu, double L, double delta, double omega, std::uint64_t t);

/// Same for a generic averaging scheme with contraction p: a = max(5 / p, 16 L / mu).
TheoreticalStepsize theoretical_stepsize_for_contraction(double mu, double L, double p, std::uint64_t t);

/// Psi(X, Y) = ||X - Xbar||_F^2 + ||X - Y||_F^2.
double lyapunov(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

/// Blackbox averaging h(X, Y) -> (X+, Y+). The scheme owns Y; `apply`
/// replaces X (the half-step iterates) by X+ in place.
class AveragingScheme {
 public:
  virtual ~AveragingScheme() = default;

  virtual void reset(std::size_t d, std::size_t n) = 0;
  /// Returns the bits sent during this round.
  virtual std::uint64_t apply(Eigen::MatrixXd& x, std::uint64_t round) = 0;
  /// Linear convergence parameter p in (0, 1].
  virtual double contraction() const = 0;
  /// Current Y (the public estimates; X itself for exact averaging).
  virtual const Eigen::MatrixXd& estimate() const = 0;
};

/// X+ = X + gamma X (W - I), Y+ = X+; p = gamma delta.
class ExactAveraging final : public AveragingScheme {
 public:
  ExactAveraging(std::shared_ptr<const GossipMatrix> matrix, double gamma = 1.0, unsigned value_bits = 32);

  void reset(std::size_t d, std::size_t n) override;
  std::uint64_t apply(Eigen::MatrixXd& x, std::uint64_t round) override;
  double contraction() const override;
  const Eigen::MatrixXd& estimate() const override { return estimate_; }

 private:
  std::shared_ptr<const GossipMatrix> matrix_;
  double gamma_;
  unsigned value_bits_;
  Eigen::MatrixXd estimate_;
};

/// Memory-efficient compressed gossip on the half-steps:
/// q_i = Q(x_i - x_hat_i), x_hat_i += q_i, s_i += sum_j w_ij q_j,
/// x_i += gamma (s_i - x_hat_i). p = delta^2 omega / 82.
class ChocoAveraging final : public AveragingScheme {
 public:
  ChocoAveraging(std::shared_ptr<const GossipMatrix> matrix, double gamma, CompressionSpec compression,
                 std::uint64_t seed);

  void reset(std::size_t d, std::size_t n) override;
  std::uint64_t apply(Eigen::MatrixXd& x, std::uint64_t round) override;
  double contraction() const override;
  const Eigen::MatrixXd& estimate() const override { return x_hat_; }
  const Eigen::MatrixXd& neighbor_sum() const { return s_; }
  double gamma() const { return gamma_; }

 private:
  std::shared_ptr<const GossipMatrix> matrix_;
  double gamma_;
  CompressionSpec compression_;
  std::uint64_t seed_;
  std::size_t dim_ = 0;
  Eigen::MatrixXd x_hat_;
  Eigen::MatrixXd s_;
};

struct RoundInfo {
  std::uint64_t bits = 0;
  double max_gradient_norm = 0.0;
};

/// Stochastic gradient half-step on every node followed by the averaging
/// scheme. Throws DivergenceError on a non-finite iterate.
RoundInfo sgd_round(Eigen::MatrixXd& x, const Objective& objective, const Schedule& schedule,
                    AveragingScheme& averaging, std::uint64_t t, std::uint64_t seed);

/// Running weighted average of the mean iterate with w_t = (offset + t)^2.
class AveragedIterate {
 public:
  explicit AveragedIterate(double offset = 0.0) : offset_(offset) {}

  void add(std::uint64_t t, const Eigen::VectorXd& mean_iterate);
  Eigen::VectorXd value() const { return weighted_sum_ / total_weight_; }
  double total_weight() const { return total_weight_; }
  std::uint64_t count() const { return count_; }

 private:
  double offset_;
  Eigen::VectorXd weighted_sum_;
  double total_weight_ = 0.0;
  std::uint64_t count_ = 0;
};

enum class AveragingKind { kExact, kChoco };

struct SgdConfig {
  Schedule schedule;
  AveragingKind averaging = AveragingKind::kExact;
  std::optional<double> gamma;  // unset: 1 for exact, choco_gamma for choco
  CompressionSpec compression;
  std::shared_ptr<const GossipMatrix> matrix;
  std::uint64_t iters = 100;
  std::uint64_t seed = 1;
  std::uint64_t eval_every = 1;
  bool strict_theory = false;  // reject a theoretical a below the required minimum
};

struct OptimizationRun {
  std::vector<MetricsRecord> records;  // last record is at iter = T
  Eigen::MatrixXd final_x;
  Eigen::VectorXd averaged_x;
  double averaged_subopt = 0.0;
  double total_weight = 0.0;
  double empirical_gradient_bound = 0.0;  // max ||grad F_i|| seen
  double gamma = 1.0;
};

std::unique_ptr<AveragingScheme> make_averaging(const SgdConfig& config, std::size_t d);

/// Runs decentralized SGD from `initial` (d x n) and records suboptimality
/// f(mean x) - f_star of the true node average at each evaluation point.
OptimizationRun run_optimization(const SgdConfig& config, const Objective& objective,
                                 const Eigen::MatrixXd& initial, double f_star);

}  // namespace compgossip
