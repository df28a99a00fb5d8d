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

#include "compgossip/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "compgossip/consensus.hpp"

namespace compgossip {

Schedule Schedule::theoretical(double mu, double a) {
  if (!(mu > 0.0) || !(a > 0.0)) throw std::invalid_argument("schedule: theoretical needs mu > 0 and a > 0");
  Schedule s;
  s.kind = Kind::kTheoretical;
  s.mu = mu;
  s.a = a;
  return s;
}

Schedule Schedule::practical(double a, double b, double m) {
  if (!(a > 0.0) || !(b > 0.0) || !(m > 0.0)) {
    throw std::invalid_argument("schedule: practical needs a, b, m > 0");
  }
  Schedule s;
  s.kind = Kind::kPractical;
  s.a = a;
  s.b = b;
  s.m = m;
  return s;
}

double Schedule::eta(std::uint64_t t) const {
  const double tt = static_cast<double>(t);
  if (kind == Kind::kTheoretical) return 4.0 / (mu * (a + tt));
  return m * a / (tt + b);
}

TheoreticalStepsize theoretical_stepsize_for_contraction(double mu, double L, double p, std::uint64_t t) {
  if (!(mu > 0.0) || !(L > 0.0) || !(p > 0.0)) {
    throw std::invalid_argument("theoretical_stepsize: mu, L and p must be positive");
  }
  TheoreticalStepsize out;
  out.a = std::max(5.0 / p, 16.0 * L / mu);
  out.eta = 4.0 / (mu * (out.a + static_cast<double>(t)));
  return out;
}

TheoreticalStepsize theoretical_stepsize(double mu, double L, double delta, double omega, std::uint64_t t) {
  if (!(mu > 0.0) || !(L > 0.0) || !(delta > 0.0) || !(omega > 0.0)) {
    throw std::invalid_argument("theoretical_stepsize: mu, L, delta and omega must be positive");
  }
  TheoreticalStepsize out;
  out.a = std::max(410.0 / (delta * delta * omega), 16.0 * L / mu);
  out.eta = 4.0 / (mu * (out.a + static_cast<double>(t)));
  return out;
}

double lyapunov(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  return consensus_error(x) + (x - y).squaredNorm();
}

ExactAveraging::ExactAveraging(std::shared_ptr<const GossipMatrix> matrix, double gamma, unsigned value_bits)
    : matrix_(std::move(matrix)), gamma_(gamma), value_bits_(value_bits) {
  if (!matrix_) throw std::invalid_argument("averaging: no gossip matrix");
  if (!(gamma_ > 0.0) || gamma_ > 1.0) throw std::invalid_argument("averaging: gamma must lie in (0, 1]");
}

void ExactAveraging::reset(std::size_t d, std::size_t n) {
  estimate_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
}

std::uint64_t ExactAveraging::apply(Eigen::MatrixXd& x, std::uint64_t /*round*/) {
  const Eigen::MatrixXd& w = matrix_->weights();
  if (gamma_ == 1.0) {
    x = x * w;
  } else {
    x += gamma_ * (x * w - x);
  }
  estimate_ = x;
  std::uint64_t bits = 0;
  const auto d = static_cast<std::uint64_t>(x.rows());
  for (std::size_t i = 0; i < matrix_->n(); ++i) bits += matrix_->degree(i) * d * value_bits_;
  return bits;
}

double ExactAveraging::contraction() const { return matrix_->n() == 1 ? 1.0 : gamma_ * matrix_->delta(); }

ChocoAveraging::ChocoAveraging(std::shared_ptr<const GossipMatrix> matrix, double gamma,
                               CompressionSpec compression, std::uint64_t seed)
    : matrix_(std::move(matrix)), gamma_(gamma), compression_(std::move(compression)), seed_(seed) {
  if (!matrix_) throw std::invalid_argument("averaging: no gossip matrix");
  if (!(gamma_ > 0.0) || gamma_ > 1.0) throw std::invalid_argument("averaging: gamma must lie in (0, 1]");
}

void ChocoAveraging::reset(std::size_t d, std::size_t n) {
  dim_ = d;
  compression_ = compression_.resolved(d);
  validate(compression_, d);
  x_hat_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  s_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
}

std::uint64_t ChocoAveraging::apply(Eigen::MatrixXd& x, std::uint64_t round) {
  if (static_cast<std::size_t>(x.rows()) != dim_ || x.cols() != x_hat_.cols()) {
    throw std::invalid_argument("averaging: iterate shape does not match reset()");
  }
  Eigen::MatrixXd q(x.rows(), x.cols());
  std::uint64_t bits = 0;
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    Rng rng = derive_stream(seed_, static_cast<std::uint64_t>(i), round, StreamTag::kCompression);
    CompressedMessage message = compress(compression_, x.col(i) - x_hat_.col(i), rng);
    q.col(i) = message.dense_value;
    bits += message.payload_bits * matrix_->degree(static_cast<std::size_t>(i));
  }
  x_hat_ += q;
  s_ += q * matrix_->weights();
  x += gamma_ * (s_ - x_hat_);
  return bits;
}

double ChocoAveraging::contraction() const {
  if (matrix_->n() == 1) return 1.0;
  return choco_rate(matrix_->delta(), omega(compression_, dim_));
}

RoundInfo sgd_round(Eigen::MatrixXd& x, const Objective& objective, const Schedule& schedule,
                    AveragingScheme& averaging, std::uint64_t t, std::uint64_t seed) {
  RoundInfo info;
  const double eta = schedule.eta(t);
  // All gradients are read from the entry iterates before any write.
  Eigen::MatrixXd gradients(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    Rng rng = derive_stream(seed, static_cast<std::uint64_t>(i), t, StreamTag::kGradient);
    gradients.col(i) = objective.stochastic_gradient(static_cast<std::size_t>(i), x.col(i), rng);
    info.max_gradient_norm = std::max(info.max_gradient_norm, gradients.col(i).norm());
  }
  x -= eta * gradients;
  info.bits = averaging.apply(x, t);
  if (!x.allFinite()) throw DivergenceError(t, "non-finite iterate after the averaging step");
  return info;
}

void AveragedIterate::add(std::uint64_t t, const Eigen::VectorXd& mean_iterate) {
  const double shifted = offset_ + static_cast<double>(t);
  const double weight = shifted * shifted;
  if (count_ == 0) weighted_sum_ = Eigen::VectorXd::Zero(mean_iterate.size());
  weighted_sum_ += weight * mean_iterate;
  total_weight_ += weight;
  ++count_;
}

std::unique_ptr<AveragingScheme> make_averaging(const SgdConfig& config, std::size_t d) {
  if (!config.matrix) throw std::invalid_argument("optimize: no gossip matrix configured");
  if (config.averaging == AveragingKind::kExact) {
    return std::make_unique<ExactAveraging>(config.matrix, config.gamma.value_or(1.0),
                                            config.compression.value_bits);
  }
  const CompressionSpec spec = config.compression.resolved(d);
  double gamma = 1.0;
  if (config.gamma) {
    gamma = *config.gamma;
  } else if (config.matrix->n() > 1) {
    gamma = choco_gamma(config.matrix->delta(), omega(spec, d), config.matrix->beta());
  }
  return std::make_unique<ChocoAveraging>(config.matrix, gamma, spec, config.seed);
}

OptimizationRun run_optimization(const SgdConfig& config, const Objective& objective,
                                 const Eigen::MatrixXd& initial, double f_star) {
  const auto d = static_cast<std::size_t>(initial.rows());
  const auto n = static_cast<std::size_t>(initial.cols());
  if (d != objective.dim()) {
    throw std::invalid_argument("optimize: initial iterate has dimension " + std::to_string(d) +
                                ", objective has " + std::to_string(objective.dim()));
  }
  if (n != objective.nodes()) {
    throw std::invalid_argument("optimize: initial iterate has " + std::to_string(n) +
                                " nodes, objective is split over " + std::to_string(objective.nodes()));
  }
  if (config.eval_every == 0) throw std::invalid_argument("optimize: eval_every must be >= 1");
  auto averaging = make_averaging(config, d);
  if (config.matrix->n() != n) throw std::invalid_argument("optimize: gossip matrix size differs from node count");
  averaging->reset(d, n);

  if (config.schedule.kind == Schedule::Kind::kTheoretical && n > 1) {
    const SmoothnessConstants c = objective.strong_convexity_constants();
    const double required = theoretical_stepsize_for_contraction(c.mu, c.L, averaging->contraction(), 0).a;
    if (config.schedule.a < required) {
      const std::string message = "optimize: schedule parameter a=" + std::to_string(config.schedule.a) +
                                  " is below the theoretical minimum " + std::to_string(required);
      if (config.strict_theory) throw std::invalid_argument(message);
      std::cerr << "warning: " << message << "\n";
    }
  }

  OptimizationRun run;
  if (auto* choco = dynamic_cast<ChocoAveraging*>(averaging.get())) run.gamma = choco->gamma();
  else run.gamma = config.gamma.value_or(1.0);

  AveragedIterate averaged(config.schedule.weight_offset());
  Eigen::MatrixXd x = initial;
  std::uint64_t bits = 0;
  auto record = [&](std::uint64_t t, const Eigen::VectorXd& mean) {
    MetricsRecord rec;
    rec.iter = t;
    rec.value = objective.full_objective(mean) - f_star;
    rec.spread = consensus_error(x);
    rec.bits = bits;
    rec.aux = config.schedule.eta(t);
    if (!std::isfinite(rec.value)) throw DivergenceError(t, "non-finite suboptimality");
    run.records.push_back(rec);
  };

  for (std::uint64_t t = 0; t < config.iters; ++t) {
    const Eigen::VectorXd mean = x.rowwise().mean();
    averaged.add(t, mean);
    if (t % config.eval_every == 0) record(t, mean);
    const RoundInfo info = sgd_round(x, objective, config.schedule, *averaging, t, config.seed);
    bits += info.bits;
    run.empirical_gradient_bound = std::max(run.empirical_gradient_bound, info.max_gradient_norm);
  }
  record(config.iters, x.rowwise().mean());

  run.final_x = std::move(x);
  if (averaged.count() > 0) {
    run.averaged_x = averaged.value();
    run.averaged_subopt = objective.full_objective(run.averaged_x) - f_star;
  } else {
    run.averaged_x = run.final_x.rowwise().mean();
    run.averaged_subopt = run.records.back().value;
  }
  run.total_weight = averaged.total_weight();
  return run;
}

}  // namespace compgossip
