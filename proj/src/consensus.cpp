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

#include "compgossip/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace compgossip {

namespace {

constexpr double kDivergenceFactor = 1e6;

struct CompressedRound {
  Eigen::MatrixXd values;  // column i = Q applied by node i
  std::uint64_t bits = 0;
};

// One draw per node, broadcast identically to every neighbour.
CompressedRound compress_columns(const CompressionSpec& spec, const Eigen::MatrixXd& input,
                                 const GossipMatrix& matrix, const RoundStreams& streams) {
  CompressedRound round;
  round.values.resize(input.rows(), input.cols());
  for (Eigen::Index i = 0; i < input.cols(); ++i) {
    Rng rng = streams.node(static_cast<std::size_t>(i));
    CompressedMessage message = compress(spec, input.col(i), rng);
    round.values.col(i) = message.dense_value;
    round.bits += message.payload_bits * matrix.degree(static_cast<std::size_t>(i));
  }
  return round;
}

std::uint64_t dense_round_bits(const GossipMatrix& matrix, std::size_t d, unsigned value_bits) {
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < matrix.n(); ++i) bits += matrix.degree(i) * d * value_bits;
  return bits;
}

void check_shapes(const NetworkState& state, const GossipMatrix& matrix) {
  if (state.nodes() != matrix.n()) {
    throw std::invalid_argument("consensus: state has " + std::to_string(state.nodes()) +
                                " nodes but the gossip matrix has " + std::to_string(matrix.n()));
  }
}

}  // namespace

std::string to_string(GossipScheme scheme) {
  switch (scheme) {
    case GossipScheme::kExact: return "exact";
    case GossipScheme::kQ1: return "q1";
    case GossipScheme::kQ2: return "q2";
    case GossipScheme::kChoco: return "choco";
  }
  return "?";
}

NetworkState::NetworkState(Eigen::MatrixXd initial)
    : x(std::move(initial)),
      x_hat(Eigen::MatrixXd::Zero(x.rows(), x.cols())),
      s(Eigen::MatrixXd::Zero(x.rows(), x.cols())) {}

NodeState NetworkState::node(std::size_t i) const {
  const auto col = static_cast<Eigen::Index>(i);
  return {x.col(col), x_hat.col(col), s.col(col)};
}

double choco_gamma(double delta, double omega, double beta) {
  if (!(delta > 0.0) || delta > 1.0) throw std::invalid_argument("choco_gamma: delta must lie in (0, 1]");
  if (!(omega > 0.0) || omega > 1.0) throw std::invalid_argument("choco_gamma: omega must lie in (0, 1]");
  if (beta < 0.0 || beta > 2.0) throw std::invalid_argument("choco_gamma: beta must lie in [0, 2]");
  const double beta2 = beta * beta;
  const double denominator =
      16.0 * delta + delta * delta + 4.0 * beta2 + 2.0 * delta * beta2 - 8.0 * delta * omega;
  return delta * delta * omega / denominator;
}

double choco_rate(double delta, double omega) { return delta * delta * omega / 82.0; }

std::uint64_t step_exact(NetworkState& state, double gamma, const GossipMatrix& matrix,
                         unsigned value_bits) {
  check_shapes(state, matrix);
  state.x += gamma * (state.x * matrix.weights() - state.x);
  return dense_round_bits(matrix, state.dim(), value_bits);
}

std::uint64_t step_q1(NetworkState& state, double gamma, const CompressionSpec& compression,
                      const GossipMatrix& matrix, const RoundStreams& streams) {
  check_shapes(state, matrix);
  CompressedRound round = compress_columns(compression, state.x, matrix, streams);
  // Delta_ij = Q(x_j) - x_i and sum_j w_ij = 1.
  state.x += gamma * (round.values * matrix.weights() - state.x);
  return round.bits;
}

std::uint64_t step_q2(NetworkState& state, double gamma, const CompressionSpec& compression,
                      const GossipMatrix& matrix, const RoundStreams& streams) {
  check_shapes(state, matrix);
  CompressedRound round = compress_columns(compression, state.x, matrix, streams);
  // Delta_ij = Q(x_j) - Q(x_i).
  state.x += gamma * (round.values * matrix.weights() - round.values);
  return round.bits;
}

std::uint64_t step_choco(NetworkState& state, double gamma, const CompressionSpec& compression,
                         const GossipMatrix& matrix, const RoundStreams& streams) {
  check_shapes(state, matrix);
  CompressedRound round = compress_columns(compression, state.x - state.x_hat, matrix, streams);
  state.x_hat += round.values;
  state.s += round.values * matrix.weights();
  state.x += gamma * (state.s - state.x_hat);
  return round.bits;
}

double resolve_gamma(const ConsensusConfig& config, std::size_t d) {
  if (config.gamma) {
    const double gamma = *config.gamma;
    if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("consensus: gamma must lie in (0, 1]");
    return gamma;
  }
  if (config.scheme != GossipScheme::kChoco) return 1.0;
  const GossipMatrix& w = *config.matrix;
  return choco_gamma(w.delta(), omega(config.compression, d), w.beta());
}

double consensus_error(const Eigen::MatrixXd& x) {
  const Eigen::VectorXd mean = x.rowwise().mean();
  return (x.colwise() - mean).squaredNorm();
}

ConsensusRun run_consensus(const ConsensusConfig& config, const Eigen::MatrixXd& initial) {
  if (!config.matrix) throw std::invalid_argument("consensus: no gossip matrix configured");
  const GossipMatrix& matrix = *config.matrix;
  if (static_cast<std::size_t>(initial.cols()) != matrix.n()) {
    throw std::invalid_argument("consensus: initial values have " + std::to_string(initial.cols()) +
                                " columns, expected n=" + std::to_string(matrix.n()));
  }
  if (config.eval_every == 0) throw std::invalid_argument("consensus: eval_every must be >= 1");
  if (matrix.n() > 1 && !(matrix.delta() > 0.0)) throw std::invalid_argument("consensus: spectral gap must be > 0");
  const auto d = static_cast<std::size_t>(initial.rows());

  const CompressionSpec spec = config.compression.resolved(d);
  if (config.scheme != GossipScheme::kExact) validate(spec, d);
  if ((config.scheme == GossipScheme::kQ1 || config.scheme == GossipScheme::kQ2) && !is_unbiased(spec)) {
    throw std::invalid_argument("consensus: " + to_string(config.scheme) +
                                " gossip needs an unbiased compression, got " + describe(spec));
  }
  ConsensusConfig resolved = config;
  resolved.compression = spec;

  ConsensusRun run;
  run.gamma = resolve_gamma(resolved, d);
  NetworkState state(initial);
  const Eigen::VectorXd initial_mean = state.mean();
  const double initial_error = consensus_error(state.x);

  std::uint64_t bits = 0;
  for (std::uint64_t t = 0; t < config.max_iters; ++t) {
    const double error = consensus_error(state.x);
    if (!std::isfinite(error) || (initial_error > 0.0 && error > kDivergenceFactor * initial_error)) {
      throw DivergenceError(t, to_string(config.scheme) + " gossip error " + std::to_string(error) +
                                   " exceeds 1e6 x initial error");
    }
    const bool reached = config.target_error && error <= *config.target_error;
    const bool record = reached || t % config.eval_every == 0;
    Eigen::MatrixXd entry;
    if (record) entry = state.x;

    const RoundStreams streams{config.seed, t};
    std::uint64_t round_bits = 0;
    switch (config.scheme) {
      case GossipScheme::kExact:
        round_bits = step_exact(state, run.gamma, matrix, spec.value_bits);
        break;
      case GossipScheme::kQ1:
        round_bits = step_q1(state, run.gamma, spec, matrix, streams);
        break;
      case GossipScheme::kQ2:
        round_bits = step_q2(state, run.gamma, spec, matrix, streams);
        break;
      case GossipScheme::kChoco:
        round_bits = step_choco(state, run.gamma, spec, matrix, streams);
        break;
    }

    if (record) {
      MetricsRecord rec;
      rec.iter = t;
      rec.value = error;
      // Lyapunov uses the estimate after this round's update; the classic
      // schemes carry no estimate, their x_hat coincides with x.
      rec.spread = config.scheme == GossipScheme::kChoco ? error + (entry - state.x_hat).squaredNorm() : error;
      rec.bits = bits;
      rec.aux = (entry.rowwise().mean() - initial_mean).norm();
      run.records.push_back(rec);
    }
    bits += round_bits;

    if (config.check_invariants && config.scheme == GossipScheme::kChoco) {
      const double scale = std::max(1.0, state.x_hat.cwiseAbs().maxCoeff());
      const double gap = (state.s - state.x_hat * matrix.weights()).cwiseAbs().maxCoeff();
      if (gap > 1e-10 * scale) {
        throw std::logic_error("consensus: s drifted from x_hat W by " + std::to_string(gap) +
                               " at iteration " + std::to_string(t));
      }
    }
    if (reached) break;
  }
  run.final_state = std::move(state);
  return run;
}

std::optional<std::uint64_t> iterations_to(const std::vector<MetricsRecord>& records, double target) {
  for (const auto& rec : records) {
    if (rec.value <= target) return rec.iter;
  }
  return std::nullopt;
}

Eigen::MatrixXd gaussian_initial(std::size_t d, std::size_t n, std::uint64_t seed) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = derive_stream(seed, i, 0, StreamTag::kInit);
    for (std::size_t k = 0; k < d; ++k) x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = rng.normal();
  }
  return x;
}

Eigen::MatrixXd read_initial(const std::string& path, std::size_t d, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("consensus: cannot open initial values '" + path + "'");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  std::string line;
  std::size_t node = 0;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    std::vector<double> values;
    double v = 0.0;
    while (fields >> v) values.push_back(v);
    if (values.empty()) continue;
    if (node >= n) throw std::invalid_argument("consensus: initial file has more than n=" + std::to_string(n) + " rows");
    if (values.size() != d) {
      throw std::invalid_argument("consensus: row " + std::to_string(node + 1) + " of '" + path + "' has " +
                                  std::to_string(values.size()) + " values, expected d=" + std::to_string(d));
    }
    for (std::size_t k = 0; k < d; ++k) x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(node)) = values[k];
    ++node;
  }
  if (node != n) throw std::invalid_argument("consensus: initial file has " + std::to_string(node) + " rows, expected n=" + std::to_string(n));
  return x;
}

}  // namespace compgossip
