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
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "compgossip/compression.hpp"
#include "compgossip/metrics.hpp"
#include "compgossip/rng.hpp"
#include "compgossip/topology.hpp"

namespace compgossip {

enum class GossipScheme { kExact, kQ1, kQ2, kChoco };

std::string to_string(GossipScheme scheme);

/// Per-node memory of the memory-efficient compressed gossip: the iterate,
/// the public estimate shared with all neighbours, and s = sum_j w_ij x_hat_j.
struct NodeState {
  Eigen::VectorXd x;
  Eigen::VectorXd x_hat;
  Eigen::VectorXd s;
};

/// All node states stacked column-wise (d x n); column i belongs to node i.
struct NetworkState {
  Eigen::MatrixXd x;
  Eigen::MatrixXd x_hat;
  Eigen::MatrixXd s;

  NetworkState() = default;
  explicit NetworkState(Eigen::MatrixXd initial);

  std::size_t dim() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t nodes() const { return static_cast<std::size_t>(x.cols()); }
  NodeState node(std::size_t i) const;
  Eigen::VectorXd mean() const { return x.rowwise().mean(); }
};

/// Random streams of one gossip round; node i draws from its own stream so
/// results do not depend on iteration order.
struct RoundStreams {
  std::uint64_t seed = 0;
  std::uint64_t round = 0;
  Rng node(std::size_t i, StreamTag tag = StreamTag::kCompression) const {
    return derive_stream(seed, i, round, tag);
  }
};

/// Consensus stepsize for which the compressed gossip contracts the Lyapunov
/// function by (1 - delta^2 omega / 82) per round.
double choco_gamma(double delta, double omega, double beta);

/// The per-round contraction factor delta^2 omega / 82 of the above stepsize.
double choco_rate(double delta, double omega);

// Each step updates `state` in place and returns the bits sent on the
// network in that round (self-loop messages are free).
std::uint64_t step_exact(NetworkState& state, double gamma, const GossipMatrix& matrix,
                         unsigned value_bits = 32);
std::uint64_t step_q1(NetworkState& state, double gamma, const CompressionSpec& compression,
                      const GossipMatrix& matrix, const RoundStreams& streams);
std::uint64_t step_q2(NetworkState& state, double gamma, const CompressionSpec& compression,
                      const GossipMatrix& matrix, const RoundStreams& streams);
std::uint64_t step_choco(NetworkState& state, double gamma, const CompressionSpec& compression,
                         const GossipMatrix& matrix, const RoundStreams& streams);

struct ConsensusConfig {
  GossipScheme scheme = GossipScheme::kExact;
  std::optional<double> gamma;  // unset: 1 for the classic schemes, choco_gamma for Choco
  CompressionSpec compression;
  std::shared_ptr<const GossipMatrix> matrix;
  std::uint64_t max_iters = 100;
  std::uint64_t seed = 1;
  std::uint64_t eval_every = 1;
  std::optional<double> target_error;  // stop at the first iterate reaching it
  bool check_invariants = false;       // verify s = x_hat W after every round
};

struct ConsensusRun {
  std::vector<MetricsRecord> records;
  double gamma = 0.0;
  NetworkState final_state;
};

/// Resolved stepsize for `config` in dimension d.
double resolve_gamma(const ConsensusConfig& config, std::size_t d);

/// Runs the configured scheme from `initial` (d x n). Each record is taken at
/// the entry of its iteration.
ConsensusRun run_consensus(const ConsensusConfig& config, const Eigen::MatrixXd& initial);

/// Sum_i ||x_i - mean||^2.
double consensus_error(const Eigen::MatrixXd& x);

/// Iteration of the first record whose error is <= target.
std::optional<std::uint64_t> iterations_to(const std::vector<MetricsRecord>& records, double target);

/// Gaussian initial values, one column per node drawn from that node's stream.
Eigen::MatrixXd gaussian_initial(std::size_t d, std::size_t n, std::uint64_t seed);

/// n rows of d comma- or whitespace-separated values.
Eigen::MatrixXd read_initial(const std::string& path, std::size_t d, std::size_t n);

}  // namespace compgossip
