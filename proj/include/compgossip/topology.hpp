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
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace compgossip {

struct Ring {
  std::size_t n = 0;
};
struct Torus {
  std::size_t rows = 0;
  std::size_t cols = 0;
};
struct FullyConnected {
  std::size_t n = 0;
};
struct CustomGraph {
  std::size_t n = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // 0-indexed, undirected
};

using TopologyKind = std::variant<Ring, Torus, FullyConnected, CustomGraph>;

struct SpectralQuantities {
  double delta = 0.0;  // 1 - |lambda_2|
  double rho = 1.0;    // 1 - delta
  double beta = 0.0;   // ||I - W||_2
};

/// Symmetric doubly stochastic mixing matrix together with its spectral
/// constants. Immutable once built.
class GossipMatrix {
 public:
  GossipMatrix(Eigen::MatrixXd weights, std::string name);

  std::size_t n() const { return static_cast<std::size_t>(weights_.rows()); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  double delta() const { return spectral_.delta; }
  double rho() const { return spectral_.rho; }
  double beta() const { return spectral_.beta; }
  const std::string& name() const { return name_; }

  // Undirected edges {i, j}, i < j, with w_ij > 0 (self-loops excluded).
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  // Neighbours of i other than i itself.
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return neighbors_[i]; }
  std::size_t degree(std::size_t i) const { return neighbors_[i].size(); }

 private:
  Eigen::MatrixXd weights_;
  std::string name_;
  SpectralQuantities spectral_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::vector<std::size_t>> neighbors_;
};

GossipMatrix build_gossip_matrix(const TopologyKind& kind);

/// Eigen-decomposition based delta, rho and beta. Rejects matrices that are
/// not symmetric doubly stochastic within 1e-10.
SpectralQuantities spectral_quantities(const Eigen::MatrixXd& weights);

/// ||W^k - 11^T / n||_2.
double mixing_contraction(const Eigen::MatrixXd& weights, unsigned k);

/// Reads "i j" pairs, one per line, 0-indexed; '#' starts a comment.
CustomGraph read_edge_list(const std::string& path, std::size_t n);

std::string describe(const TopologyKind& kind);

}  // namespace compgossip
