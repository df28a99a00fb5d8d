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

#include "compgossip/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

namespace compgossip {

namespace {

constexpr double kStochasticTolerance = 1e-10;
constexpr double kMinSpectralGap = 1e-9;

using AdjacencyList = std::vector<std::set<std::size_t>>;

void add_edge(AdjacencyList& adjacency, std::size_t i, std::size_t j) {
  if (i == j) return;
  adjacency[i].insert(j);
  adjacency[j].insert(i);
}

AdjacencyList adjacency_of(const TopologyKind& kind) {
  return std::visit(
      [](const auto& topo) -> AdjacencyList {
        using T = std::decay_t<decltype(topo)>;
        if constexpr (std::is_same_v<T, Ring>) {
          if (topo.n == 0) throw std::invalid_argument("topology: ring needs n >= 1");
          AdjacencyList adj(topo.n);
          for (std::size_t i = 0; i < topo.n; ++i) add_edge(adj, i, (i + 1) % topo.n);
          return adj;
        } else if constexpr (std::is_same_v<T, Torus>) {
          if (topo.rows < 3 || topo.cols < 3) {
            throw std::invalid_argument("topology: torus needs rows, cols >= 3");
          }
          AdjacencyList adj(topo.rows * topo.cols);
          auto id = [&](std::size_t r, std::size_t c) { return r * topo.cols + c; };
          for (std::size_t r = 0; r < topo.rows; ++r) {
            for (std::size_t c = 0; c < topo.cols; ++c) {
              add_edge(adj, id(r, c), id(r, (c + 1) % topo.cols));
              add_edge(adj, id(r, c), id((r + 1) % topo.rows, c));
            }
          }
          return adj;
        } else if constexpr (std::is_same_v<T, FullyConnected>) {
          if (topo.n == 0) throw std::invalid_argument("topology: fully connected needs n >= 1");
          AdjacencyList adj(topo.n);
          for (std::size_t i = 0; i < topo.n; ++i)
            for (std::size_t j = i + 1; j < topo.n; ++j) add_edge(adj, i, j);
          return adj;
        } else {
          if (topo.n == 0) throw std::invalid_argument("topology: custom graph needs n >= 1");
          AdjacencyList adj(topo.n);
          for (const auto& [i, j] : topo.edges) {
            if (i >= topo.n || j >= topo.n) {
              throw std::invalid_argument("topology: edge (" + std::to_string(i) + ", " +
                                          std::to_string(j) + ") references a node >= n=" +
                                          std::to_string(topo.n));
            }
            add_edge(adj, i, j);
          }
          return adj;
        }
      },
      kind);
}

bool connected(const AdjacencyList& adjacency) {
  std::vector<bool> seen(adjacency.size(), false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t visited = 1;
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    for (std::size_t v : adjacency[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++visited;
        frontier.push(v);
      }
    }
  }
  return visited == adjacency.size();
}

void check_doubly_stochastic(const Eigen::MatrixXd& w) {
  if (w.rows() != w.cols() || w.rows() == 0) {
    throw std::invalid_argument("spectral_quantities: weights must be a nonempty square matrix");
  }
  const double asym = (w - w.transpose()).cwiseAbs().maxCoeff();
  if (asym > kStochasticTolerance) {
    throw std::invalid_argument("spectral_quantities: weights are not symmetric (max |w_ij - w_ji| = " +
                                std::to_string(asym) + ")");
  }
  const double row_err = (w.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double col_err = (w.colwise().sum().array() - 1.0).abs().maxCoeff();
  if (row_err > kStochasticTolerance || col_err > kStochasticTolerance) {
    throw std::invalid_argument("spectral_quantities: weights are not doubly stochastic");
  }
}

}  // namespace

SpectralQuantities spectral_quantities(const Eigen::MatrixXd& weights) {
  check_doubly_stochastic(weights);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(weights, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("spectral_quantities: eigen-solve failed");
  std::vector<double> eig(solver.eigenvalues().data(),
                          solver.eigenvalues().data() + solver.eigenvalues().size());

  SpectralQuantities out;
  out.beta = 0.0;
  for (double lambda : eig) out.beta = std::max(out.beta, std::abs(1.0 - lambda));

  // lambda_1 = 1 is pinned: drop the eigenvalue closest to 1, the largest
  // remaining magnitude is |lambda_2|.
  auto top = std::min_element(eig.begin(), eig.end(), [](double a, double b) {
    return std::abs(a - 1.0) < std::abs(b - 1.0);
  });
  eig.erase(top);
  double lambda2 = 0.0;
  for (double lambda : eig) lambda2 = std::max(lambda2, std::abs(lambda));
  out.delta = std::clamp(1.0 - lambda2, 0.0, 1.0);
  out.rho = 1.0 - out.delta;
  return out;
}

double mixing_contraction(const Eigen::MatrixXd& weights, unsigned k) {
  const Eigen::Index n = weights.rows();
  const Eigen::MatrixXd average = Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
  for (unsigned i = 0; i < k; ++i) power = power * weights;
  const Eigen::MatrixXd diff = power - average;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (diff + diff.transpose()),
                                                         Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

GossipMatrix::GossipMatrix(Eigen::MatrixXd weights, std::string name)
    : weights_(std::move(weights)), name_(std::move(name)) {
  spectral_ = spectral_quantities(weights_);
  const std::size_t size = n();
  if (size > 1 && spectral_.delta < kMinSpectralGap) {
    throw std::invalid_argument("topology: spectral gap of '" + name_ + "' is zero");
  }
  neighbors_.resize(size);
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      if (i != j && weights_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0) {
        neighbors_[i].push_back(j);
        if (i < j) edges_.emplace_back(i, j);
      }
    }
  }
}

GossipMatrix build_gossip_matrix(const TopologyKind& kind) {
  const AdjacencyList adjacency = adjacency_of(kind);
  const std::size_t n = adjacency.size();
  if (!connected(adjacency)) throw std::invalid_argument("topology: graph is not connected");
  const std::size_t degree = adjacency[0].size();
  for (std::size_t i = 1; i < n; ++i) {
    if (adjacency[i].size() != degree) {
      throw std::invalid_argument(
          "topology: graph is not regular (node 0 has degree " + std::to_string(degree) +
          ", node " + std::to_string(i) + " has degree " + std::to_string(adjacency[i].size()) +
          "); uniform weights would not be doubly stochastic");
    }
  }

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double weight = 1.0 / static_cast<double>(degree + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    w(row, row) = weight;
    for (std::size_t j : adjacency[i]) w(row, static_cast<Eigen::Index>(j)) = weight;
  }
  return GossipMatrix(std::move(w), describe(kind));
}

CustomGraph read_edge_list(const std::string& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("topology: cannot open edge list '" + path + "'");
  CustomGraph graph{n, {}};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    long long i = 0;
    long long j = 0;
    std::string rest;
    if (!(fields >> i >> j) || (fields >> rest) || i < 0 || j < 0) {
      throw std::invalid_argument("topology: malformed edge at " + path + ":" + std::to_string(line_no));
    }
    graph.edges.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  }
  return graph;
}

std::string describe(const TopologyKind& kind) {
  return std::visit(
      [](const auto& topo) -> std::string {
        using T = std::decay_t<decltype(topo)>;
        if constexpr (std::is_same_v<T, Ring>) return "ring(" + std::to_string(topo.n) + ")";
        else if constexpr (std::is_same_v<T, Torus>)
          return "torus(" + std::to_string(topo.rows) + "x" + std::to_string(topo.cols) + ")";
        else if constexpr (std::is_same_v<T, FullyConnected>) return "full(" + std::to_string(topo.n) + ")";
        else return "custom(" + std::to_string(topo.n) + ")";
      },
      kind);
}

}  // namespace compgossip
