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
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "compgossip/rng.hpp"

namespace compgossip {

/// Binary-labelled sparse samples in compressed-row form, 0-based indices.
struct Dataset {
  std::size_t d = 0;
  std::vector<double> labels;         // +1 / -1
  std::vector<std::size_t> row_start; // size m + 1
  std::vector<std::size_t> index;
  std::vector<double> value;

  std::size_t size() const { return labels.size(); }
  double dot(std::size_t row, const Eigen::VectorXd& x) const;
  // out += scale * a_row
  void axpy(std::size_t row, double scale, Eigen::VectorXd& out) const;
  void add_row(double label, const std::vector<std::pair<std::size_t, double>>& features);
};

/// Parses LIBSVM text ("label idx:val ..."). Indices are 1-based and strictly
/// increasing in the file; labels 0 are mapped to -1. Throws
/// std::invalid_argument naming the offending line.
Dataset parse_libsvm(std::istream& in, std::optional<std::size_t> dimension = std::nullopt);
Dataset load_libsvm(const std::string& path, std::optional<std::size_t> dimension = std::nullopt);

/// Canonical text form: "+1"/"-1" labels, 1-based indices, %.17g values.
std::string serialize_libsvm(const Dataset& data);

/// Linearly separable data with a fraction of flipped labels. Rows have unit
/// norm, half of the labels are +1 in expectation.
Dataset synthetic_logistic(std::size_t m, std::size_t d, double flip_probability, std::uint64_t seed);

struct Shard {
  std::size_t node_id = 0;
  std::vector<std::size_t> samples;
};

enum class PartitionMode { kShuffled, kSorted };

/// Splits [m] into n contiguous blocks of sizes differing by at most one,
/// after a seeded permutation (shuffled) or a stable label sort with +1
/// first (sorted).
std::vector<Shard> partition(const Dataset& data, std::size_t n, PartitionMode mode, std::uint64_t seed);

struct SmoothnessConstants {
  double mu = 0.0;
  double L = 0.0;
  double kappa() const { return L / mu; }
};

struct ReferenceSolution {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  std::uint64_t iterations = 0;
};

/// Sum-structured objective f = (1/n) sum_i f_i split over n nodes.
///
/// Quadratic: f_i(x) = 0.5 ||x - target_i||^2, optionally with additive
/// N(0, sigma^2 I) gradient noise. Logistic: f_i is the mean logistic loss
/// over node i's shard plus (1/2m)||x||^2. The global f is the node average
/// of the f_i, so shards of unequal size weigh their samples differently.
class Objective {
 public:
  enum class Kind { kQuadratic, kLogistic };

  static Objective quadratic(Eigen::MatrixXd targets, double noise_sigma = 0.0);
  static Objective logistic(std::shared_ptr<const Dataset> data, std::vector<Shard> shards);

  Kind kind() const { return kind_; }
  std::size_t nodes() const { return nodes_; }
  std::size_t dim() const { return dim_; }
  // Sample count m of the schedule eta_t = m a / (t + b); 1 for quadratics.
  std::size_t sample_count() const;
  // Largest shard size; 1 for quadratics.
  std::size_t epoch_length() const;
  const Eigen::MatrixXd& targets() const { return targets_; }
  const std::vector<Shard>& shards() const { return shards_; }
  double noise_sigma() const { return noise_sigma_; }

  Eigen::VectorXd stochastic_gradient(std::size_t node, const Eigen::VectorXd& x, Rng& rng) const;
  Eigen::VectorXd local_full_gradient(std::size_t node, const Eigen::VectorXd& x) const;
  double local_objective(std::size_t node, const Eigen::VectorXd& x) const;
  double full_objective(const Eigen::VectorXd& x) const;
  Eigen::VectorXd full_gradient(const Eigen::VectorXd& x) const;
  // E ||grad F_i(x, xi) - grad f_i(x)||^2 by enumeration.
  double gradient_variance(std::size_t node, const Eigen::VectorXd& x) const;

  SmoothnessConstants strong_convexity_constants() const;

 private:
  Objective() = default;
  double sample_loss(std::size_t row, const Eigen::VectorXd& x) const;
  void add_sample_gradient(std::size_t row, const Eigen::VectorXd& x, Eigen::VectorXd& out) const;
  const Shard& shard(std::size_t node) const;

  Kind kind_ = Kind::kQuadratic;
  std::size_t nodes_ = 0;
  std::size_t dim_ = 0;
  Eigen::MatrixXd targets_;
  double noise_sigma_ = 0.0;
  std::shared_ptr<const Dataset> data_;
  std::vector<Shard> shards_;
};

/// Largest eigenvalue of (1/m) sum_j a_j a_j^T by power iteration.
double covariance_top_eigenvalue(const Dataset& data, double tolerance = 1e-6,
                                 std::uint64_t max_steps = 10000);
/// Same for sum_j weight_j a_j a_j^T.
double covariance_top_eigenvalue(const Dataset& data, const std::vector<double>& row_weights,
                                 double tolerance = 1e-6, std::uint64_t max_steps = 10000);

/// Minimiser by full gradient descent with stepsize 1/L, stopped at
/// ||grad f|| <= tolerance (closed form for quadratics).
ReferenceSolution solve_reference(const Objective& objective, double tolerance = 1e-10,
                                  std::uint64_t max_iters = 1000000);

double logistic_sigmoid(double z);
/// log(1 + exp(-margin)) without overflow.
double logistic_loss(double margin);

}  // namespace compgossip
