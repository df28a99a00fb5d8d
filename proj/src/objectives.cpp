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

#include "compgossip/objectives.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace compgossip {

namespace {

[[noreturn]] void parse_error(std::size_t line_no, const std::string& what) {
  throw std::invalid_argument("libsvm: line " + std::to_string(line_no) + ": " + what);
}

double parse_double(std::string_view token, std::size_t line_no, const char* field) {
  // std::from_chars for double is not available everywhere yet; strtod is
  // locale-sensitive but the library never changes the C locale.
  std::string copy(token);
  char* end = nullptr;
  const double v = std::strtod(copy.c_str(), &end);
  if (copy.empty() || end != copy.c_str() + copy.size() || !std::isfinite(v)) {
    parse_error(line_no, std::string("bad ") + field + " '" + copy + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", v);
  return buffer;
}

}  // namespace

double Dataset::dot(std::size_t row, const Eigen::VectorXd& x) const {
  double sum = 0.0;
  for (std::size_t k = row_start[row]; k < row_start[row + 1]; ++k) {
    sum += value[k] * x[static_cast<Eigen::Index>(index[k])];
  }
  return sum;
}

void Dataset::axpy(std::size_t row, double scale, Eigen::VectorXd& out) const {
  for (std::size_t k = row_start[row]; k < row_start[row + 1]; ++k) {
    out[static_cast<Eigen::Index>(index[k])] += scale * value[k];
  }
}

void Dataset::add_row(double label, const std::vector<std::pair<std::size_t, double>>& features) {
  if (row_start.empty()) row_start.push_back(0);
  labels.push_back(label);
  for (const auto& [i, v] : features) {
    index.push_back(i);
    value.push_back(v);
    d = std::max(d, i + 1);
  }
  row_start.push_back(index.size());
}

Dataset parse_libsvm(std::istream& in, std::optional<std::size_t> dimension) {
  Dataset data;
  data.row_start.push_back(0);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::pair<std::size_t, double>> features;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string label_token;
    if (!(tokens >> label_token)) continue;

    const double raw_label = parse_double(label_token, line_no, "label");
    double label = 0.0;
    if (raw_label == 1.0) label = 1.0;
    else if (raw_label == -1.0 || raw_label == 0.0) label = -1.0;
    else parse_error(line_no, "label '" + label_token + "' is not one of +1, -1, 0");

    features.clear();
    std::size_t previous = 0;
    std::string token;
    while (tokens >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos) parse_error(line_no, "feature '" + token + "' lacks ':'");
      std::size_t idx = 0;
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + colon, idx);
      if (ec != std::errc() || ptr != token.data() + colon) {
        parse_error(line_no, "bad index in '" + token + "'");
      }
      if (idx == 0) parse_error(line_no, "indices are 1-based, got 0");
      if (idx <= previous) parse_error(line_no, "indices must be strictly increasing (" + token + ")");
      previous = idx;
      const double v = parse_double(std::string_view(token).substr(colon + 1), line_no, "value");
      features.emplace_back(idx - 1, v);
    }
    data.add_row(label, features);
  }
  if (data.size() == 0) throw std::invalid_argument("libsvm: input contains no samples");
  if (dimension) {
    if (*dimension < data.d) {
      throw std::invalid_argument("libsvm: dimension override " + std::to_string(*dimension) +
                                  " is smaller than the largest index " + std::to_string(data.d));
    }
    data.d = *dimension;
  }
  return data;
}

Dataset load_libsvm(const std::string& path, std::optional<std::size_t> dimension) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("libsvm: cannot open '" + path + "'");
  return parse_libsvm(in, dimension);
}

std::string serialize_libsvm(const Dataset& data) {
  std::string out;
  for (std::size_t row = 0; row < data.size(); ++row) {
    out += data.labels[row] > 0 ? "+1" : "-1";
    for (std::size_t k = data.row_start[row]; k < data.row_start[row + 1]; ++k) {
      out += ' ';
      out += std::to_string(data.index[k] + 1);
      out += ':';
      out += format_double(data.value[k]);
    }
    out += '\n';
  }
  return out;
}

Dataset synthetic_logistic(std::size_t m, std::size_t d, double flip_probability, std::uint64_t seed) {
  if (m == 0 || d == 0) throw std::invalid_argument("synthetic_logistic: m and d must be positive");
  Rng truth_rng = derive_stream(seed, 0, 0, StreamTag::kData);
  Eigen::VectorXd truth(static_cast<Eigen::Index>(d));
  for (Eigen::Index k = 0; k < truth.size(); ++k) truth[k] = truth_rng.normal();

  Dataset data;
  std::vector<std::pair<std::size_t, double>> features(d);
  for (std::size_t j = 0; j < m; ++j) {
    Rng rng = derive_stream(seed, j + 1, 0, StreamTag::kData);
    Eigen::VectorXd a(static_cast<Eigen::Index>(d));
    for (Eigen::Index k = 0; k < a.size(); ++k) a[k] = rng.normal();
    a /= a.norm();
    double label = a.dot(truth) >= 0.0 ? 1.0 : -1.0;
    if (rng.uniform() < flip_probability) label = -label;
    for (std::size_t k = 0; k < d; ++k) features[k] = {k, a[static_cast<Eigen::Index>(k)]};
    data.add_row(label, features);
  }
  data.d = d;
  return data;
}

std::vector<Shard> partition(const Dataset& data, std::size_t n, PartitionMode mode, std::uint64_t seed) {
  const std::size_t m = data.size();
  if (n == 0) throw std::invalid_argument("partition: n must be positive");
  if (n > m) {
    throw std::invalid_argument("partition: n=" + std::to_string(n) + " exceeds the sample count m=" +
                                std::to_string(m));
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (mode == PartitionMode::kShuffled) {
    Rng rng = derive_stream(seed, 0, 0, StreamTag::kPartition);
    for (std::size_t i = m; i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_index(i));
      std::swap(order[i - 1], order[j]);
    }
  } else {
    std::stable_partition(order.begin(), order.end(), [&](std::size_t j) { return data.labels[j] > 0; });
  }

  std::vector<Shard> shards(n);
  const std::size_t base = m / n;
  const std::size_t extra = m % n;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t size = base + (i < extra ? 1 : 0);
    shards[i].node_id = i;
    shards[i].samples.assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                             order.begin() + static_cast<std::ptrdiff_t>(cursor + size));
    cursor += size;
  }
  return shards;
}

double logistic_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logistic_loss(double margin) {
  if (margin > 0.0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

Objective Objective::quadratic(Eigen::MatrixXd targets, double noise_sigma) {
  if (targets.cols() == 0 || targets.rows() == 0) throw std::invalid_argument("objective: quadratic needs targets");
  if (noise_sigma < 0.0) throw std::invalid_argument("objective: noise sigma must be >= 0");
  Objective obj;
  obj.kind_ = Kind::kQuadratic;
  obj.nodes_ = static_cast<std::size_t>(targets.cols());
  obj.dim_ = static_cast<std::size_t>(targets.rows());
  obj.targets_ = std::move(targets);
  obj.noise_sigma_ = noise_sigma;
  return obj;
}

Objective Objective::logistic(std::shared_ptr<const Dataset> data, std::vector<Shard> shards) {
  if (!data || data->size() == 0) throw std::invalid_argument("objective: logistic needs a nonempty dataset");
  if (shards.empty()) throw std::invalid_argument("objective: logistic needs at least one shard");
  for (std::size_t i = 0; i < shards.size(); ++i) {
    for (std::size_t j : shards[i].samples) {
      if (j >= data->size()) throw std::invalid_argument("objective: shard references sample out of range");
    }
    if (shards[i].samples.empty()) throw std::invalid_argument("objective: shard " + std::to_string(i) + " is empty");
  }
  Objective obj;
  obj.kind_ = Kind::kLogistic;
  obj.nodes_ = shards.size();
  obj.dim_ = data->d;
  obj.data_ = std::move(data);
  obj.shards_ = std::move(shards);
  return obj;
}

std::size_t Objective::sample_count() const { return kind_ == Kind::kLogistic ? data_->size() : 1; }

std::size_t Objective::epoch_length() const {
  if (kind_ == Kind::kQuadratic) return 1;
  std::size_t longest = 0;
  for (const auto& shard : shards_) longest = std::max(longest, shard.samples.size());
  return longest;
}

const Shard& Objective::shard(std::size_t node) const {
  if (node >= shards_.size()) throw std::out_of_range("objective: node index out of range");
  const Shard& s = shards_[node];
  if (s.samples.empty()) throw std::invalid_argument("objective: shard of node " + std::to_string(node) + " is empty");
  return s;
}

double Objective::sample_loss(std::size_t row, const Eigen::VectorXd& x) const {
  return logistic_loss(data_->labels[row] * data_->dot(row, x));
}

void Objective::add_sample_gradient(std::size_t row, const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
  const double b = data_->labels[row];
  const double margin = b * data_->dot(row, x);
  data_->axpy(row, -b * logistic_sigmoid(-margin), out);
}

Eigen::VectorXd Objective::stochastic_gradient(std::size_t node, const Eigen::VectorXd& x, Rng& rng) const {
  if (kind_ == Kind::kQuadratic) {
    if (node >= nodes_) throw std::out_of_range("objective: node index out of range");
    Eigen::VectorXd g = x - targets_.col(static_cast<Eigen::Index>(node));
    if (noise_sigma_ > 0.0) {
      for (Eigen::Index k = 0; k < g.size(); ++k) g[k] += noise_sigma_ * rng.normal();
    }
    return g;
  }
  const Shard& s = shard(node);
  const std::size_t row = s.samples[static_cast<std::size_t>(rng.uniform_index(s.samples.size()))];
  Eigen::VectorXd g = x / static_cast<double>(data_->size());
  add_sample_gradient(row, x, g);
  return g;
}

Eigen::VectorXd Objective::local_full_gradient(std::size_t node, const Eigen::VectorXd& x) const {
  if (kind_ == Kind::kQuadratic) {
    if (node >= nodes_) throw std::out_of_range("objective: node index out of range");
    return x - targets_.col(static_cast<Eigen::Index>(node));
  }
  const Shard& s = shard(node);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  for (std::size_t row : s.samples) add_sample_gradient(row, x, g);
  g /= static_cast<double>(s.samples.size());
  g += x / static_cast<double>(data_->size());
  return g;
}

double Objective::local_objective(std::size_t node, const Eigen::VectorXd& x) const {
  if (kind_ == Kind::kQuadratic) {
    if (node >= nodes_) throw std::out_of_range("objective: node index out of range");
    return 0.5 * (x - targets_.col(static_cast<Eigen::Index>(node))).squaredNorm();
  }
  const Shard& s = shard(node);
  double sum = 0.0;
  for (std::size_t row : s.samples) sum += sample_loss(row, x);
  return sum / static_cast<double>(s.samples.size()) + x.squaredNorm() / (2.0 * static_cast<double>(data_->size()));
}

double Objective::full_objective(const Eigen::VectorXd& x) const {
  if (kind_ == Kind::kQuadratic) {
    return 0.5 * (targets_.colwise() - x).squaredNorm() / static_cast<double>(nodes_);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < nodes_; ++i) sum += local_objective(i, x);
  return sum / static_cast<double>(nodes_);
}

Eigen::VectorXd Objective::full_gradient(const Eigen::VectorXd& x) const {
  if (kind_ == Kind::kQuadratic) return x - targets_.rowwise().mean();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  for (std::size_t i = 0; i < nodes_; ++i) g += local_full_gradient(i, x);
  return g / static_cast<double>(nodes_);
}

double Objective::gradient_variance(std::size_t node, const Eigen::VectorXd& x) const {
  if (kind_ == Kind::kQuadratic) return noise_sigma_ * noise_sigma_ * static_cast<double>(dim_);
  const Shard& s = shard(node);
  const Eigen::VectorXd mean = local_full_gradient(node, x);
  double sum = 0.0;
  for (std::size_t row : s.samples) {
    Eigen::VectorXd g = x / static_cast<double>(data_->size());
    add_sample_gradient(row, x, g);
    sum += (g - mean).squaredNorm();
  }
  return sum / static_cast<double>(s.samples.size());
}

double covariance_top_eigenvalue(const Dataset& data, double tolerance, std::uint64_t max_steps) {
  return covariance_top_eigenvalue(data, std::vector<double>(data.size(), 1.0 / static_cast<double>(data.size())),
                                   tolerance, max_steps);
}

double covariance_top_eigenvalue(const Dataset& data, const std::vector<double>& row_weights, double tolerance,
                                 std::uint64_t max_steps) {
  if (row_weights.size() != data.size()) {
    throw std::invalid_argument("covariance_top_eigenvalue: one weight per row expected");
  }
  const auto d = static_cast<Eigen::Index>(data.d);
  Eigen::VectorXd v = Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
  double estimate = 0.0;
  for (std::uint64_t step = 0; step < max_steps; ++step) {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(d);
    for (std::size_t row = 0; row < data.size(); ++row) {
      if (row_weights[row] != 0.0) data.axpy(row, row_weights[row] * data.dot(row, v), next);
    }
    const double rayleigh = v.dot(next);
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    next /= norm;
    if (step > 0 && std::abs(rayleigh - estimate) <= tolerance * std::abs(rayleigh)) return rayleigh;
    estimate = rayleigh;
    v = std::move(next);
  }
  throw std::runtime_error("covariance_top_eigenvalue: power iteration did not converge in " +
                           std::to_string(max_steps) + " steps");
}

SmoothnessConstants Objective::strong_convexity_constants() const {
  if (kind_ == Kind::kQuadratic) return {1.0, 1.0};
  const double inv_m = 1.0 / static_cast<double>(data_->size());
  std::vector<double> weights(data_->size(), 0.0);
  for (const Shard& s : shards_) {
    for (std::size_t row : s.samples) {
      weights[row] += 1.0 / (static_cast<double>(nodes_) * static_cast<double>(s.samples.size()));
    }
  }
  // The logistic loss has curvature at most 1/4.
  return {inv_m, inv_m + 0.25 * covariance_top_eigenvalue(*data_, weights)};
}

ReferenceSolution solve_reference(const Objective& objective, double tolerance, std::uint64_t max_iters) {
  ReferenceSolution out;
  if (objective.kind() == Objective::Kind::kQuadratic) {
    out.x = objective.targets().rowwise().mean();
    out.value = objective.full_objective(out.x);
    out.gradient_norm = objective.full_gradient(out.x).norm();
    return out;
  }
  const double step = 1.0 / objective.strong_convexity_constants().L;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(objective.dim()));
  for (std::uint64_t it = 0; it <= max_iters; ++it) {
    const Eigen::VectorXd g = objective.full_gradient(x);
    const double norm = g.norm();
    if (norm <= tolerance) {
      out.x = std::move(x);
      out.value = objective.full_objective(out.x);
      out.gradient_norm = norm;
      out.iterations = it;
      return out;
    }
    x -= step * g;
  }
  throw std::runtime_error("solve_reference: gradient norm above " + std::to_string(tolerance) +
                           " after " + std::to_string(max_iters) + " iterations");
}

}  // namespace compgossip
