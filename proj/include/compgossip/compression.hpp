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
#include <string>

#include <Eigen/Dense>

#include "compgossip/rng.hpp"

namespace compgossip {

enum class CompressionKind {
  kIdentity,
  kRandK,
  kTopK,
  kQsgd,
  kRandGossip,
  kRescaledUnbiased,
};

// How sparse payloads pay for their coordinate indices.
enum class IndexCost {
  kCeilLog2,  // ceil(log2 d) bits per index
  kFree,
};

/// Description of a compression operator Q : R^d -> R^d.
///
/// RandK and Qsgd come in two flavours. The default is the contractive
/// operator (plain rand_k, and qsgd_s with the 1/tau shrink). With
/// `unbiased` set they become the unbiased estimators (d/k) rand_k and
/// tau * qsgd_s used by the quantized gossip baselines; those do not
/// satisfy the contraction assumption and have no omega.
struct CompressionSpec {
  CompressionKind kind = CompressionKind::kIdentity;
  std::size_t k = 0;          // RandK / TopK
  double k_fraction = 0.0;    // alternative to k, resolved per dimension
  unsigned levels = 0;        // Qsgd
  double probability = 1.0;   // RandGossip
  double tau = 1.0;           // RescaledUnbiased
  bool unbiased = false;      // RandK / Qsgd
  std::shared_ptr<const CompressionSpec> inner;  // RescaledUnbiased
  unsigned value_bits = 32;
  IndexCost index_cost = IndexCost::kCeilLog2;
  std::size_t dim = 0;        // 0 = not bound to a dimension

  static CompressionSpec identity();
  static CompressionSpec rand_k(std::size_t k, bool unbiased = false);
  static CompressionSpec top_k(std::size_t k);
  static CompressionSpec qsgd(unsigned levels, bool unbiased = false);
  static CompressionSpec rand_gossip(double probability);
  static CompressionSpec rescaled(CompressionSpec inner, double tau);

  /// Copy with k_fraction turned into a concrete k = ceil(fraction * d)
  /// (clamped to [1, d]) and `dim` bound to d.
  [[nodiscard]] CompressionSpec resolved(std::size_t d) const;
};

struct CompressedMessage {
  Eigen::VectorXd dense_value;
  std::uint64_t payload_bits = 0;
  bool transmitted = true;  // false when RandGossip skipped the round
  std::size_t nonzeros = 0; // coordinates carried by a sparse payload
};

/// Throws std::invalid_argument when `spec` cannot be applied in dimension d.
void validate(const CompressionSpec& spec, std::size_t d);

CompressedMessage compress(const CompressionSpec& spec,
                           const Eigen::Ref<const Eigen::VectorXd>& x, Rng& rng);

/// Contraction parameter of the operator in dimension d.
double omega(const CompressionSpec& spec, std::size_t d);

/// tau = 1 + min(d / s^2, sqrt(d) / s), the second-moment bound of qsgd_s.
double qsgd_tau(unsigned levels, std::size_t d);

/// True when E[Q(x)] = x for every x.
bool is_unbiased(const CompressionSpec& spec);

std::uint64_t payload_bits(const CompressionSpec& spec, std::size_t d,
                           const CompressedMessage& message);

unsigned ceil_log2(std::size_t value);

std::string describe(const CompressionSpec& spec);

}  // namespace compgossip
