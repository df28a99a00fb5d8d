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

#include "compgossip/compression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace compgossip {

namespace {

[[noreturn]] void fail(const std::string& message) {
  throw std::invalid_argument("compression: " + message);
}

std::size_t resolve_k(const CompressionSpec& spec, std::size_t d) {
  if (spec.k != 0) return spec.k;
  if (spec.k_fraction > 0.0) {
    const auto k = static_cast<std::size_t>(std::ceil(spec.k_fraction * static_cast<double>(d)));
    return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(d, 1));
  }
  return 0;
}

// `count` indices drawn uniformly without replacement (partial Fisher-Yates).
std::vector<std::size_t> sample_subset(std::size_t d, std::size_t count, Rng& rng) {
  std::vector<std::size_t> index(d);
  std::iota(index.begin(), index.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(d - i));
    std::swap(index[i], index[j]);
  }
  index.resize(count);
  return index;
}

Eigen::VectorXd apply_qsgd(const Eigen::Ref<const Eigen::VectorXd>& x, unsigned levels,
                           double scale, Rng& rng) {
  const Eigen::Index d = x.size();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
  const double norm = x.norm();
  // Every coordinate consumes one dither draw, including the zero vector,
  // so the stream position does not depend on the data.
  const double s = static_cast<double>(levels);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double xi = rng.uniform();
    if (norm == 0.0 || x[i] == 0.0) continue;
    const double level = std::floor(s * std::abs(x[i]) / norm + xi);
    const double sign = x[i] > 0.0 ? 1.0 : -1.0;
    out[i] = sign * norm / (s * scale) * level;
  }
  return out;
}

}  // namespace

CompressionSpec CompressionSpec::identity() { return {}; }

CompressionSpec CompressionSpec::rand_k(std::size_t k, bool unbiased) {
  CompressionSpec spec;
  spec.kind = CompressionKind::kRandK;
  spec.k = k;
  spec.unbiased = unbiased;
  return spec;
}

CompressionSpec CompressionSpec::top_k(std::size_t k) {
  CompressionSpec spec;
  spec.kind = CompressionKind::kTopK;
  spec.k = k;
  return spec;
}

CompressionSpec CompressionSpec::qsgd(unsigned levels, bool unbiased) {
  CompressionSpec spec;
  spec.kind = CompressionKind::kQsgd;
  spec.levels = levels;
  spec.unbiased = unbiased;
  return spec;
}

CompressionSpec CompressionSpec::rand_gossip(double probability) {
  CompressionSpec spec;
  spec.kind = CompressionKind::kRandGossip;
  spec.probability = probability;
  return spec;
}

CompressionSpec CompressionSpec::rescaled(CompressionSpec inner, double tau) {
  CompressionSpec spec;
  spec.kind = CompressionKind::kRescaledUnbiased;
  spec.value_bits = inner.value_bits;
  spec.index_cost = inner.index_cost;
  spec.inner = std::make_shared<const CompressionSpec>(std::move(inner));
  spec.tau = tau;
  return spec;
}

CompressionSpec CompressionSpec::resolved(std::size_t d) const {
  CompressionSpec out = *this;
  if (kind == CompressionKind::kRandK || kind == CompressionKind::kTopK) out.k = resolve_k(*this, d);
  if (inner) out.inner = std::make_shared<const CompressionSpec>(inner->resolved(d));
  out.dim = d;
  return out;
}

void validate(const CompressionSpec& spec, std::size_t d) {
  if (d == 0) fail("dimension d must be positive");
  if (spec.dim != 0 && spec.dim != d) {
    fail("dimension mismatch: spec.dim=" + std::to_string(spec.dim) +
         " but x has " + std::to_string(d) + " coordinates");
  }
  if (spec.value_bits == 0) fail("value_bits must be positive");
  switch (spec.kind) {
    case CompressionKind::kIdentity:
      break;
    case CompressionKind::kRandK:
    case CompressionKind::kTopK: {
      const std::size_t k = resolve_k(spec, d);
      if (k == 0) fail("k must be positive");
      if (k > d) fail("k=" + std::to_string(k) + " exceeds dimension d=" + std::to_string(d));
      break;
    }
    case CompressionKind::kQsgd:
      if (spec.levels < 1) fail("levels (s) must be >= 1");
      break;
    case CompressionKind::kRandGossip:
      if (!(spec.probability > 0.0 && spec.probability <= 1.0)) {
        fail("probability must lie in (0, 1]");
      }
      break;
    case CompressionKind::kRescaledUnbiased:
      if (!spec.inner) fail("rescaled operator needs an inner operator");
      if (!(spec.tau >= 1.0) || !std::isfinite(spec.tau)) fail("tau must be finite and >= 1");
      validate(*spec.inner, d);
      if (!is_unbiased(*spec.inner)) fail("inner operator of a rescaled operator must be unbiased");
      break;
  }
}

CompressedMessage compress(const CompressionSpec& spec,
                           const Eigen::Ref<const Eigen::VectorXd>& x, Rng& rng) {
  const auto d = static_cast<std::size_t>(x.size());
  validate(spec, d);
  if (!x.allFinite()) fail("input x contains a non-finite coordinate");

  CompressedMessage message;
  switch (spec.kind) {
    case CompressionKind::kIdentity:
      message.dense_value = x;
      message.nonzeros = d;
      break;
    case CompressionKind::kRandK: {
      const std::size_t k = resolve_k(spec, d);
      message.dense_value = Eigen::VectorXd::Zero(x.size());
      const double scale = spec.unbiased ? static_cast<double>(d) / static_cast<double>(k) : 1.0;
      for (std::size_t i : sample_subset(d, k, rng)) {
        const auto idx = static_cast<Eigen::Index>(i);
        message.dense_value[idx] = scale * x[idx];
      }
      message.nonzeros = k;
      break;
    }
    case CompressionKind::kTopK: {
      const std::size_t k = resolve_k(spec, d);
      std::vector<std::size_t> order(d);
      std::iota(order.begin(), order.end(), std::size_t{0});
      // Strict total order (magnitude, then index) keeps ties deterministic.
      auto larger = [&](std::size_t a, std::size_t b) {
        const double ma = std::abs(x[static_cast<Eigen::Index>(a)]);
        const double mb = std::abs(x[static_cast<Eigen::Index>(b)]);
        return ma > mb || (ma == mb && a < b);
      };
      std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k) - 1,
                       order.end(), larger);
      message.dense_value = Eigen::VectorXd::Zero(x.size());
      for (std::size_t i = 0; i < k; ++i) {
        const auto idx = static_cast<Eigen::Index>(order[i]);
        message.dense_value[idx] = x[idx];
      }
      message.nonzeros = k;
      break;
    }
    case CompressionKind::kQsgd: {
      const double scale = spec.unbiased ? 1.0 : qsgd_tau(spec.levels, d);
      message.dense_value = apply_qsgd(x, spec.levels, scale, rng);
      message.nonzeros = d;
      break;
    }
    case CompressionKind::kRandGossip:
      message.transmitted = rng.uniform() < spec.probability;
      if (message.transmitted) message.dense_value = x;
      else message.dense_value = Eigen::VectorXd::Zero(x.size());
      message.nonzeros = message.transmitted ? d : 0;
      break;
    case CompressionKind::kRescaledUnbiased: {
      CompressedMessage inner = compress(*spec.inner, x, rng);
      message.dense_value = inner.dense_value / spec.tau;
      message.transmitted = inner.transmitted;
      message.nonzeros = inner.nonzeros;
      break;
    }
  }
  message.payload_bits = payload_bits(spec, d, message);
  return message;
}

double qsgd_tau(unsigned levels, std::size_t d) {
  const double s = static_cast<double>(levels);
  const double dd = static_cast<double>(d);
  return 1.0 + std::min(dd / (s * s), std::sqrt(dd) / s);
}

double omega(const CompressionSpec& spec, std::size_t d) {
  validate(spec, d);
  switch (spec.kind) {
    case CompressionKind::kIdentity:
      return 1.0;
    case CompressionKind::kRandK:
    case CompressionKind::kTopK:
      if (spec.unbiased) fail("unbiased rand_k is not contractive; wrap it in a rescaled operator");
      return static_cast<double>(resolve_k(spec, d)) / static_cast<double>(d);
    case CompressionKind::kQsgd:
      if (spec.unbiased) fail("unbiased qsgd is not contractive; wrap it in a rescaled operator");
      return 1.0 / qsgd_tau(spec.levels, d);
    case CompressionKind::kRandGossip:
      return spec.probability;
    case CompressionKind::kRescaledUnbiased:
      return 1.0 / spec.tau;
  }
  return 1.0;
}

bool is_unbiased(const CompressionSpec& spec) {
  switch (spec.kind) {
    case CompressionKind::kIdentity:
      return true;
    case CompressionKind::kRandK:
    case CompressionKind::kQsgd:
      return spec.unbiased;
    case CompressionKind::kRescaledUnbiased:
      return spec.tau == 1.0 && spec.inner && is_unbiased(*spec.inner);
    case CompressionKind::kTopK:
    case CompressionKind::kRandGossip:
      return false;
  }
  return false;
}

unsigned ceil_log2(std::size_t value) {
  unsigned bits = 0;
  std::size_t reach = 1;
  while (reach < value) {
    reach <<= 1;
    ++bits;
  }
  return bits;
}

std::uint64_t payload_bits(const CompressionSpec& spec, std::size_t d,
                           const CompressedMessage& message) {
  const std::uint64_t value_bits = spec.value_bits;
  const std::uint64_t dim = d;
  switch (spec.kind) {
    case CompressionKind::kIdentity:
      return dim * value_bits;
    case CompressionKind::kRandK:
    case CompressionKind::kTopK: {
      const std::uint64_t index_bits = spec.index_cost == IndexCost::kCeilLog2 ? ceil_log2(d) : 0;
      return resolve_k(spec, d) * (value_bits + index_bits);
    }
    case CompressionKind::kQsgd:
      return dim * (1 + ceil_log2(spec.levels)) + value_bits;
    case CompressionKind::kRandGossip:
      return message.transmitted ? dim * value_bits : 0;
    case CompressionKind::kRescaledUnbiased:
      return payload_bits(*spec.inner, d, message);
  }
  return 0;
}

std::string describe(const CompressionSpec& spec) {
  std::ostringstream out;
  switch (spec.kind) {
    case CompressionKind::kIdentity:
      out << "identity";
      break;
    case CompressionKind::kRandK:
      out << (spec.unbiased ? "unbiased_rand_k" : "rand_k");
      if (spec.k) out << "(k=" << spec.k << ")";
      else out << "(fraction=" << spec.k_fraction << ")";
      break;
    case CompressionKind::kTopK:
      out << "top_k";
      if (spec.k) out << "(k=" << spec.k << ")";
      else out << "(fraction=" << spec.k_fraction << ")";
      break;
    case CompressionKind::kQsgd:
      out << (spec.unbiased ? "unbiased_qsgd" : "qsgd") << "(s=" << spec.levels << ")";
      break;
    case CompressionKind::kRandGossip:
      out << "rand_gossip(p=" << spec.probability << ")";
      break;
    case CompressionKind::kRescaledUnbiased:
      out << "rescaled(" << (spec.inner ? describe(*spec.inner) : "?") << ", tau=" << spec.tau << ")";
      break;
  }
  return out.str();
}

}  // namespace compgossip
