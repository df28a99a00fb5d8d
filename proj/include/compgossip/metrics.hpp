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

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace compgossip {

/// One evaluation point of a run. Consensus runs fill (error, lyapunov,
/// mean_drift); optimisation runs fill (subopt, dispersion, eta) into the
/// same slots, see the CSV column lists below.
struct MetricsRecord {
  std::uint64_t iter = 0;
  double value = 0.0;      // error | subopt
  double spread = 0.0;     // lyapunov | dispersion
  std::uint64_t bits = 0;  // cumulative transmitted bits before this iteration
  double aux = 0.0;        // mean_drift | eta
};

inline constexpr const char* kConsensusColumns[] = {"iter", "error", "lyapunov", "bits", "mean_drift"};
inline constexpr const char* kOptimizeColumns[] = {"iter", "subopt", "dispersion", "bits", "eta"};

/// Raised when a run leaves its stability envelope.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::uint64_t iteration, const std::string& what)
      : std::runtime_error("diverged at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::uint64_t iteration() const { return iteration_; }

 private:
  std::uint64_t iteration_;
};

}  // namespace compgossip
