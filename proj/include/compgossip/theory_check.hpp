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
#include <ostream>
#include <string>
#include <vector>

namespace compgossip {

enum class CheckKind { kThm1, kThm2, kMixingLemma, kOmegaContract, kRemark1, kAll };

/// Parses thm1 | thm2 | mixing_lemma | omega_contract | remark1 | all.
CheckKind parse_check_kind(const std::string& name);
std::string to_string(CheckKind kind);

/// One assertion: `value` must not exceed `bound`.
struct CheckLine {
  std::string check;
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct CheckReport {
  std::vector<CheckLine> lines;
  bool ok() const;
};

/// Runs the built-in fixtures for `kind`. Deterministic for a fixed seed.
CheckReport theory_check(CheckKind kind, std::uint64_t seed = 1);

/// check=<kind> case=<name> status=pass|fail value=<v> bound=<b>
void write_check_lines(std::ostream& out, const CheckReport& report);
/// check,case,status,value,bound
void write_check_csv(std::ostream& out, const CheckReport& report);

}  // namespace compgossip
