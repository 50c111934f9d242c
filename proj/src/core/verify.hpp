/*
 * Copyright 2026 The Semistream Authors. All Rights Reserved
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "quantcore.hpp"

namespace semistream::verify {

enum class Fault : std::uint8_t {
  None,
  // Engine-side requantization lands one code above the exact result.
  RequantOffByOne,
};

struct Options {
  std::uint64_t seed = 0;
  int trials = 100;
  quant::Rounding rounding = quant::Rounding::Nearest;
  // Empty runs every suite.
  std::string suite;
  Fault fault = Fault::None;
};

struct Mismatch {
  int trial = 0;
  std::uint64_t trial_seed = 0;
  std::string case_description;
  int row = 0;
  int col = 0;
  int channel = 0;
  int expected = 0;
  int actual = 0;
};

struct SuiteResult {
  std::string name;
  int trials = 0;
  int passed = 0;
  std::optional<Mismatch> first_mismatch;
};

struct Report {
  std::vector<SuiteResult> suites;

  bool ok() const;
  int trials_run() const;
};

/// Names accepted by Options::suite.
std::vector<std::string> suite_names();

/// Engine-vs-oracle suites per engine plus PRO/EXP order equivalence.  Trial
/// t of a suite draws its case from seed + t, so a failing case reruns with
/// --seed <trial_seed> --trials 1.
Report run(const Options& options);

void write(std::ostream& os, const Report& report, const Options& options);

}  // namespace semistream::verify
