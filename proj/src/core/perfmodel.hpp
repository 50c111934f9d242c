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

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "engines.hpp"
#include "model.hpp"

namespace semistream::perf {

using engines::Engine;
using engines::EngineConfig;
using engines::EngineStats;

/// External weight-bus bandwidth (bytes/s) that lands the 224x224 plan near
/// 10.6 ms with compute-limited rounds up to 12 and bandwidth-limited rounds
/// from 13 on.  16 Gb/s.
inline constexpr double kCalibratedBandwidth = 2.0e9;
inline constexpr double kUnlimitedBandwidth = std::numeric_limits<double>::infinity();

struct ClockConfig {
  double frequency_hz = 100e6;
  double external_bandwidth = kCalibratedBandwidth;  // bytes per second

  /// DomainError unless both are positive (bandwidth may be infinite).
  void validate() const;
};

struct EngineThroughput {
  Engine engine = Engine::C2D;
  std::uint64_t madds_per_cycle = 0;
  double gops = 0;
};

/// GOp/s per engine from the MADD/cycle ratio of fully pipelined stats.
/// Engines with zero cycles report zero.
std::vector<EngineThroughput> throughput_report(const std::array<EngineStats, 5>& stats, const ClockConfig& clock);

/// Same, from the per-cycle constants directly.
std::vector<EngineThroughput> throughput_report(const EngineConfig& config, const ClockConfig& clock);

/// Analytic stats summed per engine over the layers each engine really runs
/// (pass-through ADD rounds excluded).
std::array<EngineStats, 5> model_engine_stats(const model::PreparedModel& model, const EngineConfig& config = {});

struct EngineBandwidth {
  Engine engine = Engine::C2D;
  int memories = 0;
  int word_bits = 0;
  int bias_bits = 0;
  std::uint64_t bits_per_cycle = 0;
  double gbps = 0;
};

/// Parameter-memory read bandwidth: one word per memory per cycle.  C2D keeps
/// its weights in registers and reports zero; ADD reports its 128-bit stream.
std::vector<EngineBandwidth> bandwidth_report(const model::PreparedModel& model, const ClockConfig& clock);

struct Span {
  std::uint64_t start = 0;
  std::uint64_t end = 0;

  std::uint64_t cycles() const { return end - start; }
  bool operator==(const Span&) const = default;
};

enum class Limiting : std::uint8_t { Compute, Bandwidth };
std::string to_string(Limiting l);

struct TimelineEntry {
  int round_index = 0;
  bool head = false;
  Span c2d;
  Span dwc;
  Span load;
  Span stage2;
  std::uint64_t weight_load_bytes = 0;
  std::uint64_t pro_cycles = 0;
  std::uint64_t add_cycles = 0;
  std::uint64_t exp_cycles = 0;
  Limiting limiting = Limiting::Compute;

  std::uint64_t start_cycle() const { return c2d.cycles() ? c2d.start : dwc.start; }
  std::uint64_t end_cycle() const { return stage2.end; }
};

/// Cycles to move `bytes` over the external bus; zero when unlimited.
std::uint64_t load_cycles(std::uint64_t bytes, const ClockConfig& clock);

/// Serialized per-round timeline.  Weights for a round's PRO and EXP slots
/// stream in while DWC runs; stage 2 starts when both are done.
std::vector<TimelineEntry> estimate_timeline(const model::PreparedModel& model, const ClockConfig& clock);

struct Latency {
  std::uint64_t cycles = 0;
  double milliseconds = 0;
  double fps = 0;
};

Latency total_latency(const std::vector<TimelineEntry>& timeline, const ClockConfig& clock);

/// Scales a design's GOp/s to 100 MHz and 608 DSPs assuming linear scaling.
double normalize_performance(double gops, double freq_mhz, int dsps, double ref_freq_mhz = 100.0,
                             int ref_dsps = 608);

// ---------------------------------------------------------------------------
// Reports

enum class Format : std::uint8_t { Text, Csv };

struct Report {
  ClockConfig clock;
  std::vector<EngineThroughput> throughput;
  std::vector<EngineBandwidth> bandwidth;
  std::vector<TimelineEntry> timeline;
  Latency latency;
};

Report build_report(const model::PreparedModel& model, const ClockConfig& clock, const EngineConfig& config = {});
void write_report(std::ostream& os, const Report& report, Format format);

/// Shortest round-trip decimal with at least one fractional digit (16.0, 89.6).
std::string format_number(double v);

}  // namespace semistream::perf
