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

#include "perfmodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

#include "errors.hpp"

namespace semistream::perf {

using model::LayerKind;

void ClockConfig::validate() const {
  if (!(frequency_hz > 0) || !std::isfinite(frequency_hz)) throw DomainError("clock frequency must be positive");
  if (!(external_bandwidth > 0)) throw DomainError("external bandwidth must be positive");
}

std::vector<EngineThroughput> throughput_report(const std::array<EngineStats, 5>& stats, const ClockConfig& clock) {
  clock.validate();
  std::vector<EngineThroughput> out;
  for (Engine e : engines::kAllEngines) {
    const auto& s = stats[static_cast<std::size_t>(e)];
    EngineThroughput t{e, 0, 0.0};
    if (s.cycles != 0) {
      t.madds_per_cycle = s.madds / s.cycles;
      // An integral ratio times an integral frequency is exact, so the single
      // rounding in the division lands on the decimal value.
      t.gops = s.madds % s.cycles == 0
                   ? static_cast<double>(t.madds_per_cycle) * clock.frequency_hz / 1e9
                   : static_cast<double>(s.madds) * clock.frequency_hz / static_cast<double>(s.cycles) / 1e9;
    }
    out.push_back(t);
  }
  return out;
}

std::vector<EngineThroughput> throughput_report(const EngineConfig& config, const ClockConfig& clock) {
  std::array<EngineStats, 5> stats{};
  for (Engine e : engines::kAllEngines) {
    auto& s = stats[static_cast<std::size_t>(e)];
    s.cycles = 1;
    s.madds = engines::madds_per_cycle(e, config);
  }
  return throughput_report(stats, clock);
}

std::array<EngineStats, 5> model_engine_stats(const model::PreparedModel& model, const EngineConfig& config) {
  std::array<EngineStats, 5> out{};
  for (const auto& l : model.graph.layers) {
    out[static_cast<std::size_t>(engines::engine_for(l.kind))] += engines::analytic_stats(l, config);
  }
  return out;
}

std::vector<EngineBandwidth> bandwidth_report(const model::PreparedModel& model, const ClockConfig& clock) {
  clock.validate();
  std::vector<EngineBandwidth> out;
  for (Engine e : engines::kAllEngines) {
    EngineBandwidth b{e, 0, 0, 0, 0, 0.0};
    if (e == Engine::ADD) {
      b.word_bits = 8 * kBatchLanes;
      b.bits_per_cycle = static_cast<std::uint64_t>(b.word_bits);
    } else if (e != Engine::C2D) {
      const LayerKind kind = e == Engine::DWC ? LayerKind::DWC : (e == Engine::PRO ? LayerKind::PRO : LayerKind::EXP);
      for (const auto& l : model.graph.layers) {
        if (l.kind != kind || !l.filters) continue;
        const auto img = engines::layout_weights(kind, *l.filters, l.bias_bits);
        b.memories = img.memory_count;
        b.word_bits = img.word_bits;
        b.bias_bits = img.bias_word_bits;
        b.bits_per_cycle = static_cast<std::uint64_t>(img.bits_per_cycle());
        break;
      }
    }
    b.gbps = static_cast<double>(b.bits_per_cycle) * clock.frequency_hz / 1e9;
    out.push_back(b);
  }
  return out;
}

std::string to_string(Limiting l) { return l == Limiting::Compute ? "compute" : "bandwidth"; }

std::uint64_t load_cycles(std::uint64_t bytes, const ClockConfig& clock) {
  clock.validate();
  if (bytes == 0 || std::isinf(clock.external_bandwidth)) return 0;
  return static_cast<std::uint64_t>(std::ceil(static_cast<double>(bytes) * clock.frequency_hz / clock.external_bandwidth));
}

std::vector<TimelineEntry> estimate_timeline(const model::PreparedModel& model, const ClockConfig& clock) {
  clock.validate();
  const int n = static_cast<int>(model.graph.layers.size());
  auto layer = [&](int i, const model::RoundPlan& r) -> const model::LayerDesc& {
    if (i >= n) throw PlanError("round " + std::to_string(r.round_index) + " references a missing layer");
    return model.layer(i);
  };
  std::vector<TimelineEntry> out;
  std::uint64_t t = 0;
  for (const auto& r : model.rounds) {
    TimelineEntry e;
    e.round_index = r.round_index;
    e.head = r.head;
    const std::uint64_t c2d = r.c2d >= 0 ? engines::analytic_cycles(layer(r.c2d, r)) : 0;
    e.c2d = {t, t + c2d};
    const std::uint64_t dwc = r.dwc >= 0 ? engines::analytic_cycles(layer(r.dwc, r)) : 0;
    e.dwc = {e.c2d.end, e.c2d.end + dwc};
    e.weight_load_bytes = r.pro_weight_bytes + r.exp_weight_bytes;
    e.load = {t, t + load_cycles(e.weight_load_bytes, clock)};
    if (r.pro >= 0) {
      const auto& pro = layer(r.pro, r);
      e.pro_cycles = engines::analytic_cycles(pro);
      e.add_cycles = r.add >= 0 ? engines::analytic_cycles(layer(r.add, r))
                                : pro.out.pixels() * static_cast<std::uint64_t>(pro.out.channels / kBatchLanes);
    }
    if (r.exp >= 0) e.exp_cycles = engines::analytic_cycles(layer(r.exp, r));
    const std::uint64_t start2 = std::max(e.dwc.end, e.load.end);
    e.stage2 = {start2, start2 + std::max({e.pro_cycles, e.add_cycles, e.exp_cycles})};
    e.limiting = e.load.end > e.dwc.end ? Limiting::Bandwidth : Limiting::Compute;
    t = e.stage2.end;
    out.push_back(e);
  }
  return out;
}

Latency total_latency(const std::vector<TimelineEntry>& timeline, const ClockConfig& clock) {
  clock.validate();
  Latency l;
  if (timeline.empty()) return l;
  l.cycles = timeline.back().end_cycle();
  l.milliseconds = static_cast<double>(l.cycles) / clock.frequency_hz * 1e3;
  l.fps = l.milliseconds > 0 ? 1000.0 / l.milliseconds : 0.0;
  return l;
}

double normalize_performance(double gops, double freq_mhz, int dsps, double ref_freq_mhz, int ref_dsps) {
  if (!(gops > 0) || !(freq_mhz > 0) || dsps <= 0 || !(ref_freq_mhz > 0) || ref_dsps <= 0) {
    throw DomainError("normalize_performance needs positive arguments");
  }
  return gops * (ref_freq_mhz / freq_mhz) * (static_cast<double>(ref_dsps) / dsps);
}

// ---------------------------------------------------------------------------

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

Report build_report(const model::PreparedModel& model, const ClockConfig& clock, const EngineConfig& config) {
  Report r;
  r.clock = clock;
  r.throughput = throughput_report(model_engine_stats(model, config), clock);
  r.bandwidth = bandwidth_report(model, clock);
  r.timeline = estimate_timeline(model, clock);
  r.latency = total_latency(r.timeline, clock);
  return r;
}

namespace {

std::string round_label(const TimelineEntry& e) { return e.head ? "head" : std::to_string(e.round_index); }

double gbps_of(double bytes_per_second) { return bytes_per_second * 8 / 1e9; }

void write_text(std::ostream& os, const Report& r) {
  os << "# clock " << format_number(r.clock.frequency_hz / 1e6) << " MHz, external bandwidth "
     << format_number(gbps_of(r.clock.external_bandwidth)) << " Gb/s\n";
  os << "# timeline counts engine processing and weight loads only; C2D weight preload,\n"
     << "# image input streaming and result readout are excluded\n";
  for (const auto& t : r.throughput) {
    os << "throughput engine=" << engines::to_string(t.engine) << " madds_per_cycle=" << t.madds_per_cycle
       << " gops=" << format_number(t.gops) << '\n';
  }
  for (const auto& b : r.bandwidth) {
    os << "bandwidth engine=" << engines::to_string(b.engine) << " memories=" << b.memories
       << " word_bits=" << b.word_bits << " bias_bits=" << b.bias_bits << " bits_per_cycle=" << b.bits_per_cycle
       << " gbps=" << format_number(b.gbps) << '\n';
  }
  for (const auto& e : r.timeline) {
    os << "round " << round_label(e) << " start=" << e.start_cycle() << " c2d=" << e.c2d.cycles()
       << " dwc=" << e.dwc.cycles() << " load_bytes=" << e.weight_load_bytes << " load=" << e.load.cycles()
       << " stage2_start=" << e.stage2.start << " pro=" << e.pro_cycles << " add=" << e.add_cycles
       << " exp=" << e.exp_cycles << " end=" << e.end_cycle() << " limiting=" << to_string(e.limiting) << '\n';
  }
  os << "total cycles=" << r.latency.cycles << " latency_ms=" << format_number(r.latency.milliseconds)
     << " fps=" << format_number(r.latency.fps) << '\n';
}

void write_csv(std::ostream& os, const Report& r) {
  os << "engine,madds_per_cycle,gops\n";
  for (const auto& t : r.throughput) {
    os << engines::to_string(t.engine) << ',' << t.madds_per_cycle << ',' << format_number(t.gops) << '\n';
  }
  os << "\nengine,memories,word_bits,bias_bits,bits_per_cycle,gbps\n";
  for (const auto& b : r.bandwidth) {
    os << engines::to_string(b.engine) << ',' << b.memories << ',' << b.word_bits << ',' << b.bias_bits << ','
       << b.bits_per_cycle << ',' << format_number(b.gbps) << '\n';
  }
  os << "\nround,start_cycle,c2d_cycles,dwc_start,dwc_end,load_bytes,load_cycles,load_end,stage2_start,stage2_end,"
        "pro_cycles,add_cycles,exp_cycles,end_cycle,limiting\n";
  for (const auto& e : r.timeline) {
    os << round_label(e) << ',' << e.start_cycle() << ',' << e.c2d.cycles() << ',' << e.dwc.start << ',' << e.dwc.end
       << ',' << e.weight_load_bytes << ',' << e.load.cycles() << ',' << e.load.end << ',' << e.stage2.start << ','
       << e.stage2.end << ',' << e.pro_cycles << ',' << e.add_cycles << ',' << e.exp_cycles << ',' << e.end_cycle()
       << ',' << to_string(e.limiting) << '\n';
  }
  os << "\ntotal_cycles,latency_ms,fps,frequency_mhz,bandwidth_gbps\n";
  os << r.latency.cycles << ',' << format_number(r.latency.milliseconds) << ',' << format_number(r.latency.fps) << ','
     << format_number(r.clock.frequency_hz / 1e6) << ',' << format_number(gbps_of(r.clock.external_bandwidth)) << '\n';
}

}  // namespace

void write_report(std::ostream& os, const Report& report, Format format) {
  if (format == Format::Csv) {
    write_csv(os, report);
  } else {
    write_text(os, report);
  }
}

}  // namespace semistream::perf
