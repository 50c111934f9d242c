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

#include "verify.hpp"

#include <functional>
#include <ostream>
#include <sstream>

#include "engines.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "oracle.hpp"

namespace semistream::verify {

using model::LayerDesc;
using model::LayerKind;

namespace {

struct Case {
  std::string description;
  QTensor expected;
  QTensor actual;
};

int pick(model::Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::string describe(const LayerDesc& l) {
  std::ostringstream os;
  os << model::to_string(l.kind) << " in " << l.in.height << "x" << l.in.width << "x" << l.in.channels << " out "
     << l.out.height << "x" << l.out.width << "x" << l.out.channels << " stride " << l.stride;
  return os.str();
}

void inject(LayerDesc& l, Fault fault) {
  if (fault != Fault::RequantOffByOne) return;
  for (auto& r : l.requant) ++r.out_zero;
  if (l.add) ++l.add->out_zero;
}

// Small random layer; logical channel counts are often not multiples of 16 so
// the engine runs the padded copy while the oracle runs the original.
Case single_input_case(LayerKind kind, model::Rng& rng, const Options& opt) {
  const int h = pick(rng, 1, 9);
  const int w = pick(rng, 1, 9);
  int c = kind == LayerKind::C2D ? 3 : pick(rng, 1, 64);
  if (kind == LayerKind::AVGPOOL) c = 16 * pick(rng, 1, 4);
  const int m = pick(rng, 1, 64);
  const int stride = (kind == LayerKind::C2D || kind == LayerKind::DWC) ? pick(rng, 1, 2) : 1;
  const LayerDesc raw = model::random_layer(kind, Dims{h, w, c}, m, stride, rng);
  const LayerDesc exact = model::prepare_layer(raw, opt.rounding);
  LayerDesc padded = model::pad_channels(exact);
  inject(padded, opt.fault);

  const QTensor input = model::random_tensor(raw.in, raw.in_q, rng);
  Case out;
  out.description = describe(raw);
  out.expected = oracle::naive_quant_layer(input, exact, opt.rounding);
  const QTensor engine_in = kind == LayerKind::C2D ? input : pad_tensor(input, padded.in.channels);
  out.actual = engines::run_layer(engine_in, padded, opt.rounding).output;
  return out;
}

Case add_case(model::Rng& rng, const Options& opt) {
  const Dims d{pick(rng, 1, 9), pick(rng, 1, 9), pick(rng, 1, 64)};
  const LayerDesc raw = model::random_layer(LayerKind::ADD, d, 0, 1, rng);
  const LayerDesc exact = model::prepare_layer(raw, opt.rounding);
  LayerDesc padded = model::pad_channels(exact);
  inject(padded, opt.fault);
  const QTensor a = model::random_tensor(d, raw.in_q, rng);
  const QTensor b = model::random_tensor(d, raw.residual_q, rng);
  Case out;
  out.description = describe(raw);
  out.expected = oracle::naive_quant_layer(a, b, exact, opt.rounding);
  out.actual = engines::add_forward(pad_tensor(a, padded.in.channels), pad_tensor(b, padded.in.channels), padded,
                                    opt.rounding)
                   .output;
  return out;
}

Case order_case(model::Rng& rng, const Options& opt) {
  const Dims d{pick(rng, 1, 8), pick(rng, 1, 8), 16 * pick(rng, 1, 4)};
  const int m = 16 * pick(rng, 1, 4);
  LayerDesc layer = model::pad_channels(model::prepare_layer(model::random_layer(LayerKind::PRO, d, m, 1, rng),
                                                             opt.rounding));
  const QTensor input = model::random_tensor(d, layer.in_q, rng);
  Case out;
  out.description = "PRO vs EXP order, " + describe(layer);
  out.expected = engines::pro_forward(input, layer, opt.rounding).output;
  inject(layer, opt.fault);
  out.actual = engines::exp_forward(input, layer, opt.rounding).output;
  return out;
}

struct Suite {
  const char* name;
  std::function<Case(model::Rng&, const Options&)> make;
};

const std::vector<Suite>& suites() {
  static const std::vector<Suite> all = {
      {"c2d", [](model::Rng& r, const Options& o) { return single_input_case(LayerKind::C2D, r, o); }},
      {"dwc", [](model::Rng& r, const Options& o) { return single_input_case(LayerKind::DWC, r, o); }},
      {"avgpool", [](model::Rng& r, const Options& o) { return single_input_case(LayerKind::AVGPOOL, r, o); }},
      {"pro", [](model::Rng& r, const Options& o) { return single_input_case(LayerKind::PRO, r, o); }},
      {"exp", [](model::Rng& r, const Options& o) { return single_input_case(LayerKind::EXP, r, o); }},
      {"add", [](model::Rng& r, const Options& o) { return add_case(r, o); }},
      {"pro-exp-order", [](model::Rng& r, const Options& o) { return order_case(r, o); }},
  };
  return all;
}

// Compares the expected tensor against the (possibly channel-padded) actual.
std::optional<Mismatch> compare(const Case& c) {
  const Dims& d = c.expected.dims;
  if (c.actual.dims.height != d.height || c.actual.dims.width != d.width || c.actual.dims.channels < d.channels) {
    Mismatch m;
    m.case_description = c.description + " (output shape differs)";
    return m;
  }
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      for (int ch = 0; ch < d.channels; ++ch) {
        const int e = c.expected.at(y, x, ch);
        const int a = c.actual.at(y, x, ch);
        if (e != a) return Mismatch{0, 0, c.description, y, x, ch, e, a};
      }
    }
  }
  return std::nullopt;
}

}  // namespace

bool Report::ok() const {
  for (const auto& s : suites) {
    if (s.first_mismatch) return false;
  }
  return true;
}

int Report::trials_run() const {
  int n = 0;
  for (const auto& s : suites) n += s.trials;
  return n;
}

std::vector<std::string> suite_names() {
  std::vector<std::string> out;
  for (const auto& s : suites()) out.emplace_back(s.name);
  return out;
}

Report run(const Options& options) {
  if (options.trials < 0) throw DomainError("trial count must be non-negative");
  bool matched = options.suite.empty();
  Report report;
  for (const auto& suite : suites()) {
    if (!options.suite.empty() && options.suite != suite.name) continue;
    matched = true;
    SuiteResult r;
    r.name = suite.name;
    for (int t = 0; t < options.trials; ++t) {
      const std::uint64_t seed = options.seed + static_cast<std::uint64_t>(t);
      model::Rng rng(seed);
      ++r.trials;
      auto mismatch = compare(suite.make(rng, options));
      if (!mismatch) {
        ++r.passed;
        continue;
      }
      mismatch->trial = t;
      mismatch->trial_seed = seed;
      r.first_mismatch = std::move(mismatch);
      break;
    }
    report.suites.push_back(std::move(r));
  }
  if (!matched) throw DomainError("unknown verify suite " + options.suite);
  return report;
}

void write(std::ostream& os, const Report& report, const Options& options) {
  if (options.trials == 0) os << "warning: --trials 0, no cases were run\n";
  for (const auto& s : report.suites) {
    os << (s.first_mismatch ? "FAIL " : "PASS ") << s.name << " " << s.passed << "/" << s.trials << '\n';
    if (!s.first_mismatch) continue;
    const auto& m = *s.first_mismatch;
    os << "  first mismatch at trial " << m.trial << ": " << m.case_description << '\n'
       << "  element (row " << m.row << ", col " << m.col << ", channel " << m.channel << "): expected " << m.expected
       << ", engine produced " << m.actual << '\n'
       << "  reproduce: semistream verify --suite " << s.name << " --seed " << m.trial_seed << " --trials 1"
       << (options.rounding == quant::Rounding::Truncate ? " --rounding truncate" : "") << '\n';
  }
  os << (report.ok() ? "verify: ok" : "verify: FAILED") << " (" << report.trials_run() << " cases)\n";
}

}  // namespace semistream::verify
