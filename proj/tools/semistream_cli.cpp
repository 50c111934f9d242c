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

// semistream command-line front end.  Talks to the library only through the
// C API.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "semistream/semistream.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;

struct Failure {
  int code;
  std::string message;
};

void check(ss_status s, const std::string& what) {
  if (s == SS_OK) return;
  throw Failure{kExitUsage, what + ": " + ss_status_string(s) + ": " + ss_last_error()};
}

struct ModelDeleter {
  void operator()(ss_model* m) const { ss_model_free(m); }
};
struct TensorDeleter {
  void operator()(ss_tensor* t) const { ss_tensor_free(t); }
};
struct ResultDeleter {
  void operator()(ss_result* r) const { ss_result_free(r); }
};
struct StringDeleter {
  void operator()(char* s) const { ss_string_free(s); }
};
using ModelPtr = std::unique_ptr<ss_model, ModelDeleter>;
using TensorPtr = std::unique_ptr<ss_tensor, TensorDeleter>;
using ResultPtr = std::unique_ptr<ss_result, ResultDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

struct Config {
  std::uint64_t seed = 0;
  std::string model;
  std::string image;
  double freq_mhz = 100.0;
  std::string bandwidth_gbps;  // empty: calibrated default
  std::string rounding = "nearest";
  std::string mode = "stream";
  std::string format = "text";
  std::string out;
  double width = 1.0;
  int resolution = 224;
  int trials = 100;
  std::string suite;
  std::string fault = "none";
  bool check_oracle = false;
};

ss_rounding rounding_of(const Config& c) { return c.rounding == "truncate" ? SS_ROUND_TRUNCATE : SS_ROUND_NEAREST; }

// Writes to --out when given, stdout otherwise.
void emit(const Config& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(c.out);
  if (!f) throw Failure{kExitUsage, "cannot write " + c.out};
  f << text;
}

ModelPtr load_model(const Config& c, bool prepare) {
  ss_model* raw = nullptr;
  if (c.model.empty()) {
    check(ss_model_generate(c.width, c.resolution, c.seed, &raw), "generating model");
  } else {
    check(ss_model_load(c.model.c_str(), &raw), "loading " + c.model);
  }
  ModelPtr m(raw);
  if (prepare) check(ss_model_prepare(m.get(), rounding_of(c)), "preparing model");
  return m;
}

int cmd_gen_model(const Config& c) {
  if (c.out.empty()) throw Failure{kExitUsage, "gen-model needs --out"};
  ss_model* raw = nullptr;
  check(ss_model_generate(c.width, c.resolution, c.seed, &raw), "generating model");
  ModelPtr m(raw);
  check(ss_model_save(m.get(), c.out.c_str()), "writing " + c.out);
  char* summary = nullptr;
  check(ss_model_summary(m.get(), &summary), "summarizing model");
  std::cout << StringPtr(summary).get();
  return kExitOk;
}

int cmd_prepare(const Config& c) {
  if (c.model.empty() || c.out.empty()) throw Failure{kExitUsage, "prepare needs --model and --out"};
  ModelPtr m = load_model(c, true);
  check(ss_model_save(m.get(), c.out.c_str()), "writing " + c.out);
  ss_model_info info{};
  check(ss_model_info_get(m.get(), &info), "reading model info");
  std::cout << "prepared " << info.layers << " layers, " << info.rounds << " rounds + " << info.head_entries
            << " head entries, rounding " << c.rounding << "\n";
  return kExitOk;
}

int cmd_infer(const Config& c) {
  ModelPtr m = load_model(c, true);
  ss_tensor* raw_image = nullptr;
  if (c.image.empty()) {
    check(ss_image_random(m.get(), c.seed, &raw_image), "generating image");
  } else {
    check(ss_image_load(c.image.c_str(), m.get(), &raw_image), "loading " + c.image);
  }
  TensorPtr image(raw_image);

  ss_infer_options opt{c.mode == "stream" ? SS_MODE_STREAM : SS_MODE_SEQUENTIAL, 0, 0};
  ss_result* raw_result = nullptr;
  check(ss_infer(m.get(), image.get(), &opt, &raw_result), "inference");
  ResultPtr result(raw_result);

  const ss_tensor* logits = nullptr;
  check(ss_result_logits(result.get(), &logits), "reading logits");
  const std::uint8_t* data = nullptr;
  std::size_t size = 0;
  double scale = 0;
  std::int32_t zero = 0;
  check(ss_tensor_data(logits, &data, &size), "reading logits");
  check(ss_tensor_quant(logits, &scale, &zero), "reading logits");

  std::ostringstream os;
  os << "# logits count=" << size << " scale=" << scale << " zero_point=" << zero << " mode=" << c.mode << "\n";
  os << "# index raw dequantized\n";
  os.precision(9);
  for (std::size_t i = 0; i < size; ++i) {
    os << i << ' ' << static_cast<int>(data[i]) << ' ' << scale * (static_cast<int>(data[i]) - zero) << '\n';
  }
  emit(c, os.str());

  static const char* names[] = {"C2D", "DWC", "PRO", "EXP", "ADD"};
  for (int e = SS_ENGINE_C2D; e <= SS_ENGINE_ADD; ++e) {
    ss_engine_stats s{};
    check(ss_result_engine_stats(result.get(), static_cast<ss_engine>(e), &s), "reading stats");
    std::cerr << "stats engine=" << names[e] << " cycles=" << s.cycles << " madds=" << s.madds
              << " useful_madds=" << s.useful_madds << " weight_bytes=" << s.weight_bytes
              << " output_elements=" << s.output_elements << "\n";
  }

  if (c.check_oracle) {
    ss_tensor* raw_ref = nullptr;
    check(ss_oracle_infer(m.get(), image.get(), &raw_ref), "oracle inference");
    TensorPtr ref(raw_ref);
    const std::uint8_t* ref_data = nullptr;
    std::size_t ref_size = 0;
    check(ss_tensor_data(ref.get(), &ref_data, &ref_size), "reading oracle output");
    for (std::size_t i = 0; i < size; ++i) {
      if (ref_size != size || ref_data[i] != data[i]) {
        std::cerr << "oracle mismatch at logit " << i << "\n";
        return kExitVerifyFailed;
      }
    }
    std::cerr << "oracle: logits match\n";
  }
  return kExitOk;
}

int cmd_verify(const Config& c) {
  ss_verify_options opt{};
  opt.seed = c.seed;
  opt.trials = c.trials;
  opt.rounding = rounding_of(c);
  opt.suite = c.suite.c_str();
  opt.fault = c.fault == "requant-off-by-one" ? SS_FAULT_REQUANT_OFF_BY_ONE : SS_FAULT_NONE;
  int passed = 0;
  char* text = nullptr;
  check(ss_verify(&opt, &passed, &text), "verify");
  std::cout << StringPtr(text).get();
  if (!passed) return kExitVerifyFailed;

  if (!c.model.empty() && c.trials > 0) {
    // End-to-end: seeded images through the streaming pipeline and the oracle.
    ModelPtr m = load_model(c, true);
    for (int t = 0; t < std::min(c.trials, 3); ++t) {
      ss_tensor* raw = nullptr;
      check(ss_image_random(m.get(), c.seed + static_cast<std::uint64_t>(t), &raw), "generating image");
      TensorPtr image(raw);
      ss_infer_options opt_infer{SS_MODE_STREAM, 0, 0};
      ss_result* res = nullptr;
      check(ss_infer(m.get(), image.get(), &opt_infer, &res), "inference");
      ResultPtr result(res);
      ss_tensor* ref_raw = nullptr;
      check(ss_oracle_infer(m.get(), image.get(), &ref_raw), "oracle inference");
      TensorPtr ref(ref_raw);
      const ss_tensor* logits = nullptr;
      check(ss_result_logits(result.get(), &logits), "reading logits");
      const std::uint8_t *a = nullptr, *b = nullptr;
      std::size_t na = 0, nb = 0;
      check(ss_tensor_data(logits, &a, &na), "reading logits");
      check(ss_tensor_data(ref.get(), &b, &nb), "reading oracle output");
      bool same = na == nb;
      std::size_t at = 0;
      for (; same && at < na; ++at) same = a[at] == b[at];
      if (!same) {
        std::cout << "FAIL model end-to-end image seed " << c.seed + t << ": first differing logit " << at - 1 << "\n";
        return kExitVerifyFailed;
      }
    }
    std::cout << "PASS model end-to-end " << std::min(c.trials, 3) << "/" << std::min(c.trials, 3) << "\n";
  }
  return kExitOk;
}

int cmd_report(const Config& c) {
  ModelPtr m = load_model(c, false);
  ss_clock clock = ss_clock_default();
  clock.frequency_hz = c.freq_mhz * 1e6;
  if (!c.bandwidth_gbps.empty()) {
    if (c.bandwidth_gbps == "inf" || c.bandwidth_gbps == "infinite") {
      clock.external_bandwidth = HUGE_VAL;
    } else {
      double gbps = 0;
      try {
        gbps = std::stod(c.bandwidth_gbps);
      } catch (const std::exception&) {
        throw Failure{kExitUsage, "--bandwidth-gbps expects a number or 'inf'"};
      }
      clock.external_bandwidth = gbps * 1e9 / 8;
    }
  }
  char* text = nullptr;
  check(ss_report(m.get(), &clock, c.format == "csv" ? SS_FORMAT_CSV : SS_FORMAT_TEXT, &text), "report");
  emit(c, StringPtr(text).get());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semistream: semi-streaming quantized MobileNetV2 engines"};
  app.require_subcommand(1);
  Config c;

  auto add_seed = [&](CLI::App* s) { s->add_option("--seed", c.seed, "random seed")->capture_default_str(); };
  auto add_rounding = [&](CLI::App* s) {
    s->add_option("--rounding", c.rounding, "requantization rounding")
        ->check(CLI::IsMember({"nearest", "truncate"}))
        ->capture_default_str();
  };
  auto add_shape = [&](CLI::App* s) {
    s->add_option("--width", c.width, "width multiplier")->capture_default_str();
    s->add_option("--resolution", c.resolution, "input resolution (multiple of 32)")->capture_default_str();
  };

  auto* gen = app.add_subcommand("gen-model", "write a seeded MobileNetV2 graph package");
  add_seed(gen);
  add_shape(gen);
  gen->add_option("--out", c.out, "package directory")->required();

  auto* prep = app.add_subcommand("prepare", "derive integer parameters and the round plan");
  prep->add_option("--model", c.model, "graph package")->required();
  prep->add_option("--out", c.out, "prepared package directory")->required();
  add_rounding(prep);

  auto* infer = app.add_subcommand("infer", "run one image through the engines");
  infer->add_option("--model", c.model, "package directory (default: seeded standard model)");
  infer->add_option("--image", c.image, "P6 PPM or RAWHWC image (default: seeded random image)");
  infer->add_option("--mode", c.mode, "execution mode")
      ->check(CLI::IsMember({"stream", "sequential"}))
      ->capture_default_str();
  infer->add_option("--out", c.out, "logits file (default: stdout)");
  infer->add_flag("--check-oracle", c.check_oracle, "compare logits with layer-by-layer oracle evaluation");
  add_seed(infer);
  add_rounding(infer);
  add_shape(infer);

  auto* ver = app.add_subcommand("verify", "engine-vs-oracle and PRO/EXP order suites");
  add_seed(ver);
  add_rounding(ver);
  ver->add_option("--trials", c.trials, "cases per suite")->capture_default_str();
  ver->add_option("--suite", c.suite, "run a single suite");
  ver->add_option("--model", c.model, "also check a package end to end");
  ver->add_option("--inject-fault", c.fault, "test fixture")
      ->check(CLI::IsMember({"none", "requant-off-by-one"}))
      ->group("");

  auto* rep = app.add_subcommand("report", "throughput, bandwidth and per-round timeline");
  rep->add_option("--model", c.model, "package directory (default: seeded standard model)");
  rep->add_option("--freq-mhz", c.freq_mhz, "clock frequency")->capture_default_str();
  rep->add_option("--bandwidth-gbps", c.bandwidth_gbps, "external weight bandwidth in Gb/s, or 'inf' (default 16)");
  rep->add_option("--format", c.format, "output format")->check(CLI::IsMember({"text", "csv"}))->capture_default_str();
  rep->add_option("--out", c.out, "report file (default: stdout)");
  add_seed(rep);
  add_rounding(rep);
  add_shape(rep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_model(c);
    if (prep->parsed()) return cmd_prepare(c);
    if (infer->parsed()) return cmd_infer(c);
    if (ver->parsed()) return cmd_verify(c);
    if (rep->parsed()) return cmd_report(c);
  } catch (const Failure& f) {
    std::cerr << "semistream: " << f.message << "\n";
    return f.code;
  }
  return kExitUsage;
}
