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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "dataflow.hpp"
#include "engines.hpp"
#include "errors.hpp"
#include "oracle.hpp"
#include "package.hpp"
#include "quantcore.hpp"
#include "test_support.hpp"
#include "verify.hpp"

using namespace semistream;
using model::LayerKind;
using model::Rng;
using quant::Rounding;

namespace {

int pick(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// Nearest integer of x * mult / 2^shift, ties away from zero, in exact
// 128-bit arithmetic.
__int128 nearest_product(__int128 x, __int128 mant, int exp2) {
  // x * mant * 2^exp2 with exp2 <= 0
  const __int128 num = x * mant;
  const int shift = -exp2;
  if (shift == 0) return num;
  const __int128 den = static_cast<__int128>(1) << shift;
  const bool neg = num < 0;
  const __int128 mag = neg ? -num : num;
  const __int128 q = (2 * mag + den) / (2 * den);
  return neg ? -q : q;
}

}  // namespace

TEST_CASE("requantize tracks the exact product within one unit") {
  Rng rng(2024);
  std::uniform_real_distribution<double> um(std::ldexp(1.0, -20), 1.0 - std::ldexp(1.0, -20));
  std::uniform_int_distribution<int> ux(-(1 << 20), 1 << 20);
  for (int i = 0; i < 100000; ++i) {
    const double m = um(rng);
    const int x = ux(rng);
    int e = 0;
    const double frac = std::frexp(m, &e);
    const auto mant = static_cast<__int128>(std::ldexp(frac, 53));
    const __int128 want = nearest_product(x, mant, e - 53);
    for (auto mode : {Rounding::Nearest, Rounding::Truncate}) {
      const quant::RequantParams p{quant::quantize_multiplier(m, mode), 0, 0, 255};
      const __int128 got = quant::requantize(x, p, mode);
      REQUIRE(got - want <= 1);
      REQUIRE(want - got <= 1);
    }
  }
}

TEST_CASE("quantize_multiplier is monotone") {
  Rng rng(1);
  std::uniform_real_distribution<double> exponent(-24.0, 0.0);
  std::vector<double> ms;
  for (int i = 0; i < 20000; ++i) ms.push_back(std::min(std::exp2(exponent(rng)), 1.0 - 1e-12));
  std::sort(ms.begin(), ms.end());
  for (auto mode : {Rounding::Nearest, Rounding::Truncate}) {
    double prev = 0;
    for (double m : ms) {
      const double v = quant::quantize_multiplier(m, mode).value();
      REQUIRE(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("requantize of zero is the zero point") {
  Rng rng(2);
  std::uniform_int_distribution<std::uint32_t> mult(1u << 31, 0xffffffffu);
  for (int i = 0; i < 10000; ++i) {
    const quant::RequantParams p{{mult(rng), static_cast<std::uint8_t>(pick(rng, 32, 60))}, pick(rng, -300, 300), 0, 255};
    REQUIRE(quant::requantize(0, p, Rounding::Nearest) == p.out_zero);
    REQUIRE(quant::requantize(0, p, Rounding::Truncate) == p.out_zero);
  }
}

TEST_CASE("batch-norm folding commutes with convolution") {
  Rng rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    oracle::RealFilters f{3, 3, 4, 4, {}, {}};
    for (int i = 0; i < 3 * 3 * 4 * 4; ++i) f.weights.push_back(n(rng));
    for (int i = 0; i < 4; ++i) f.bias.push_back(n(rng));
    quant::BatchNormParams bn;
    for (int c = 0; c < 4; ++c) {
      bn.gamma.push_back(0.2 + std::fabs(n(rng)));
      bn.beta.push_back(n(rng));
      bn.mean.push_back(n(rng));
      bn.variance.push_back(0.05 + std::fabs(n(rng)));
    }
    FloatTensor x{Dims{6, 5, 4}, {}};
    for (std::size_t i = 0; i < x.dims.elements(); ++i) x.data.push_back(n(rng));

    const auto folded = quant::fold_batch_norm(f.weights, f.bias, bn);
    oracle::RealFilters g = f;
    g.weights = folded.weights;
    g.bias = folded.bias;
    const auto a = oracle::float_conv(x, g, 1, false);
    const auto b = oracle::float_conv(x, f, 1, false);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      const int c = static_cast<int>(i % 4);
      const double want = bn.gamma[c] * (b.data[i] - bn.mean[c]) / std::sqrt(bn.variance[c] + bn.epsilon) + bn.beta[c];
      REQUIRE(std::fabs(a.data[i] - want) <= 1e-5 * std::max(1.0, std::fabs(want)));
    }
  }
}

TEST_CASE("narrow_bias round trips whenever it succeeds") {
  Rng rng(4);
  std::uniform_int_distribution<std::int32_t> any(-(1 << 20), 1 << 20);
  int accepted = 0;
  for (int i = 0; i < 100000; ++i) {
    const std::int32_t b = any(rng);
    for (int bits : {16, 18}) {
      std::int32_t narrow = 0;
      try {
        narrow = quant::narrow_bias(b, bits);
      } catch (const RangeError&) {
        REQUIRE((b < -(1 << (bits - 1)) || b >= (1 << (bits - 1))));
        continue;
      }
      REQUIRE(narrow == b);
      ++accepted;
    }
  }
  CHECK(accepted > 10000);
}

TEST_CASE("channel padding is neutral for random layers") {
  Rng rng(5);
  for (int trial = 0; trial < 120; ++trial) {
    const LayerKind kind = std::array{LayerKind::C2D, LayerKind::DWC, LayerKind::EXP, LayerKind::PRO,
                                      LayerKind::AVGPOOL, LayerKind::ADD}[trial % 6];
    const Dims in{pick(rng, 1, 7), pick(rng, 1, 7), kind == LayerKind::C2D ? 3 : pick(rng, 1, 40)};
    const auto raw = model::random_layer(kind, in, pick(rng, 1, 40), pick(rng, 1, 2), rng);
    const auto exact = model::prepare_layer(raw, Rounding::Nearest);
    const auto padded = model::pad_channels(exact);
    const QTensor x = model::random_tensor(raw.in, raw.in_q, rng);
    const QTensor px = kind == LayerKind::C2D ? x : pad_tensor(x, padded.in.channels);
    QTensor want, got;
    if (kind == LayerKind::ADD) {
      const QTensor r = model::random_tensor(raw.in, raw.residual_q, rng);
      want = oracle::naive_quant_layer(x, r, exact);
      got = engines::add_forward(px, pad_tensor(r, padded.in.channels), padded).output;
      REQUIRE(oracle::naive_quant_layer(px, pad_tensor(r, padded.in.channels), padded) == got);
    } else {
      want = oracle::naive_quant_layer(x, exact);
      got = engines::run_layer(px, padded, Rounding::Nearest).output;
      REQUIRE(oracle::naive_quant_layer(px, padded) == got);
    }
    REQUIRE(got.dims.channels % 16 == 0);
    for (std::size_t p = 0; p < want.dims.pixels(); ++p) {
      for (int c = 0; c < got.dims.channels; ++c) {
        if (c < want.dims.channels) {
          REQUIRE(got.pixel(p)[c] == want.pixel(p)[c]);
        } else {
          REQUIRE(int(got.pixel(p)[c]) == padded.out_q.zero_point);
        }
      }
    }
  }
}

TEST_CASE("engines match the oracle on at least 100 seeds each") {
  for (auto rounding : {Rounding::Nearest, Rounding::Truncate}) {
    verify::Options o;
    o.seed = 7000;
    o.trials = 100;
    o.rounding = rounding;
    const auto report = verify::run(o);
    CHECK(report.ok());
    for (const auto& s : report.suites) {
      INFO(s.name);
      CHECK(s.trials == 100);
      CHECK(s.passed == 100);
    }
  }
}

TEST_CASE("stride-2 convolutions match the oracle") {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const bool entry = trial % 2 == 0;
    const Dims in{pick(rng, 1, 12), pick(rng, 1, 12), entry ? 3 : pick(rng, 1, 48)};
    const auto raw = model::random_layer(entry ? LayerKind::C2D : LayerKind::DWC, in, 32, 2, rng);
    const auto exact = model::prepare_layer(raw, Rounding::Nearest);
    const auto padded = model::pad_channels(exact);
    const QTensor x = model::random_tensor(in, raw.in_q, rng);
    const QTensor got = engines::run_layer(entry ? x : pad_tensor(x, padded.in.channels), padded, Rounding::Nearest).output;
    REQUIRE(dataflow::unpad_channels(got, exact.out.channels) == oracle::naive_quant_layer(x, exact));
  }
}

TEST_CASE("projection and expansion orders agree on 200 layers") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const Dims in{pick(rng, 1, 8), pick(rng, 1, 8), 16 * pick(rng, 1, 4)};
    const auto layer = testing::finish(model::random_layer(LayerKind::PRO, in, 16 * pick(rng, 1, 4), 1, rng),
                                       trial % 3 ? Rounding::Nearest : Rounding::Truncate);
    const QTensor x = model::random_tensor(in, layer.in_q, rng);
    const auto rounding = trial % 3 ? Rounding::Nearest : Rounding::Truncate;
    REQUIRE(engines::pro_forward(x, layer, rounding).output == engines::exp_forward(x, layer, rounding).output);
  }
}

TEST_CASE("dequantized outputs stay within two LSB of the float reference") {
  Rng rng(9);
  double total_error = 0;
  std::size_t count = 0;
  double worst = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const LayerKind kind = std::array{LayerKind::C2D, LayerKind::DWC, LayerKind::EXP, LayerKind::PRO,
                                      LayerKind::AVGPOOL, LayerKind::ADD}[trial % 6];
    const Dims in{pick(rng, 1, 8), pick(rng, 1, 8), kind == LayerKind::C2D ? 3 : 16 * pick(rng, 1, 3)};
    const auto raw = model::random_layer(kind, in, 16 * pick(rng, 1, 3), pick(rng, 1, 2), rng, model::LayerStyle::Benign);
    const auto layer = testing::finish(raw);
    const QTensor x = model::random_tensor(in, raw.in_q, rng);
    QTensor y;
    FloatTensor ref;
    if (kind == LayerKind::ADD) {
      const QTensor r = model::random_tensor(in, raw.residual_q, rng);
      y = engines::add_forward(x, r, layer).output;
      const FloatTensor fr = dequantize(r);
      ref = oracle::float_layer(dequantize(x), raw, &fr);
    } else {
      y = engines::run_layer(x, layer, Rounding::Nearest).output;
      ref = oracle::float_layer(dequantize(x), raw);
    }
    oracle::clamp_to_range(ref, raw.out_q);
    const FloatTensor got = dequantize(y);
    REQUIRE(got.dims == ref.dims);
    for (std::size_t i = 0; i < ref.data.size(); ++i) {
      const double lsb = std::fabs(got.data[i] - ref.data[i]) / raw.out_q.scale;
      worst = std::max(worst, lsb);
      total_error += lsb;
      ++count;
    }
  }
  CHECK(worst <= 2.0);
  CHECK(total_error / count <= 0.5);
}

TEST_CASE("package round trip for 100 seeded models") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "semistream_properties_pkg";
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto config = testing::toy_network(16 + 8 * static_cast<int>(seed % 5), seed % 3 != 0, seed % 4 != 0);
    config.width_multiplier = std::array{0.35, 0.5, 0.75, 1.0}[seed % 4];
    const auto rounding = seed % 2 ? Rounding::Truncate : Rounding::Nearest;
    const auto pm = model::prepare(model::build_network(config, seed), rounding);
    fs::remove_all(dir);
    package::save_package(pm, dir);
    REQUIRE(package::load_package(dir) == pm);
  }
  fs::remove_all(dir);
}

TEST_CASE("random network configurations chain and satisfy pass invariants") {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const double width = std::array{0.35, 0.5, 0.75, 1.0, 1.3}[trial % 5];
    const int resolution = 32 * pick(rng, 1, 5);
    const auto g = model::build_mobilenet_v2(width, resolution, static_cast<std::uint64_t>(trial));
    for (std::size_t i = 1; i < g.layers.size(); ++i) REQUIRE(g.layers[i - 1].out == g.layers[i].in);
    const auto pm = model::prepare(g);
    for (const auto& l : pm.graph.layers) {
      if (l.kind == LayerKind::EXP || l.kind == LayerKind::PRO || l.kind == LayerKind::DWC) {
        REQUIRE(l.in.channels % 16 == 0);
        REQUIRE(l.apass * 16 == l.in.channels);
        REQUIRE(l.fpass * 16 == l.out.channels);
      }
    }
  }
}
