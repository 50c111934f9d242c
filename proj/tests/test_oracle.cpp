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

#include <cmath>
#include <random>

#include "errors.hpp"
#include "oracle.hpp"
#include "test_support.hpp"

using namespace semistream;
using namespace semistream::oracle;
using model::LayerKind;
using model::Rng;
using testing::hand_layer;

namespace {

model::LayerDesc prepared(const model::LayerDesc& l, Rounding mode) { return model::prepare_layer(l, mode); }

__int128 div_pow2(__int128 num, int shift, bool nearest) {
  const __int128 den = static_cast<__int128>(1) << shift;
  const bool neg = num < 0;
  const __int128 mag = neg ? -num : num;
  if (nearest) {
    const __int128 q = (2 * mag + den) / (2 * den);
    return neg ? -q : q;
  }
  __int128 q = mag / den;
  if (neg && q * den != mag) ++q;
  return neg ? -q : q;
}

}  // namespace

TEST_CASE("exact_scale examples") {
  CHECK(exact_scale(255, 3221225472u, 33, Rounding::Nearest) == 96);
  CHECK(exact_scale(255, 3221225472u, 33, Rounding::Truncate) == 95);
  CHECK(exact_scale(-255, 3221225472u, 33, Rounding::Nearest) == -96);
  CHECK(exact_scale(-255, 3221225472u, 33, Rounding::Truncate) == -96);
  CHECK(exact_scale(1, 2147483648u, 32, Rounding::Nearest) == 1);
  CHECK(exact_scale(-1, 2147483648u, 32, Rounding::Nearest) == -1);
  CHECK(exact_scale(0, 4294967295u, 60, Rounding::Truncate) == 0);
}

TEST_CASE("1x1x1 pointwise by hand") {
  auto raw = hand_layer(LayerKind::PRO, Dims{1, 1, 1}, 1, 1, {0.5, 128}, {1.0, 10}, 0.75, 3);
  raw.filters->weights[0] = 5;
  raw.filters->biases[0] = 7;
  for (auto mode : {Rounding::Nearest, Rounding::Truncate}) {
    const auto layer = prepared(raw, mode);
    REQUIRE(layer.requant[0].ms == quant::MultShift{3221225472u, 33});
    QTensor in(Dims{1, 1, 1}, raw.in_q, 130);
    // (2 * 2 + 7) * 0.375 = 4.125
    CHECK(int(naive_quant_layer(in, layer, mode).data[0]) == 14);
    // (-8 * 2 + 7) * 0.375 = -3.375
    in.data[0] = 120;
    CHECK(int(naive_quant_layer(in, layer, mode).data[0]) == (mode == Rounding::Nearest ? 7 : 6));
  }
}

TEST_CASE("2x2x1 depthwise by hand") {
  auto raw = hand_layer(LayerKind::DWC, Dims{2, 2, 1}, 0, 1, {0.5, 10}, {1.0, 100}, 1.0, 50);
  for (int k = 0; k < 9; ++k) raw.filters->weights[k] = static_cast<std::uint8_t>(50 + k - 4);
  QTensor in(Dims{2, 2, 1}, raw.in_q);
  in.data = {11, 12, 13, 14};
  // Sums 27, 17, -3, -13 scaled by one half.
  const auto nearest = naive_quant_layer(in, prepared(raw, Rounding::Nearest), Rounding::Nearest);
  CHECK(nearest.data == std::vector<std::uint8_t>{114, 109, 98, 93});
  const auto trunc = naive_quant_layer(in, prepared(raw, Rounding::Truncate), Rounding::Truncate);
  CHECK(trunc.data == std::vector<std::uint8_t>{113, 108, 98, 93});

  raw.stride = 2;
  raw.out = {1, 1, 1};
  const auto strided = naive_quant_layer(in, prepared(raw, Rounding::Nearest), Rounding::Nearest);
  CHECK(strided.data == std::vector<std::uint8_t>{93});
}

TEST_CASE("2x2x1 average pool by hand") {
  const QuantParams q{0.1, 10};
  const auto raw = hand_layer(LayerKind::AVGPOOL, Dims{2, 2, 1}, 0, 1, q, q);
  QTensor in(Dims{2, 2, 1}, q);
  in.data = {11, 12, 13, 14};
  // Mean offset 2.5.
  CHECK(int(naive_quant_layer(in, prepared(raw, Rounding::Nearest), Rounding::Nearest).data[0]) == 13);
  CHECK(int(naive_quant_layer(in, prepared(raw, Rounding::Truncate), Rounding::Truncate).data[0]) == 12);
}

TEST_CASE("1x1x1 addition by hand") {
  auto raw = hand_layer(LayerKind::ADD, Dims{1, 1, 1}, 0, 1, {1.0 / 32, 100}, {1.0 / 32, 120});
  raw.residual_q = {1.0 / 32, 7};
  const auto layer = prepared(raw, Rounding::Nearest);
  QTensor a(Dims{1, 1, 1}, raw.in_q, 101), b(Dims{1, 1, 1}, raw.residual_q, 8);
  CHECK(int(naive_quant_layer(a, b, layer).data[0]) == 122);

  // 1.0 + 0.3 on a 0.2 grid is 6.5 steps.
  auto mixed = hand_layer(LayerKind::ADD, Dims{1, 1, 1}, 0, 1, {0.1, 100}, {0.2, 50});
  mixed.residual_q = {0.05, 0};
  const auto ml = prepared(mixed, Rounding::Nearest);
  QTensor c(Dims{1, 1, 1}, mixed.in_q, 110), d(Dims{1, 1, 1}, mixed.residual_q, 6);
  const int got = naive_quant_layer(c, d, ml).data[0];
  CHECK(std::fabs(got - 50 - 6.5) <= 1.0);
}

TEST_CASE("1-element dot products agree with exact rational evaluation") {
  Rng rng(17);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int i = 0; i < 3000; ++i) {
    const auto mode = i % 2 ? Rounding::Nearest : Rounding::Truncate;
    auto raw = model::random_layer(LayerKind::PRO, Dims{1, 1, 1}, 1, 1, rng);
    const auto layer = prepared(raw, mode);
    const QTensor in = model::random_tensor(layer.in, layer.in_q, rng);
    const auto& f = *layer.filters;
    const __int128 acc = static_cast<__int128>(in.data[0] - layer.in_q.zero_point) * (f.weights[0] - f.weight_zero_points[0]) +
                         f.biases[0];
    const auto& r = layer.requant[0];
    const __int128 scaled = div_pow2(acc * r.ms.mult, r.ms.shift, mode == Rounding::Nearest) + r.out_zero;
    const int expected = static_cast<int>(std::clamp<__int128>(scaled, 0, 255));
    REQUIRE(int(naive_quant_layer(in, layer, mode).data[0]) == expected);
  }
}

TEST_CASE("zero-point input with zero biases gives the output zero point") {
  Rng rng(18);
  for (auto kind : {LayerKind::C2D, LayerKind::DWC, LayerKind::EXP, LayerKind::PRO}) {
    auto raw = model::random_layer(kind, Dims{5, 6, kind == LayerKind::C2D ? 3 : 20}, 24, 2, rng);
    for (auto& b : raw.filters->biases) b = 0;
    const auto layer = prepared(raw, Rounding::Nearest);
    const QTensor in(raw.in, raw.in_q, static_cast<std::uint8_t>(raw.in_q.zero_point));
    for (auto v : naive_quant_layer(in, layer).data) REQUIRE(int(v) == raw.out_q.zero_point);
  }
}

TEST_CASE("malformed layers raise ShapeError") {
  Rng rng(19);
  const auto layer = prepared(model::random_layer(LayerKind::PRO, Dims{2, 2, 8}, 8, 1, rng), Rounding::Nearest);
  const QTensor wrong = model::random_tensor(Dims{2, 2, 9}, layer.in_q, rng);
  CHECK_THROWS_AS(naive_quant_layer(wrong, layer), ShapeError);
  const auto add = prepared(model::random_layer(LayerKind::ADD, Dims{2, 2, 8}, 0, 1, rng), Rounding::Nearest);
  CHECK_THROWS_AS(naive_quant_layer(model::random_tensor(add.in, add.in_q, rng), add), ShapeError);
}

TEST_CASE("float references") {
  Rng rng(20);
  std::normal_distribution<double> n(0.0, 1.0);
  FloatTensor x{Dims{4, 5, 3}, {}};
  FloatTensor y{Dims{4, 5, 3}, {}};
  for (std::size_t i = 0; i < x.dims.elements(); ++i) {
    x.data.push_back(n(rng));
    y.data.push_back(n(rng));
  }

  SUBCASE("identity kernels") {
    RealFilters dw{3, 3, 1, 3, std::vector<double>(27, 0.0), {0, 0, 0}};
    for (int c = 0; c < 3; ++c) dw.weights[c * 9 + 4] = 1.0;
    CHECK(float_conv(x, dw, 1, true).data == x.data);
    RealFilters pw{1, 1, 3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}, {0, 0, 0}};
    CHECK(float_conv(x, pw, 1, false).data == x.data);
  }
  SUBCASE("linearity") {
    RealFilters f{3, 3, 3, 2, {}, {0, 0}};
    for (int i = 0; i < 54; ++i) f.weights.push_back(n(rng));
    const FloatTensor sum = float_add(x, y);
    const auto lhs = float_conv(sum, f, 2, false);
    const auto a = float_conv(x, f, 2, false);
    const auto b = float_conv(y, f, 2, false);
    REQUIRE(lhs.dims == Dims{2, 3, 2});
    for (std::size_t i = 0; i < lhs.data.size(); ++i) CHECK(lhs.data[i] == doctest::Approx(a.data[i] + b.data[i]).epsilon(1e-12));
  }
  SUBCASE("average pool") {
    const auto p = float_avgpool(x);
    REQUIRE(p.dims == Dims{1, 1, 3});
    for (int c = 0; c < 3; ++c) {
      double s = 0;
      for (int r = 0; r < 4; ++r) {
        for (int col = 0; col < 5; ++col) s += x.at(r, col, c);
      }
      CHECK(p.data[c] == doctest::Approx(s / 20));
    }
  }
  SUBCASE("shape errors") {
    FloatTensor z{Dims{4, 4, 3}, std::vector<double>(48, 0.0)};
    CHECK_THROWS_AS(float_add(x, z), ShapeError);
    RealFilters f{1, 1, 4, 2, std::vector<double>(8, 0.0), {0, 0}};
    CHECK_THROWS_AS(float_conv(x, f, 1, false), ShapeError);
  }
}

TEST_CASE("dequantized filters") {
  QFilterSet f{1, 1, 2, 1, {10, 4}, {6}, {0.5}, {8}};
  const auto r = dequantize_filters(f, 0.25);
  CHECK(r.weights == std::vector<double>{2.0, -1.0});
  CHECK(r.bias[0] == doctest::Approx(8 * 0.25 * 0.5));
}
