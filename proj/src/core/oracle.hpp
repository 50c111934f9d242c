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
#include <vector>

#include "model.hpp"
#include "tensor.hpp"

// Direct-evaluation references.  Nothing here streams, batches or reuses the
// engines' requantization; only quant::clamp and the rounding flag are shared.
namespace semistream::oracle {

using model::LayerDesc;
using quant::Rounding;

/// Exact value of acc * mult / 2^shift, rounded per `mode`.
std::int64_t exact_scale(std::int64_t acc, std::uint32_t mult, unsigned shift, Rounding mode);

std::int32_t exact_requantize(std::int64_t acc, const quant::RequantParams& p, Rounding mode);

std::int32_t exact_add(std::int32_t in1, std::int32_t in2, const quant::AddParams& p, Rounding mode);

/// Single-input layer (C2D, DWC, EXP, PRO, AVGPOOL); padded or unpadded.
QTensor naive_quant_layer(const QTensor& input, const LayerDesc& layer, Rounding mode = Rounding::Nearest);

/// ADD layer with its shortcut operand.
QTensor naive_quant_layer(const QTensor& input, const QTensor& residual, const LayerDesc& layer,
                          Rounding mode = Rounding::Nearest);

/// Layer-by-layer naive execution of a whole prepared model.  Output channels
/// beyond model.output_channels are dropped.
QTensor run_model_oracle(const model::PreparedModel& model, const QTensor& image);

// ---------------------------------------------------------------------------
// Real-valued references

struct RealFilters {
  int kernel_h = 0;
  int kernel_w = 0;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> weights;  // (filter, ky, kx, ch)
  std::vector<double> bias;

  double at(int o, int ky, int kx, int c) const {
    return weights[((static_cast<std::size_t>(o) * kernel_h + ky) * kernel_w + kx) * in_channels + c];
  }
};

/// Dequantized weights (w - wz) * ws and biases b * in_scale * ws.
RealFilters dequantize_filters(const QFilterSet& f, double input_scale);

/// 3x3 (SAME, zero border) or 1x1 convolution; depthwise when `depthwise`.
FloatTensor float_conv(const FloatTensor& input, const RealFilters& f, int stride, bool depthwise);
FloatTensor float_add(const FloatTensor& a, const FloatTensor& b);
FloatTensor float_avgpool(const FloatTensor& input);

/// Real evaluation of a layer on a dequantized input.  ADD needs `residual`.
FloatTensor float_layer(const FloatTensor& input, const LayerDesc& layer, const FloatTensor* residual = nullptr);

/// Clamps every value to the range representable by `q` in 8 bits.
void clamp_to_range(FloatTensor& t, const QuantParams& q);

}  // namespace semistream::oracle
