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
#include <string>

#include "model.hpp"
#include "tensor.hpp"

namespace semistream::testing {

using model::LayerDesc;
using model::LayerKind;

// Layer with every weight at its zero point and zero biases.  Tests poke
// individual weights before calling finish().
inline LayerDesc hand_layer(LayerKind kind, Dims in, int out_channels, int stride, QuantParams in_q,
                            QuantParams out_q, double weight_scale = 1.0, int weight_zero = 0) {
  LayerDesc l;
  l.kind = kind;
  l.name = "hand_" + std::string(model::to_string(kind));
  l.in = in;
  l.in_q = in_q;
  l.out_q = out_q;
  l.stride = stride;
  const int oh = model::conv_output_size(in.height, stride);
  const int ow = model::conv_output_size(in.width, stride);
  QFilterSet f;
  switch (kind) {
    case LayerKind::C2D:
      l.out = {oh, ow, out_channels};
      f = {3, 3, in.channels, out_channels, {}, {}, {}, {}};
      break;
    case LayerKind::DWC:
      l.out = {oh, ow, in.channels};
      f = {3, 3, 1, in.channels, {}, {}, {}, {}};
      break;
    case LayerKind::EXP:
    case LayerKind::PRO:
      l.stride = 1;
      l.out = {in.height, in.width, out_channels};
      f = {1, 1, in.channels, out_channels, {}, {}, {}, {}};
      break;
    case LayerKind::AVGPOOL:
      l.stride = 1;
      l.out = {1, 1, in.channels};
      break;
    case LayerKind::ADD:
      l.stride = 1;
      l.out = in;
      l.residual = true;
      l.residual_q = in_q;
      break;
  }
  if (f.out_channels > 0) {
    f.weights.assign(f.filter_volume() * f.out_channels, static_cast<std::uint8_t>(weight_zero));
    f.weight_zero_points.assign(f.out_channels, weight_zero);
    f.weight_scales.assign(f.out_channels, weight_scale);
    f.biases.assign(f.out_channels, 0);
    l.filters = f;
  }
  l.logical_in_channels = l.in.channels;
  l.logical_out_channels = l.out.channels;
  return l;
}

inline LayerDesc finish(const LayerDesc& l, quant::Rounding rounding = quant::Rounding::Nearest) {
  return model::pad_channels(model::prepare_layer(l, rounding));
}

inline std::uint8_t& weight(LayerDesc& l, int filter, int ky, int kx, int ch) {
  return l.filters->weights[l.filters->index(filter, ky, kx, ch)];
}

// Tiny network: entry conv into a handful of blocks at low resolution.
inline model::NetworkConfig toy_network(int resolution, bool residuals = true, bool head = true) {
  model::NetworkConfig c;
  c.resolution = resolution;
  c.blocks = {{1, 16, 1, 1}, {6, 24, 2, 2}, {6, 32, 2, 2}};
  c.head_channels = 64;
  c.num_classes = 10;
  c.residuals = residuals;
  c.head = head;
  return c;
}

}  // namespace semistream::testing
