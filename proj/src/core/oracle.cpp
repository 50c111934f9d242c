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

#include "oracle.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "errors.hpp"

namespace semistream::oracle {

using model::LayerKind;

namespace {

using i128 = __int128;

i128 pow2(unsigned k) { return static_cast<i128>(1) << k; }

// floor(num / den) and nearest(num / den), den > 0.
i128 floor_div(i128 num, i128 den) {
  i128 q = num / den;
  if (num % den != 0 && num < 0) --q;
  return q;
}

i128 nearest_div(i128 num, i128 den) {
  const i128 mag = num < 0 ? -num : num;
  const i128 q = (2 * mag + den) / (2 * den);
  return num < 0 ? -q : q;
}

std::int32_t saturate32(i128 v) {
  return static_cast<std::int32_t>(std::clamp<i128>(v, INT32_MIN, INT32_MAX));
}

void fail(const LayerDesc& layer, const std::string& what) {
  throw ShapeError("oracle, layer " + layer.name + ": " + what);
}

}  // namespace

std::int64_t exact_scale(std::int64_t acc, std::uint32_t mult, unsigned shift, Rounding mode) {
  const i128 num = static_cast<i128>(acc) * mult;
  if (shift >= 120) {
    // |num| < 2^95, so the quotient is within (-1, 1).
    if (mode == Rounding::Truncate) return num < 0 ? -1 : 0;
    return 0;
  }
  const i128 den = pow2(shift);
  return static_cast<std::int64_t>(mode == Rounding::Truncate ? floor_div(num, den) : nearest_div(num, den));
}

std::int32_t exact_requantize(std::int64_t acc, const quant::RequantParams& p, Rounding mode) {
  const i128 v = static_cast<i128>(exact_scale(acc, p.ms.mult, p.ms.shift, mode)) + p.out_zero;
  return quant::clamp(saturate32(v), p.out_min, p.out_max);
}

std::int32_t exact_add(std::int32_t in1, std::int32_t in2, const quant::AddParams& p, Rounding mode) {
  const std::int64_t x1 = static_cast<std::int64_t>(in1 - p.in1_zero) * (std::int64_t{1} << p.pre_shift);
  const std::int64_t x2 = static_cast<std::int64_t>(in2 - p.in2_zero) * (std::int64_t{1} << p.pre_shift);
  const std::int64_t a1 = exact_scale(x1, p.mult1.mult, p.mult1.shift, mode);
  const std::int64_t a2 = exact_scale(x2, p.mult2.mult, p.mult2.shift, mode);
  const i128 v = static_cast<i128>(exact_scale(a1 + a2, p.mult3.mult, p.mult3.shift, mode)) + p.out_zero;
  return quant::clamp(saturate32(v), p.out_min, p.out_max);
}

QTensor naive_quant_layer(const QTensor& input, const LayerDesc& layer, Rounding mode) {
  input.validate();
  if (!(input.dims == layer.in)) fail(layer, "input dims disagree with the layer");
  if (layer.requant.size() != static_cast<std::size_t>(layer.out.channels)) fail(layer, "layer is not prepared");
  QTensor out(layer.out, layer.out_q);
  const std::int64_t a0 = layer.in_q.zero_point;

  if (layer.kind == LayerKind::AVGPOOL) {
    if (layer.out.channels != layer.in.channels) fail(layer, "pooling changes channel count");
    for (int c = 0; c < layer.in.channels; ++c) {
      std::int64_t acc = 0;
      for (int y = 0; y < layer.in.height; ++y) {
        for (int x = 0; x < layer.in.width; ++x) acc += input.at(y, x, c) - a0;
      }
      out.at(0, 0, c) = static_cast<std::uint8_t>(exact_requantize(acc, layer.requant[c], mode));
    }
    return out;
  }
  if (layer.kind == LayerKind::ADD) fail(layer, "ADD needs a residual operand");
  if (!layer.filters) fail(layer, "missing filters");
  const auto& f = *layer.filters;
  const bool depthwise = layer.kind == LayerKind::DWC;
  const bool spatial = layer.kind == LayerKind::C2D || depthwise;
  const int stride = spatial ? layer.stride : 1;
  const int pad_top = spatial ? model::same_padding_before(layer.in.height, f.kernel_h, stride) : 0;
  const int pad_left = spatial ? model::same_padding_before(layer.in.width, f.kernel_w, stride) : 0;
  if (f.out_channels != layer.out.channels) fail(layer, "filter count disagrees with output channels");
  if (!depthwise && f.in_channels != layer.in.channels) fail(layer, "filter depth disagrees with input channels");

  for (int oy = 0; oy < layer.out.height; ++oy) {
    for (int ox = 0; ox < layer.out.width; ++ox) {
      for (int o = 0; o < f.out_channels; ++o) {
        std::int64_t acc = f.biases[o];
        const std::int64_t w0 = f.weight_zero_points[o];
        for (int ky = 0; ky < f.kernel_h; ++ky) {
          const int y = oy * stride + ky - pad_top;
          if (y < 0 || y >= layer.in.height) continue;
          for (int kx = 0; kx < f.kernel_w; ++kx) {
            const int x = ox * stride + kx - pad_left;
            if (x < 0 || x >= layer.in.width) continue;
            if (depthwise) {
              acc += (input.at(y, x, o) - a0) * (f.at(o, ky, kx, 0) - w0);
            } else {
              for (int c = 0; c < f.in_channels; ++c) acc += (input.at(y, x, c) - a0) * (f.at(o, ky, kx, c) - w0);
            }
          }
        }
        out.at(oy, ox, o) = static_cast<std::uint8_t>(exact_requantize(acc, layer.requant[o], mode));
      }
    }
  }
  return out;
}

QTensor naive_quant_layer(const QTensor& input, const QTensor& residual, const LayerDesc& layer, Rounding mode) {
  if (layer.kind != LayerKind::ADD) return naive_quant_layer(input, layer, mode);
  if (!layer.add) fail(layer, "ADD scalars missing");
  if (!(input.dims == layer.in) || !(residual.dims == layer.in)) fail(layer, "operand dims disagree with the layer");
  QTensor out(layer.out, layer.out_q);
  for (std::size_t i = 0; i < input.data.size(); ++i) {
    out.data[i] = static_cast<std::uint8_t>(exact_add(input.data[i], residual.data[i], *layer.add, mode));
  }
  return out;
}

QTensor run_model_oracle(const model::PreparedModel& model, const QTensor& image) {
  const auto& g = model.graph;
  std::map<int, int> source_of;
  std::map<int, QTensor> saved;
  for (const auto& link : g.residuals) {
    source_of[link.add_layer] = link.source_layer;
    saved[link.source_layer];
  }
  QTensor cur = image;
  for (int i = 0; i < static_cast<int>(g.layers.size()); ++i) {
    const auto& l = model.layer(i);
    cur = l.kind == LayerKind::ADD ? naive_quant_layer(cur, saved.at(source_of.at(i)), l, model.rounding)
                                   : naive_quant_layer(cur, l, model.rounding);
    if (auto it = saved.find(i); it != saved.end()) it->second = cur;
  }
  const int keep = model.output_channels;
  if (keep <= 0 || keep >= cur.dims.channels) return cur;
  QTensor out(Dims{cur.dims.height, cur.dims.width, keep}, cur.quant);
  for (int y = 0; y < cur.dims.height; ++y) {
    for (int x = 0; x < cur.dims.width; ++x) {
      for (int c = 0; c < keep; ++c) out.at(y, x, c) = cur.at(y, x, c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

RealFilters dequantize_filters(const QFilterSet& f, double input_scale) {
  RealFilters r{f.kernel_h, f.kernel_w, f.in_channels, f.out_channels, {}, {}};
  r.weights.resize(f.weights.size());
  for (int o = 0; o < f.out_channels; ++o) {
    const std::size_t base = static_cast<std::size_t>(o) * f.filter_volume();
    for (std::size_t k = 0; k < f.filter_volume(); ++k) {
      r.weights[base + k] = (f.weights[base + k] - f.weight_zero_points[o]) * f.weight_scales[o];
    }
    r.bias.push_back(f.biases[o] * input_scale * f.weight_scales[o]);
  }
  return r;
}

FloatTensor float_conv(const FloatTensor& input, const RealFilters& f, int stride, bool depthwise) {
  const Dims in = input.dims;
  if (f.kernel_h != f.kernel_w || (f.kernel_h != 1 && f.kernel_h != 3)) throw ShapeError("float oracle: kernel");
  if (depthwise ? (f.in_channels != 1 || f.out_channels != in.channels) : f.in_channels != in.channels) {
    throw ShapeError("float oracle: filter channels disagree with the input");
  }
  const int s = f.kernel_h == 1 ? 1 : stride;
  const int pad_top = model::same_padding_before(in.height, f.kernel_h, s);
  const int pad_left = model::same_padding_before(in.width, f.kernel_w, s);
  FloatTensor out;
  out.dims = {model::conv_output_size(in.height, s), model::conv_output_size(in.width, s), f.out_channels};
  out.data.assign(out.dims.elements(), 0.0);
  for (int oy = 0; oy < out.dims.height; ++oy) {
    for (int ox = 0; ox < out.dims.width; ++ox) {
      for (int o = 0; o < f.out_channels; ++o) {
        double acc = f.bias[o];
        for (int ky = 0; ky < f.kernel_h; ++ky) {
          const int y = oy * s + ky - pad_top;
          if (y < 0 || y >= in.height) continue;
          for (int kx = 0; kx < f.kernel_w; ++kx) {
            const int x = ox * s + kx - pad_left;
            if (x < 0 || x >= in.width) continue;
            if (depthwise) {
              acc += input.at(y, x, o) * f.at(o, ky, kx, 0);
            } else {
              for (int c = 0; c < f.in_channels; ++c) acc += input.at(y, x, c) * f.at(o, ky, kx, c);
            }
          }
        }
        out.at(oy, ox, o) = acc;
      }
    }
  }
  return out;
}

FloatTensor float_add(const FloatTensor& a, const FloatTensor& b) {
  if (!(a.dims == b.dims)) throw ShapeError("float oracle: add operands differ in shape");
  FloatTensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

FloatTensor float_avgpool(const FloatTensor& input) {
  FloatTensor out;
  out.dims = {1, 1, input.dims.channels};
  out.data.assign(static_cast<std::size_t>(input.dims.channels), 0.0);
  for (std::size_t p = 0; p < input.dims.pixels(); ++p) {
    for (int c = 0; c < input.dims.channels; ++c) out.data[c] += input.data[p * input.dims.channels + c];
  }
  for (auto& v : out.data) v /= static_cast<double>(input.dims.pixels());
  return out;
}

FloatTensor float_layer(const FloatTensor& input, const LayerDesc& layer, const FloatTensor* residual) {
  switch (layer.kind) {
    case LayerKind::ADD:
      if (!residual) throw ShapeError("float oracle: ADD needs a residual operand");
      return float_add(input, *residual);
    case LayerKind::AVGPOOL: return float_avgpool(input);
    default: break;
  }
  if (!layer.filters) throw ShapeError("float oracle: layer " + layer.name + " has no filters");
  return float_conv(input, dequantize_filters(*layer.filters, layer.in_q.scale), layer.stride,
                    layer.kind == LayerKind::DWC);
}

void clamp_to_range(FloatTensor& t, const QuantParams& q) {
  const double lo = (0 - q.zero_point) * q.scale;
  const double hi = (255 - q.zero_point) * q.scale;
  for (auto& v : t.data) v = std::clamp(v, lo, hi);
}

}  // namespace semistream::oracle
