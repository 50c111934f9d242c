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

#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dataflow.hpp"
#include "errors.hpp"

namespace semistream::model {

namespace {

constexpr LayerKind kAllKinds[] = {LayerKind::C2D, LayerKind::DWC, LayerKind::EXP,
                                   LayerKind::PRO, LayerKind::ADD, LayerKind::AVGPOOL};

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double log_uniform(Rng& rng, double lo, double hi) { return std::exp(uniform(rng, std::log(lo), std::log(hi))); }

double normal(Rng& rng, double sigma) { return std::normal_distribution<double>(0.0, sigma)(rng); }

bool is_conv(LayerKind k) {
  return k == LayerKind::C2D || k == LayerKind::DWC || k == LayerKind::EXP || k == LayerKind::PRO;
}

// ReLU6-style layers put the zero point near the bottom of the range;
// linear layers sit mid-range.
QuantParams draw_activation_quant(Rng& rng, bool relu) {
  QuantParams q;
  q.scale = log_uniform(rng, 1.0 / 64, 1.0 / 24);
  q.zero_point = relu ? uniform_int(rng, 0, 16) : uniform_int(rng, 100, 156);
  return q;
}

int make_divisible(double v, int divisor = 8) {
  int rounded = std::max(divisor, static_cast<int>(v + divisor / 2.0) / divisor * divisor);
  if (rounded < 0.9 * v) rounded += divisor;
  return rounded;
}

int bias_bits_for(LayerKind kind) { return kind == LayerKind::PRO ? 18 : 16; }

struct FilterShape {
  int kh;
  int kw;
  int in;
  int out;
};

// Float weights (O,H,W,I) through batch-norm folding and per-channel
// asymmetric 8-bit quantization.
QFilterSet make_benign_filters(const FilterShape& shape, LayerKind kind, double input_scale,
                               double input_rms, Rng& rng) {
  const std::size_t volume = static_cast<std::size_t>(shape.kh) * shape.kw * shape.in;
  const double sigma = 1.0 / std::sqrt(static_cast<double>(volume));
  std::vector<double> weights(volume * shape.out);
  for (auto& w : weights) w = normal(rng, sigma);
  std::vector<double> bias(shape.out, 0.0);

  const double conv_std = std::max(input_rms, 1e-3);
  quant::BatchNormParams bn;
  for (int c = 0; c < shape.out; ++c) {
    bn.gamma.push_back(uniform(rng, 0.5, 1.5));
    bn.beta.push_back(normal(rng, 0.2));
    bn.mean.push_back(normal(rng, 0.2 * conv_std));
    bn.variance.push_back(conv_std * conv_std * uniform(rng, 0.7, 1.4));
  }
  const auto folded = quant::fold_batch_norm(weights, bias, bn);

  QFilterSet f;
  f.kernel_h = shape.kh;
  f.kernel_w = shape.kw;
  f.in_channels = shape.in;
  f.out_channels = shape.out;
  f.weights.resize(folded.weights.size());
  const int bits = bias_bits_for(kind);
  const double bias_limit = std::ldexp(1.0, bits - 1) - 1;
  for (int c = 0; c < shape.out; ++c) {
    const auto first = folded.weights.begin() + static_cast<std::ptrdiff_t>(c * volume);
    const auto [mn, mx] = std::minmax_element(first, first + static_cast<std::ptrdiff_t>(volume));
    const double lo = std::min(0.0, *mn);
    const double hi = std::max(0.0, *mx);
    const double scale = hi > lo ? (hi - lo) / 255.0 : 1e-3;
    const int zero = std::clamp(static_cast<int>(std::lround(-lo / scale)), 0, 255);
    for (std::size_t i = 0; i < volume; ++i) {
      const double w = folded.weights[c * volume + i];
      f.weights[c * volume + i] = static_cast<std::uint8_t>(std::clamp(static_cast<int>(std::lround(w / scale)) + zero, 0, 255));
    }
    f.weight_scales.push_back(scale);
    f.weight_zero_points.push_back(zero);
    const double q_bias = std::clamp(folded.bias[c] / (input_scale * scale), -bias_limit, bias_limit);
    f.biases.push_back(static_cast<std::int32_t>(std::lround(q_bias)));
  }
  return f;
}

// Arbitrary 8-bit content; scales are chosen so the requantization scalar
// lands in [2^-16, 2^-8].
QFilterSet make_adversarial_filters(const FilterShape& shape, double input_scale, double output_scale, Rng& rng) {
  QFilterSet f;
  f.kernel_h = shape.kh;
  f.kernel_w = shape.kw;
  f.in_channels = shape.in;
  f.out_channels = shape.out;
  f.weights.resize(static_cast<std::size_t>(shape.kh) * shape.kw * shape.in * shape.out);
  for (auto& w : f.weights) w = static_cast<std::uint8_t>(uniform_int(rng, 0, 255));
  for (int c = 0; c < shape.out; ++c) {
    const double m = log_uniform(rng, std::ldexp(1.0, -16), std::ldexp(1.0, -8));
    f.weight_scales.push_back(m * output_scale / input_scale);
    f.weight_zero_points.push_back(uniform_int(rng, 0, 255));
    f.biases.push_back(uniform_int(rng, -(1 << 14), 1 << 14));
  }
  return f;
}

FilterShape filter_shape(LayerKind kind, Dims in, int out_channels) {
  switch (kind) {
    case LayerKind::C2D: return {3, 3, in.channels, out_channels};
    case LayerKind::DWC: return {3, 3, 1, in.channels};
    case LayerKind::EXP:
    case LayerKind::PRO: return {1, 1, in.channels, out_channels};
    default: throw ShapeError("layer kind carries no filters");
  }
}

Dims output_dims(LayerKind kind, Dims in, int out_channels, int stride) {
  switch (kind) {
    case LayerKind::C2D: return {conv_output_size(in.height, stride), conv_output_size(in.width, stride), out_channels};
    case LayerKind::DWC: return {conv_output_size(in.height, stride), conv_output_size(in.width, stride), in.channels};
    case LayerKind::EXP:
    case LayerKind::PRO: return {in.height, in.width, out_channels};
    case LayerKind::ADD: return in;
    case LayerKind::AVGPOOL: return {1, 1, in.channels};
  }
  return in;
}

class Builder {
 public:
  Builder(ModelGraph& graph, Rng& rng) : graph_(graph), rng_(rng) {}

  int conv(LayerKind kind, std::string name, int block, int out_channels, int stride, bool relu) {
    LayerDesc l;
    l.kind = kind;
    l.name = std::move(name);
    l.block = block;
    l.in = current_dims();
    l.in_q = current_quant();
    l.stride = stride;
    l.out = output_dims(kind, l.in, out_channels, stride);
    l.out_q = draw_activation_quant(rng_, relu);
    l.filters = make_benign_filters(filter_shape(kind, l.in, out_channels), kind, l.in_q.scale, rms_, rng_);
    l.logical_in_channels = l.in.channels;
    l.logical_out_channels = l.out.channels;
    rms_ = relu ? 0.6 : 1.0;
    return push(std::move(l));
  }

  int add(std::string name, int block, int source) {
    LayerDesc l;
    l.kind = LayerKind::ADD;
    l.name = std::move(name);
    l.block = block;
    l.in = current_dims();
    l.out = l.in;
    l.in_q = current_quant();
    l.residual_q = graph_.layers.at(static_cast<std::size_t>(source)).out_q;
    l.out_q.scale = std::max(l.in_q.scale, l.residual_q.scale) * uniform(rng_, 1.0, 1.5);
    l.out_q.zero_point = uniform_int(rng_, 100, 156);
    l.residual = true;
    l.logical_in_channels = l.in.channels;
    l.logical_out_channels = l.out.channels;
    const int index = push(std::move(l));
    graph_.residuals.push_back({index, source});
    rms_ = std::sqrt(rms_ * rms_ + 1.0);
    return index;
  }

  int avgpool(std::string name) {
    LayerDesc l;
    l.kind = LayerKind::AVGPOOL;
    l.name = std::move(name);
    l.in = current_dims();
    l.out = {1, 1, l.in.channels};
    l.in_q = current_quant();
    // A slightly coarser output grid keeps 1/(H*W) * in/out below one even
    // for a single-pixel frame.
    l.out_q = {l.in_q.scale * uniform(rng_, 1.01, 1.25), l.in_q.zero_point};
    l.logical_in_channels = l.in.channels;
    l.logical_out_channels = l.out.channels;
    return push(std::move(l));
  }

  int last() const { return static_cast<int>(graph_.layers.size()) - 1; }
  Dims current_dims() const { return graph_.layers.empty() ? graph_.input_dims : graph_.layers.back().out; }
  QuantParams current_quant() const { return graph_.layers.empty() ? graph_.input_q : graph_.layers.back().out_q; }

 private:
  int push(LayerDesc l) {
    graph_.layers.push_back(std::move(l));
    return last();
  }

  ModelGraph& graph_;
  Rng& rng_;
  double rms_ = 0.58;
};

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::C2D: return "C2D";
    case LayerKind::DWC: return "DWC";
    case LayerKind::EXP: return "EXP";
    case LayerKind::PRO: return "PRO";
    case LayerKind::ADD: return "ADD";
    case LayerKind::AVGPOOL: return "AVGPOOL";
  }
  return "?";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (auto k : kAllKinds) {
    if (to_string(k) == name) return k;
  }
  throw FormatError("unknown layer kind '" + std::string(name) + "'");
}

int round_up16(int n) { return (n + 15) / 16 * 16; }

int conv_output_size(int in, int stride) { return (in + stride - 1) / stride; }

int same_padding_before(int in, int kernel, int stride) {
  const int out = conv_output_size(in, stride);
  const int total = std::max((out - 1) * stride + kernel - in, 0);
  return total / 2;
}

NetworkConfig NetworkConfig::mobilenet_v2(double width_multiplier, int resolution) {
  NetworkConfig c;
  c.resolution = resolution;
  c.width_multiplier = width_multiplier;
  c.blocks = {{1, 16, 1, 1}, {6, 24, 2, 2}, {6, 32, 3, 2}, {6, 64, 4, 2},
              {6, 96, 3, 1}, {6, 160, 3, 2}, {6, 320, 1, 1}};
  return c;
}

ModelGraph build_network(const NetworkConfig& config, std::uint64_t seed) {
  const double alpha = config.width_multiplier;
  if (!std::isfinite(alpha) || alpha <= 0.0 || alpha > 4.0) throw DomainError("width multiplier must be in (0, 4]");
  if (config.resolution <= 0) throw DomainError("resolution must be positive");
  if (config.blocks.empty()) throw DomainError("network needs at least one block");
  if (config.blocks.front().expansion != 1) {
    throw DomainError("first block must not expand (the entry convolution feeds the depthwise engine)");
  }

  Rng rng(seed);
  ModelGraph g;
  std::ostringstream name;
  name << "mobilenet_v2_" << alpha << "_" << config.resolution;
  g.name = name.str();
  g.input_dims = {config.resolution, config.resolution, 3};
  g.input_q = {1.0 / 128, 128};

  Builder b(g, rng);
  b.conv(LayerKind::C2D, "conv_stem", -1, make_divisible(config.stem_channels * alpha), 2, true);

  int block = 0;
  for (const auto& spec : config.blocks) {
    const int out_channels = make_divisible(spec.channels * alpha);
    for (int r = 0; r < spec.repeats; ++r, ++block) {
      const int stride = r == 0 ? spec.stride : 1;
      const int source = b.last();
      const int in_channels = b.current_dims().channels;
      const std::string prefix = "block" + std::to_string(block);
      if (spec.expansion != 1) {
        b.conv(LayerKind::EXP, prefix + "_expand", block, in_channels * spec.expansion, 1, true);
      }
      b.conv(LayerKind::DWC, prefix + "_dw", block, 0, stride, true);
      b.conv(LayerKind::PRO, prefix + "_project", block, out_channels, 1, false);
      if (config.residuals && stride == 1 && in_channels == out_channels) {
        b.add(prefix + "_add", block, source);
      }
    }
  }

  if (config.head) {
    const int head = alpha > 1.0 ? make_divisible(config.head_channels * alpha) : config.head_channels;
    b.conv(LayerKind::EXP, "conv_head", -1, head, 1, true);
    b.avgpool("avgpool");
    b.conv(LayerKind::PRO, "classifier", -1, config.num_classes, 1, false);
  }
  g.validate();
  return g;
}

ModelGraph build_mobilenet_v2(double width_multiplier, int resolution, std::uint64_t seed) {
  if (resolution <= 0 || resolution % 32 != 0) throw DomainError("resolution must be a positive multiple of 32");
  return build_network(NetworkConfig::mobilenet_v2(width_multiplier, resolution), seed);
}

void ModelGraph::validate() const {
  if (layers.empty()) throw ShapeError("model has no layers");
  Dims prev_dims = input_dims;
  QuantParams prev_q = input_q;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    auto fail = [&](const std::string& what) {
      std::ostringstream os;
      os << "layer " << i << " (" << l.name << ", " << to_string(l.kind) << "): " << what;
      throw ShapeError(os.str());
    };
    if (!(l.in == prev_dims)) fail("input dims disagree with the previous layer's output");
    if (!(l.in_q == prev_q)) fail("input quantization disagrees with the previous layer's output");
    if (l.stride != 1 && l.stride != 2) fail("stride must be 1 or 2");
    if (l.out.height <= 0 || l.out.width <= 0 || l.out.channels <= 0) fail("output dims must be positive");

    if (is_conv(l.kind)) {
      if (!l.filters) fail("convolution without filters");
      l.filters->validate();
      const auto& f = *l.filters;
      const bool spatial = l.kind == LayerKind::C2D || l.kind == LayerKind::DWC;
      const int k = spatial ? 3 : 1;
      if (f.kernel_h != k || f.kernel_w != k) fail("unexpected kernel size");
      const int expect_in = l.kind == LayerKind::DWC ? 1 : l.in.channels;
      if (f.in_channels != expect_in || f.out_channels != l.out.channels) fail("filter channels disagree with dims");
      if (l.kind == LayerKind::DWC && l.out.channels != l.in.channels) fail("depthwise layer changes channel count");
      const int s = spatial ? l.stride : 1;
      if (l.out.height != conv_output_size(l.in.height, s) || l.out.width != conv_output_size(l.in.width, s)) {
        fail("output spatial dims disagree with stride");
      }
    } else {
      if (l.filters) fail("layer kind takes no filters");
      if (l.kind == LayerKind::ADD && !(l.out == l.in)) fail("ADD must preserve dims");
      if (l.kind == LayerKind::AVGPOOL && !(l.out == Dims{1, 1, l.in.channels})) fail("AVGPOOL must reduce to 1x1");
    }
    if (!l.requant.empty() && l.requant.size() != static_cast<std::size_t>(l.out.channels)) {
      fail("requantization table length disagrees with output channels");
    }
    prev_dims = l.out;
    prev_q = l.out_q;
  }

  std::vector<int> links(layers.size(), 0);
  for (const auto& r : residuals) {
    if (r.add_layer < 0 || r.add_layer >= static_cast<int>(layers.size())) throw ShapeError("residual link out of range");
    if (r.source_layer < 0 || r.source_layer >= r.add_layer) throw ShapeError("residual source must precede its ADD");
    const auto& add = layers[static_cast<std::size_t>(r.add_layer)];
    const auto& src = layers[static_cast<std::size_t>(r.source_layer)];
    if (add.kind != LayerKind::ADD) throw ShapeError("residual link targets a non-ADD layer");
    if (!(src.out == add.in)) throw ShapeError("residual shortcut dims differ from the ADD input");
    if (!(src.out_q == add.residual_q)) throw ShapeError("residual quantization disagrees with its source");
    ++links[static_cast<std::size_t>(r.add_layer)];
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::ADD && (links[i] != 1 || !layers[i].residual)) {
      throw ShapeError("ADD layer " + layers[i].name + " needs exactly one residual link");
    }
  }
}

LayerDesc pad_channels(const LayerDesc& layer) {
  LayerDesc l = layer;
  const int in_c = l.kind == LayerKind::C2D ? l.in.channels : round_up16(l.in.channels);
  const int out_c = round_up16(l.out.channels);
  if (l.kind == LayerKind::DWC || l.kind == LayerKind::ADD || l.kind == LayerKind::AVGPOOL) {
    l.in.channels = out_c;
    l.out.channels = out_c;
  } else {
    l.in.channels = in_c;
    l.out.channels = out_c;
  }

  if (l.filters) {
    const QFilterSet& src = *layer.filters;
    QFilterSet f;
    f.kernel_h = src.kernel_h;
    f.kernel_w = src.kernel_w;
    f.in_channels = l.kind == LayerKind::DWC ? 1 : l.in.channels;
    f.out_channels = l.out.channels;
    f.weights.resize(f.filter_volume() * f.out_channels);
    for (int o = 0; o < f.out_channels; ++o) {
      const bool original = o < src.out_channels;
      const int zero = original ? src.weight_zero_points[o] : src.weight_zero_points[0];
      f.weight_zero_points.push_back(zero);
      f.weight_scales.push_back(original ? src.weight_scales[o] : src.weight_scales[0]);
      f.biases.push_back(original ? src.biases[o] : 0);
      for (int ky = 0; ky < f.kernel_h; ++ky) {
        for (int kx = 0; kx < f.kernel_w; ++kx) {
          for (int c = 0; c < f.in_channels; ++c) {
            const bool live = original && c < src.in_channels;
            f.weights[f.index(o, ky, kx, c)] = live ? src.at(o, ky, kx, c) : static_cast<std::uint8_t>(zero);
          }
        }
      }
    }
    l.filters = std::move(f);
  }
  if (!l.requant.empty()) {
    const auto first = l.requant.front();
    l.requant.resize(static_cast<std::size_t>(l.out.channels), first);
  }
  if (l.kind == LayerKind::EXP || l.kind == LayerKind::PRO) {
    l.apass = l.in.channels / 16;
    l.fpass = l.out.channels / 16;
  } else if (l.kind == LayerKind::C2D) {
    l.apass = 1;
    l.fpass = l.out.channels / 16;
  } else {
    l.apass = l.out.channels / 16;
    l.fpass = l.apass;
  }
  return l;
}

LayerDesc prepare_layer(const LayerDesc& layer, quant::Rounding rounding) {
  LayerDesc l = layer;
  auto context = [&](const Error& e) {
    std::ostringstream os;
    os << "layer " << l.name << " (" << to_string(l.kind) << "): " << e.what();
    return os.str();
  };
  const quant::RequantParams base{{}, l.out_q.zero_point, 0, 255};
  try {
    l.requant.clear();
    l.add.reset();
    if (l.filters) {
      l.bias_bits = bias_bits_for(l.kind);
      auto& f = *l.filters;
      for (int c = 0; c < f.out_channels; ++c) {
        const double m = l.in_q.scale * f.weight_scales[c] / l.out_q.scale;
        auto p = base;
        p.ms = quant::quantize_multiplier(m, rounding);
        l.requant.push_back(p);
        f.biases[c] = quant::narrow_bias(f.biases[c], l.bias_bits);
      }
    } else if (l.kind == LayerKind::AVGPOOL) {
      const double m = l.in_q.scale / (static_cast<double>(l.in.pixels()) * l.out_q.scale);
      auto p = base;
      p.ms = quant::quantize_multiplier(m, rounding);
      l.requant.assign(static_cast<std::size_t>(l.out.channels), p);
    } else if (l.kind == LayerKind::ADD) {
      const double twice_max = 2.0 * std::max(l.in_q.scale, l.residual_q.scale);
      quant::AddParams a;
      a.mult1 = quant::quantize_multiplier(l.in_q.scale / twice_max, rounding);
      a.mult2 = quant::quantize_multiplier(l.residual_q.scale / twice_max, rounding);
      a.mult3 = quant::quantize_multiplier(twice_max / (std::ldexp(1.0, quant::kAddPreShift) * l.out_q.scale), rounding);
      a.in1_zero = l.in_q.zero_point;
      a.in2_zero = l.residual_q.zero_point;
      a.out_zero = l.out_q.zero_point;
      l.add = a;
    }
  } catch (const RangeError& e) {
    throw RangeError(context(e));
  } catch (const DomainError& e) {
    throw DomainError(context(e));
  }
  return l;
}

PreparedModel prepare(const ModelGraph& graph, quant::Rounding rounding) {
  graph.validate();
  PreparedModel pm;
  pm.rounding = rounding;
  pm.graph = graph;
  for (auto& l : pm.graph.layers) l = pad_channels(prepare_layer(l, rounding));
  // Padding changes dims; keep the entry tensor consistent.
  pm.graph.validate();
  pm.output_channels = graph.layers.back().logical_out_channels;
  pm.rounds = dataflow::schedule_rounds(pm);
  return pm;
}

std::uint64_t weight_bytes(const LayerDesc& layer) { return layer.filters ? layer.filters->weights.size() : 0; }

LayerDesc random_layer(LayerKind kind, Dims in, int out_channels, int stride, Rng& rng, LayerStyle style) {
  LayerDesc l;
  l.kind = kind;
  l.name = std::string("random_") + std::string(to_string(kind));
  l.in = in;
  l.stride = (kind == LayerKind::C2D || kind == LayerKind::DWC) ? stride : 1;
  l.out = output_dims(kind, in, out_channels, l.stride);
  l.logical_in_channels = l.in.channels;
  l.logical_out_channels = l.out.channels;
  if (style == LayerStyle::Benign) {
    l.in_q = draw_activation_quant(rng, true);
    l.out_q = draw_activation_quant(rng, kind == LayerKind::PRO || kind == LayerKind::ADD ? false : true);
  } else {
    l.in_q = {log_uniform(rng, kMinActivationScale, kMaxActivationScale), uniform_int(rng, 0, 255)};
    l.out_q = {log_uniform(rng, kMinActivationScale, kMaxActivationScale), uniform_int(rng, 0, 255)};
  }
  switch (kind) {
    case LayerKind::ADD:
      l.residual = true;
      l.residual_q = {l.in_q.scale * log_uniform(rng, 0.25, 4.0), uniform_int(rng, 0, 255)};
      l.out_q.scale = std::max(l.in_q.scale, l.residual_q.scale) * log_uniform(rng, 0.5, 2.0);
      break;
    case LayerKind::AVGPOOL:
      l.out_q.scale = l.in_q.scale * log_uniform(rng, in.pixels() > 1 ? 0.5 : 1.01, 2.0);
      break;
    default: {
      const auto shape = filter_shape(kind, in, out_channels);
      l.filters = style == LayerStyle::Benign ? make_benign_filters(shape, kind, l.in_q.scale, 0.6, rng)
                                              : make_adversarial_filters(shape, l.in_q.scale, l.out_q.scale, rng);
    }
  }
  return l;
}

QTensor random_tensor(Dims dims, QuantParams q, Rng& rng) {
  QTensor t(dims, q);
  std::uniform_int_distribution<int> byte(0, 255);
  for (auto& v : t.data) v = static_cast<std::uint8_t>(byte(rng));
  return t;
}

QTensor random_image(const ModelGraph& graph, std::uint64_t seed) {
  Rng rng(seed);
  return random_tensor(graph.input_dims, graph.input_q, rng);
}

}  // namespace semistream::model
