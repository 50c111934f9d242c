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

#include "engines.hpp"

#include <algorithm>
#include <sstream>

#include "errors.hpp"

namespace semistream::engines {

namespace {

void require(bool ok, const LayerDesc& layer, const std::string& what) {
  if (!ok) {
    std::ostringstream os;
    os << to_string(engine_for(layer.kind)) << " engine, layer " << layer.name << ": " << what;
    throw ShapeError(os.str());
  }
}

void require_input(const QTensor& input, const LayerDesc& layer) {
  input.validate();
  if (!(input.dims == layer.in)) {
    std::ostringstream os;
    os << "input is " << input.dims.height << "x" << input.dims.width << "x" << input.dims.channels
       << ", layer expects " << layer.in.height << "x" << layer.in.width << "x" << layer.in.channels;
    require(false, layer, os.str());
  }
}

void require_prepared(const LayerDesc& layer) {
  require(layer.requant.size() == static_cast<std::size_t>(layer.out.channels), layer,
          "layer has no per-channel requantization (run prepare first)");
}

std::uint64_t param_bytes(const LayerDesc& layer) {
  if (!layer.filters) return 0;
  const auto bias_bits = static_cast<std::uint64_t>(layer.bias_bits) * layer.filters->out_channels;
  return layer.filters->weights.size() + (bias_bits + 7) / 8;
}

}  // namespace

std::string_view to_string(Engine e) {
  switch (e) {
    case Engine::C2D: return "C2D";
    case Engine::DWC: return "DWC";
    case Engine::PRO: return "PRO";
    case Engine::EXP: return "EXP";
    case Engine::ADD: return "ADD";
  }
  return "?";
}

Engine engine_for(LayerKind kind) {
  switch (kind) {
    case LayerKind::C2D: return Engine::C2D;
    case LayerKind::DWC:
    case LayerKind::AVGPOOL: return Engine::DWC;
    case LayerKind::EXP: return Engine::EXP;
    case LayerKind::PRO: return Engine::PRO;
    case LayerKind::ADD: return Engine::ADD;
  }
  return Engine::PRO;
}

std::uint64_t madds_per_cycle(Engine e, const EngineConfig& config) {
  switch (e) {
    case Engine::C2D: return kC2dMaddsPerFilter * static_cast<std::uint64_t>(config.c2d_filters);
    case Engine::DWC: return kDwcMaddsPerCycle;
    case Engine::PRO:
    case Engine::EXP: return kPointwiseMaddsPerCycle;
    case Engine::ADD: return config.add_ops_per_cycle;
  }
  return 0;
}

EngineStats& EngineStats::operator+=(const EngineStats& o) {
  cycles += o.cycles;
  madds += o.madds;
  useful_madds += o.useful_madds;
  weight_bytes += o.weight_bytes;
  output_elements += o.output_elements;
  accumulator_words = std::max(accumulator_words, o.accumulator_words);
  return *this;
}

std::uint64_t analytic_cycles(const LayerDesc& layer) {
  const std::uint64_t batches_in = layer.in.pixels() * static_cast<std::uint64_t>(layer.in.channels / kBatchLanes);
  switch (layer.kind) {
    case LayerKind::C2D: return layer.in.pixels();
    case LayerKind::DWC:
    case LayerKind::AVGPOOL:
    case LayerKind::ADD: return batches_in;
    case LayerKind::EXP:
    case LayerKind::PRO:
      return layer.out.pixels() * static_cast<std::uint64_t>(layer.apass) * static_cast<std::uint64_t>(layer.fpass);
  }
  return 0;
}

EngineStats analytic_stats(const LayerDesc& layer, const EngineConfig& config) {
  EngineStats s;
  s.cycles = analytic_cycles(layer);
  EngineConfig c = config;
  if (layer.kind == LayerKind::C2D) c.c2d_filters = layer.out.channels;
  s.madds = madds_per_cycle(engine_for(layer.kind), c) * s.cycles;
  s.output_elements = layer.out.elements();
  s.weight_bytes = param_bytes(layer);
  switch (layer.kind) {
    case LayerKind::C2D: s.useful_madds = s.output_elements * (9ULL * layer.in.channels + 1); break;
    case LayerKind::DWC: s.useful_madds = s.output_elements * 10; break;
    case LayerKind::AVGPOOL: s.useful_madds = s.output_elements * (layer.in.pixels() + 1); break;
    case LayerKind::EXP:
    case LayerKind::PRO: s.useful_madds = s.output_elements * (static_cast<std::uint64_t>(layer.in.channels) + 1); break;
    case LayerKind::ADD: s.useful_madds = s.output_elements * 3; break;
  }
  if (layer.kind == LayerKind::EXP) s.accumulator_words = static_cast<std::uint64_t>(layer.fpass) * kBatchLanes;
  return s;
}

// ---------------------------------------------------------------------------

LaneAddress WeightMemoryImage::locate(int filter, int channel, int kernel_position) const {
  switch (kind) {
    case LayerKind::DWC: return {kernel_position, filter / kBatchLanes, filter % kBatchLanes};
    case LayerKind::PRO:
      return {filter % kBatchLanes, (filter / kBatchLanes) * apass + channel / kBatchLanes, channel % kBatchLanes};
    case LayerKind::EXP:
      return {channel % kBatchLanes, (channel / kBatchLanes) * fpass + filter / kBatchLanes, filter % kBatchLanes};
    default: throw ShapeError("no weight memory layout for this layer kind");
  }
}

WeightMemoryImage layout_weights(LayerKind kind, const QFilterSet& filters, int bias_bits) {
  filters.validate();
  WeightMemoryImage img;
  img.kind = kind;
  if (bias_bits == 0) bias_bits = kind == LayerKind::PRO ? 18 : 16;
  img.bias_word_bits = kBatchLanes * bias_bits;
  img.filters = filters.out_channels;
  if (kind == LayerKind::DWC) {
    if (filters.kernel_h != 3 || filters.kernel_w != 3 || filters.in_channels != 1) {
      throw ShapeError("depthwise layout needs 3x3 single-channel filters");
    }
    if (filters.out_channels % kBatchLanes != 0) throw ShapeError("depthwise layout needs channels padded to 16");
    img.memory_count = 9;
    img.channels = 1;
    img.kernel_positions = 9;
    img.apass = img.fpass = filters.out_channels / kBatchLanes;
    img.words.assign(9, std::vector<Word>(static_cast<std::size_t>(img.apass)));
    for (int ch = 0; ch < filters.out_channels; ++ch) {
      for (int k = 0; k < 9; ++k) {
        const auto a = img.locate(ch, 0, k);
        img.words[a.memory][a.address][a.lane] = filters.at(ch, k / 3, k % 3, 0);
      }
    }
    return img;
  }
  if (kind != LayerKind::PRO && kind != LayerKind::EXP) throw ShapeError("no weight memory layout for this layer kind");
  if (filters.kernel_h != 1 || filters.kernel_w != 1) throw ShapeError("pointwise layout needs 1x1 filters");
  if (filters.in_channels % kBatchLanes != 0 || filters.out_channels % kBatchLanes != 0) {
    throw ShapeError("pointwise layout needs channels and filters padded to 16");
  }
  img.memory_count = kBatchLanes;
  img.channels = filters.in_channels;
  img.apass = filters.in_channels / kBatchLanes;
  img.fpass = filters.out_channels / kBatchLanes;
  img.words.assign(kBatchLanes, std::vector<Word>(static_cast<std::size_t>(img.apass) * img.fpass));
  for (int o = 0; o < filters.out_channels; ++o) {
    for (int c = 0; c < filters.in_channels; ++c) {
      const auto a = img.locate(o, c, 0);
      img.words[a.memory][a.address][a.lane] = filters.at(o, 0, 0, c);
    }
  }
  return img;
}

// ---------------------------------------------------------------------------

SlidingWindow::SlidingWindow(int height, int width, int lanes, int stride, std::uint8_t pad_value)
    : height_(height), width_(width), lanes_(lanes), stride_(stride), pad_(pad_value) {
  pad_top_ = model::same_padding_before(height, 3, stride);
  pad_left_ = model::same_padding_before(width, 3, stride);
  out_h_ = model::conv_output_size(height, stride);
  out_w_ = model::conv_output_size(width, stride);
  padded_h_ = (out_h_ - 1) * stride + 3;
  padded_w_ = (out_w_ - 1) * stride + 3;
  lines_.assign(static_cast<std::size_t>(2) * padded_w_ * lanes, pad_value);
  window_.assign(static_cast<std::size_t>(9) * lanes, pad_value);
  incoming_.assign(static_cast<std::size_t>(lanes), pad_value);
}

bool SlidingWindow::step(const std::function<void(std::span<std::uint8_t>)>& fetch) {
  if (row_ >= padded_h_) return false;
  has_window_ = false;
  const bool inside = row_ >= pad_top_ && row_ < pad_top_ + height_ && col_ >= pad_left_ && col_ < pad_left_ + width_;
  if (inside) {
    fetch(incoming_);
    ++fetched_;
  } else {
    std::fill(incoming_.begin(), incoming_.end(), pad_);
  }
  const auto lanes = static_cast<std::size_t>(lanes_);
  auto cell = [&](int ky, int kx) { return window_.begin() + static_cast<std::ptrdiff_t>((ky * 3 + kx) * lanes); };
  auto line = [&](int r) { return lines_.begin() + static_cast<std::ptrdiff_t>((r * padded_w_ + col_) * lanes); };
  for (int ky = 0; ky < 3; ++ky) {
    std::copy_n(cell(ky, 1), 2 * lanes, cell(ky, 0));
  }
  std::copy_n(line(0), lanes, cell(0, 2));
  std::copy_n(line(1), lanes, cell(1, 2));
  std::copy_n(incoming_.begin(), lanes, cell(2, 2));
  std::copy_n(line(1), lanes, line(0));
  std::copy_n(incoming_.begin(), lanes, line(1));

  if (row_ >= 2 && col_ >= 2) {
    const int top = row_ - 2;
    const int left = col_ - 2;
    if (top % stride_ == 0 && left % stride_ == 0 && top / stride_ < out_h_ && left / stride_ < out_w_) {
      has_window_ = true;
      out_row_ = top / stride_;
      out_col_ = left / stride_;
    }
  }
  if (++col_ == padded_w_) {
    col_ = 0;
    ++row_;
  }
  return true;
}

// ---------------------------------------------------------------------------

EntryConv::EntryConv(const LayerDesc& layer, Rounding rounding) : layer_(layer), rounding_(rounding) {
  require(layer.kind == LayerKind::C2D, layer, "not an entry convolution");
  require(layer.filters.has_value(), layer, "missing filters");
  const auto& f = *layer.filters;
  require(f.kernel_h == 3 && f.kernel_w == 3 && f.in_channels == 3, layer, "entry engine handles 3x3x3 kernels only");
  require(f.out_channels % kBatchLanes == 0, layer, "entry engine needs a filter count divisible by 16");
  require(layer.in.channels == 3, layer, "entry engine takes 3-channel frames");
  require_prepared(layer);
}

void EntryConv::compute(const SlidingWindow& window, std::span<std::uint8_t> out) const {
  const auto& f = *layer_.filters;
  const std::int32_t a0 = layer_.in_q.zero_point;
  for (int o = 0; o < f.out_channels; ++o) {
    std::int32_t acc = f.biases[o];
    const std::int32_t w0 = f.weight_zero_points[o];
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        for (int c = 0; c < 3; ++c) {
          acc += (window.tap(ky, kx, c) - a0) * (f.at(o, ky, kx, c) - w0);
        }
      }
    }
    out[o] = quant::requantize_clamped(acc, layer_.requant[o], rounding_);
  }
}

EngineResult c2d_forward(const QTensor& input, const LayerDesc& layer, Rounding rounding) {
  const EntryConv conv(layer, rounding);
  require_input(input, layer);
  EngineResult r{QTensor(layer.out, layer.out_q), analytic_stats(layer)};
  SlidingWindow window(input.dims.height, input.dims.width, 3, layer.stride,
                       static_cast<std::uint8_t>(layer.in_q.zero_point));
  std::size_t next_pixel = 0;
  const auto fetch = [&](std::span<std::uint8_t> px) {
    const auto src = input.pixel(next_pixel++);
    std::copy(src.begin(), src.end(), px.begin());
  };
  while (window.step(fetch)) {
    if (window.has_window()) {
      conv.compute(window, r.output.pixel(static_cast<std::size_t>(window.out_row()) * layer.out.width + window.out_col()));
    }
  }
  r.stats.cycles = window.pixels_fetched();
  r.stats.madds = kC2dMaddsPerFilter * static_cast<std::uint64_t>(layer.out.channels) * r.stats.cycles;
  return r;
}

void dwc_run(const QTensor& input, const LayerDesc& layer, Rounding rounding,
             const std::function<void(const ChannelBatch&)>& emit) {
  require(layer.kind == LayerKind::DWC, layer, "not a depthwise layer");
  require(layer.filters.has_value(), layer, "missing filters");
  require(layer.in.channels % kBatchLanes == 0, layer, "channel count must be a multiple of 16");
  require_input(input, layer);
  require_prepared(layer);
  const auto& f = *layer.filters;
  const WeightMemoryImage memory = layout_weights(LayerKind::DWC, f, layer.bias_bits);
  const std::int32_t a0 = layer.in_q.zero_point;
  const int passes = layer.in.channels / kBatchLanes;
  std::vector<std::uint8_t> slice(kBatchLanes);
  for (int pass = 0; pass < passes; ++pass) {
    SlidingWindow window(input.dims.height, input.dims.width, kBatchLanes, layer.stride, static_cast<std::uint8_t>(a0));
    std::size_t next_pixel = 0;
    const auto fetch = [&](std::span<std::uint8_t> px) {
      const auto src = input.pixel(next_pixel++).subspan(static_cast<std::size_t>(pass) * kBatchLanes, kBatchLanes);
      std::copy(src.begin(), src.end(), px.begin());
    };
    while (window.step(fetch)) {
      if (!window.has_window()) continue;
      ChannelBatch out{window.out_row(), window.out_col(), pass, {}};
      for (int lane = 0; lane < kBatchLanes; ++lane) {
        const int ch = pass * kBatchLanes + lane;
        const std::int32_t w0 = f.weight_zero_points[ch];
        std::int32_t acc = f.biases[ch];
        for (int k = 0; k < 9; ++k) {
          acc += (window.tap(k / 3, k % 3, lane) - a0) * (memory.word(k, pass)[lane] - w0);
        }
        out.values[lane] = quant::requantize_clamped(acc, layer.requant[ch], rounding);
      }
      emit(out);
    }
  }
}

EngineResult dwc_forward(const QTensor& input, const LayerDesc& layer, Rounding rounding) {
  EngineResult r{QTensor(layer.out, layer.out_q), analytic_stats(layer)};
  dwc_run(input, layer, rounding, [&](const ChannelBatch& b) { store_batch(r.output, b); });
  return r;
}

EngineResult dwc_avgpool(const QTensor& input, const LayerDesc& layer, Rounding rounding) {
  require(layer.kind == LayerKind::AVGPOOL, layer, "not a pooling layer");
  require(layer.in.channels % kBatchLanes == 0, layer, "channel count must be a multiple of 16");
  require_input(input, layer);
  require_prepared(layer);
  EngineResult r{QTensor(layer.out, layer.out_q), analytic_stats(layer)};
  const std::int32_t a0 = layer.in_q.zero_point;
  const int passes = layer.in.channels / kBatchLanes;
  for (int pass = 0; pass < passes; ++pass) {
    std::array<std::int32_t, kBatchLanes> acc{};
    for (std::size_t p = 0; p < input.dims.pixels(); ++p) {
      const auto px = input.pixel(p);
      for (int lane = 0; lane < kBatchLanes; ++lane) acc[lane] += px[pass * kBatchLanes + lane] - a0;
    }
    for (int lane = 0; lane < kBatchLanes; ++lane) {
      const int ch = pass * kBatchLanes + lane;
      r.output.data[ch] = quant::requantize_clamped(acc[lane], layer.requant[ch], rounding);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

ProjectionEngine::ProjectionEngine(const LayerDesc& layer, Rounding rounding) : layer_(layer), rounding_(rounding) {
  require(layer.kind == LayerKind::PRO || layer.kind == LayerKind::EXP, layer, "not a pointwise layer");
  require(layer.filters.has_value(), layer, "missing filters");
  require(layer.in.channels % kBatchLanes == 0 && layer.out.channels % kBatchLanes == 0, layer,
          "channels and filters must be multiples of 16");
  require_prepared(layer);
  memory_ = layout_weights(LayerKind::PRO, *layer.filters, layer.bias_bits);
}

void ProjectionEngine::filter_batch(std::span<const std::uint8_t> activations, int fpass,
                                    std::span<std::uint8_t> out) const {
  const auto& f = *layer_.filters;
  const std::int32_t az = layer_.in_q.zero_point;
  const int apass_count = memory_.apass;
  std::array<std::int32_t, kBatchLanes> acc{};
  for (int i = 0; i < kBatchLanes; ++i) acc[i] = f.biases[fpass * kBatchLanes + i];
  for (int apass = 0; apass < apass_count; ++apass) {
    const std::uint8_t* act = activations.data() + apass * kBatchLanes;
    for (int fi = 0; fi < kBatchLanes; ++fi) {
      const Word& wei = memory_.word(fi, fpass * apass_count + apass);
      const std::int32_t wz = f.weight_zero_points[fpass * kBatchLanes + fi];
      std::int32_t sum = 0;
      for (int a = 0; a < kBatchLanes; ++a) sum += (act[a] - az) * (wei[a] - wz);
      acc[fi] += sum;
    }
    if (apass == apass_count - 1) {
      for (int fi = 0; fi < kBatchLanes; ++fi) {
        out[fi] = quant::requantize_clamped(acc[fi], layer_.requant[fpass * kBatchLanes + fi], rounding_);
      }
    }
  }
}

EngineResult pro_forward(const QTensor& input, const LayerDesc& layer, Rounding rounding) {
  const ProjectionEngine engine(layer, rounding);
  require_input(input, layer);
  EngineResult r{QTensor(layer.out, layer.out_q), analytic_stats(layer)};
  for (std::size_t p = 0; p < input.dims.pixels(); ++p) {
    const auto out = r.output.pixel(p);
    for (int fpass = 0; fpass < layer.fpass; ++fpass) {
      engine.filter_batch(input.pixel(p), fpass, out.subspan(static_cast<std::size_t>(fpass) * kBatchLanes, kBatchLanes));
    }
  }
  return r;
}

ExpansionEngine::ExpansionEngine(const LayerDesc& layer, Rounding rounding) : layer_(layer), rounding_(rounding) {
  require(layer.kind == LayerKind::EXP || layer.kind == LayerKind::PRO, layer, "not a pointwise layer");
  require(layer.filters.has_value(), layer, "missing filters");
  require(layer.in.channels % kBatchLanes == 0 && layer.out.channels % kBatchLanes == 0, layer,
          "channels and filters must be multiples of 16");
  require_prepared(layer);
  memory_ = layout_weights(LayerKind::EXP, *layer.filters, layer.bias_bits);
  acc_.resize(static_cast<std::size_t>(layer.fpass) * kBatchLanes);
  out_.resize(acc_.size());
  begin_pixel();
}

void ExpansionEngine::begin_pixel() {
  const auto& b = layer_.filters->biases;
  std::copy(b.begin(), b.end(), acc_.begin());
  next_apass_ = 0;
}

void ExpansionEngine::consume(int apass, std::span<const std::uint8_t> batch) {
  if (apass != next_apass_) {
    std::ostringstream os;
    os << "EXP engine, layer " << layer_.name << ": activation batch " << apass << " arrived, expected " << next_apass_;
    throw SequencingError(os.str());
  }
  const auto& f = *layer_.filters;
  const std::int32_t az = layer_.in_q.zero_point;
  const int fpass_count = memory_.fpass;
  std::array<std::int32_t, kBatchLanes> act{};
  for (int a = 0; a < kBatchLanes; ++a) act[a] = batch[a] - az;
  for (int fpass = 0; fpass < fpass_count; ++fpass) {
    const int address = apass * fpass_count + fpass;
    std::int32_t* acc = acc_.data() + fpass * kBatchLanes;
    for (int fi = 0; fi < kBatchLanes; ++fi) {
      const std::int32_t wz = f.weight_zero_points[fpass * kBatchLanes + fi];
      std::int32_t sum = 0;
      for (int a = 0; a < kBatchLanes; ++a) sum += act[a] * (memory_.words[a][address][fi] - wz);
      acc[fi] += sum;
    }
    if (apass == layer_.apass - 1) {
      for (int fi = 0; fi < kBatchLanes; ++fi) {
        const int o = fpass * kBatchLanes + fi;
        out_[o] = quant::requantize_clamped(acc[fi], layer_.requant[o], rounding_);
      }
    }
  }
  ++next_apass_;
}

EngineResult exp_forward_stream(const std::function<ChannelBatch()>& next_batch, const LayerDesc& layer,
                                Rounding rounding) {
  ExpansionEngine engine(layer, rounding);
  EngineResult r{QTensor(layer.out, layer.out_q), analytic_stats(layer)};
  for (int row = 0; row < layer.in.height; ++row) {
    for (int col = 0; col < layer.in.width; ++col) {
      engine.begin_pixel();
      for (int apass = 0; apass < layer.apass; ++apass) {
        const ChannelBatch b = next_batch();
        if (b.row != row || b.col != col || b.batch_index != apass) {
          throw SequencingError("EXP engine, layer " + layer.name + ": activation stream out of order");
        }
        engine.consume(apass, b.values);
      }
      const auto out = engine.outputs();
      std::copy(out.begin(), out.end(), r.output.pixel(static_cast<std::size_t>(row) * layer.out.width + col).begin());
    }
  }
  return r;
}

EngineResult exp_forward(const QTensor& input, const LayerDesc& layer, Rounding rounding) {
  require(layer.kind == LayerKind::EXP || layer.kind == LayerKind::PRO, layer, "not a pointwise layer");
  require_input(input, layer);
  TensorBatchReader reader(input);
  return exp_forward_stream([&] { return reader.next(); }, layer, rounding);
}

// ---------------------------------------------------------------------------

ChannelBatch add_batch(const ChannelBatch& in1, const ChannelBatch& in2, const quant::AddParams& p,
                       Rounding rounding) {
  ChannelBatch out{in1.row, in1.col, in1.batch_index, {}};
  for (int i = 0; i < kBatchLanes; ++i) out.values[i] = quant::add_element(in1.values[i], in2.values[i], p, rounding);
  return out;
}

EngineResult add_forward(const QTensor& in1, const QTensor& in2, const LayerDesc& layer, Rounding rounding,
                         const EngineConfig& config) {
  require(layer.kind == LayerKind::ADD, layer, "not an ADD layer");
  require(layer.add.has_value(), layer, "ADD scalars missing (run prepare first)");
  require(in1.dims.channels % kBatchLanes == 0, layer, "channel count must be a multiple of 16");
  require_input(in1, layer);
  in2.validate();
  require(in2.dims == in1.dims, layer, "residual input dims differ from the streamed input");
  EngineResult r{QTensor(layer.out, layer.out_q), analytic_stats(layer, config)};
  for (std::size_t i = 0; i < in1.data.size(); ++i) {
    r.output.data[i] = quant::add_element(in1.data[i], in2.data[i], *layer.add, rounding);
  }
  return r;
}

EngineResult add_passthrough(const QTensor& input) {
  EngineResult r{input, {}};
  r.stats.cycles = input.dims.pixels() * static_cast<std::uint64_t>((input.dims.channels + kBatchLanes - 1) / kBatchLanes);
  r.stats.output_elements = input.dims.elements();
  return r;
}

EngineResult run_layer(const QTensor& input, const LayerDesc& layer, Rounding rounding) {
  switch (layer.kind) {
    case LayerKind::C2D: return c2d_forward(input, layer, rounding);
    case LayerKind::DWC: return dwc_forward(input, layer, rounding);
    case LayerKind::AVGPOOL: return dwc_avgpool(input, layer, rounding);
    case LayerKind::EXP: return exp_forward(input, layer, rounding);
    case LayerKind::PRO: return pro_forward(input, layer, rounding);
    case LayerKind::ADD: break;
  }
  throw ShapeError("layer " + layer.name + " needs a residual input");
}

}  // namespace semistream::engines
