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

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "model.hpp"
#include "stream.hpp"

namespace semistream::engines {

using model::LayerDesc;
using model::LayerKind;
using quant::Rounding;

enum class Engine : std::uint8_t { C2D, DWC, PRO, EXP, ADD };
inline constexpr Engine kAllEngines[] = {Engine::C2D, Engine::DWC, Engine::PRO, Engine::EXP, Engine::ADD};

std::string_view to_string(Engine e);
Engine engine_for(LayerKind kind);

// One MADD counts as one op.
inline constexpr std::uint64_t kC2dMaddsPerFilter = 28;  // 3x3x3 taps + scaling
inline constexpr std::uint64_t kDwcMaddsPerCycle = 160;  // 16 channels x (9 taps + scaling)
inline constexpr std::uint64_t kPointwiseMaddsPerCycle = 272;  // 16x16 block + 16 scalings
inline constexpr std::uint64_t kDefaultAddOpsPerCycle = 54;

struct EngineConfig {
  std::uint64_t add_ops_per_cycle = kDefaultAddOpsPerCycle;
  // C2D filter count used when no layer is at hand (the entry layer).
  int c2d_filters = 32;
};

std::uint64_t madds_per_cycle(Engine e, const EngineConfig& config = {});

struct EngineStats {
  std::uint64_t cycles = 0;
  // Pipeline slots times the per-cycle MADD constant.
  std::uint64_t madds = 0;
  // Output elements times (kernel volume + one scaling).
  std::uint64_t useful_madds = 0;
  std::uint64_t weight_bytes = 0;
  std::uint64_t output_elements = 0;
  // Signed 32-bit partial sums held per pixel (EXP only).
  std::uint64_t accumulator_words = 0;

  EngineStats& operator+=(const EngineStats& o);
  bool operator==(const EngineStats&) const = default;
};

struct EngineResult {
  QTensor output;
  EngineStats stats;
};

/// Initiation-interval-1 cycle count of the engine that runs `layer`.
std::uint64_t analytic_cycles(const LayerDesc& layer);

/// Stats the engine reports for `layer` without executing it.
EngineStats analytic_stats(const LayerDesc& layer, const EngineConfig& config = {});

// ---------------------------------------------------------------------------
// Weight memories

struct LaneAddress {
  int memory = 0;
  int address = 0;
  int lane = 0;

  bool operator==(const LaneAddress&) const = default;
};

using Word = std::array<std::uint8_t, kBatchLanes>;

/// On-chip weight memories of one DWC/PRO/EXP layer.
///
///  DWC: 9 memories, one per kernel position; word `pass` holds the 16
///       channels of that pass.
///  PRO: 16 memories; memory f holds filter f of every filter batch, word
///       fpass*APASS + apass holds 16 channel weights.
///  EXP: 16 memories; memory j holds channel j of every channel batch, word
///       apass*FPASS + fpass holds that channel for the 16 filters of the
///       batch.
struct WeightMemoryImage {
  LayerKind kind = LayerKind::PRO;
  int memory_count = 0;
  int word_bits = 128;
  int bias_word_bits = 0;
  int filters = 0;
  int channels = 0;
  int kernel_positions = 1;
  int apass = 0;
  int fpass = 0;
  std::vector<std::vector<Word>> words;

  /// Placement of weight (filter, channel, kernel position).  DWC uses the
  /// channel index as the filter and channel 0.
  LaneAddress locate(int filter, int channel, int kernel_position) const;
  std::uint8_t read(const LaneAddress& a) const { return words[a.memory][a.address][a.lane]; }
  const Word& word(int memory, int address) const { return words[memory][address]; }
  std::size_t words_per_memory() const { return words.empty() ? 0 : words.front().size(); }
  /// Bits the engine reads from parameter memory per cycle.
  int bits_per_cycle() const { return memory_count * word_bits + bias_word_bits; }
};

WeightMemoryImage layout_weights(LayerKind kind, const QFilterSet& filters, int bias_bits = 0);

// ---------------------------------------------------------------------------
// 3x3 raster streaming

/// Raster walk over a zero-point padded frame with a two-line buffer and a
/// 3x3 shift-register window.  Each real pixel is fetched exactly once.
class SlidingWindow {
 public:
  SlidingWindow(int height, int width, int lanes, int stride, std::uint8_t pad_value);

  /// Advances one padded raster position; `fetch` must copy the next real
  /// pixel (lanes values) into its argument.  Returns false once the frame
  /// is exhausted.
  bool step(const std::function<void(std::span<std::uint8_t>)>& fetch);

  bool has_window() const { return has_window_; }
  int out_row() const { return out_row_; }
  int out_col() const { return out_col_; }
  int out_height() const { return out_h_; }
  int out_width() const { return out_w_; }
  std::uint8_t tap(int ky, int kx, int lane) const { return window_[(ky * 3 + kx) * lanes_ + lane]; }
  std::uint64_t pixels_fetched() const { return fetched_; }
  std::size_t line_buffer_bytes() const { return lines_.size(); }

 private:
  int height_, width_, lanes_, stride_;
  std::uint8_t pad_;
  int pad_top_, pad_left_, padded_h_, padded_w_, out_h_, out_w_;
  int row_ = 0, col_ = 0;
  bool has_window_ = false;
  int out_row_ = -1, out_col_ = -1;
  std::uint64_t fetched_ = 0;
  std::vector<std::uint8_t> lines_;   // 2 rows x padded width x lanes
  std::vector<std::uint8_t> window_;  // 3x3 x lanes
  std::vector<std::uint8_t> incoming_;
};

// ---------------------------------------------------------------------------
// Engines

/// Entry 3x3 convolution over 3-channel input.  Weights and biases are held
/// as plain constants.
class EntryConv {
 public:
  EntryConv(const LayerDesc& layer, Rounding rounding);
  void compute(const SlidingWindow& window, std::span<std::uint8_t> out) const;
  const LayerDesc& layer() const { return layer_; }

 private:
  const LayerDesc& layer_;
  Rounding rounding_;
};

EngineResult c2d_forward(const QTensor& input, const LayerDesc& layer, Rounding rounding = Rounding::Nearest);

/// Depthwise 3x3 over n/16 frame passes; output batches are emitted pass by
/// pass.
void dwc_run(const QTensor& input, const LayerDesc& layer, Rounding rounding,
             const std::function<void(const ChannelBatch&)>& emit);
EngineResult dwc_forward(const QTensor& input, const LayerDesc& layer, Rounding rounding = Rounding::Nearest);
EngineResult dwc_avgpool(const QTensor& input, const LayerDesc& layer, Rounding rounding = Rounding::Nearest);

/// Pointwise convolution in channels-filters-pixels order.
class ProjectionEngine {
 public:
  ProjectionEngine(const LayerDesc& layer, Rounding rounding);

  /// Runs every apass of filter batch `fpass` for one pixel.
  void filter_batch(std::span<const std::uint8_t> activations, int fpass, std::span<std::uint8_t> out) const;
  const WeightMemoryImage& memory() const { return memory_; }

 private:
  const LayerDesc& layer_;
  Rounding rounding_;
  WeightMemoryImage memory_;
};

EngineResult pro_forward(const QTensor& input, const LayerDesc& layer, Rounding rounding = Rounding::Nearest);

/// Pointwise convolution in filters-channels-pixels order: each 16-channel
/// activation batch is consumed once and folded into FPASS x 16 partial
/// sums.
class ExpansionEngine {
 public:
  ExpansionEngine(const LayerDesc& layer, Rounding rounding);

  void begin_pixel();
  /// Consumes activation batch `apass`; batches must arrive in order.  The
  /// last batch finalizes every filter batch.
  void consume(int apass, std::span<const std::uint8_t> batch);
  bool pixel_done() const { return next_apass_ == layer_.apass; }
  std::span<const std::int32_t> accumulators() const { return acc_; }
  std::span<const std::uint8_t> outputs() const { return out_; }
  const WeightMemoryImage& memory() const { return memory_; }

 private:
  const LayerDesc& layer_;
  Rounding rounding_;
  WeightMemoryImage memory_;
  std::vector<std::int32_t> acc_;
  std::vector<std::uint8_t> out_;
  int next_apass_ = 0;
};

EngineResult exp_forward(const QTensor& input, const LayerDesc& layer, Rounding rounding = Rounding::Nearest);

/// EXP driven by a batch source that yields the input stream in pixel-major
/// batch order.
EngineResult exp_forward_stream(const std::function<ChannelBatch()>& next_batch, const LayerDesc& layer,
                                Rounding rounding = Rounding::Nearest);

ChannelBatch add_batch(const ChannelBatch& in1, const ChannelBatch& in2, const quant::AddParams& p,
                       Rounding rounding);
EngineResult add_forward(const QTensor& in1, const QTensor& in2, const LayerDesc& layer,
                         Rounding rounding = Rounding::Nearest, const EngineConfig& config = {});
EngineResult add_passthrough(const QTensor& input);

/// Dispatches a single-input layer to its engine.
EngineResult run_layer(const QTensor& input, const LayerDesc& layer, Rounding rounding);

}  // namespace semistream::engines
