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
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "quantcore.hpp"
#include "tensor.hpp"

namespace semistream::model {

enum class LayerKind : std::uint8_t { C2D, DWC, EXP, PRO, ADD, AVGPOOL };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

struct LayerDesc {
  LayerKind kind = LayerKind::PRO;
  std::string name;
  int block = -1;
  Dims in;
  Dims out;
  int stride = 1;
  QuantParams in_q;
  QuantParams out_q;
  // Second input of an ADD (the shortcut).
  QuantParams residual_q;
  std::optional<QFilterSet> filters;
  // Filled by prepare: one entry per output channel (convolutions, pooling).
  std::vector<quant::RequantParams> requant;
  std::optional<quant::AddParams> add;
  int bias_bits = 32;
  int apass = 0;
  int fpass = 0;
  bool residual = false;
  int logical_in_channels = 0;
  int logical_out_channels = 0;

  bool operator==(const LayerDesc&) const = default;
};

/// `add_layer` sums its streamed input with the output of `source_layer`.
struct ResidualLink {
  int add_layer = -1;
  int source_layer = -1;

  bool operator==(const ResidualLink&) const = default;
};

struct ModelGraph {
  std::string name;
  Dims input_dims;
  QuantParams input_q;
  std::vector<LayerDesc> layers;
  std::vector<ResidualLink> residuals;

  /// Throws ShapeError on dim/quantization disagreement between neighbours
  /// or malformed residual links.
  void validate() const;
  bool operator==(const ModelGraph&) const = default;
};

/// Engine assignment for one trip around the circular dataflow.  Slots hold
/// layer indices, -1 when the engine idles (or, for ADD, passes through).
struct RoundPlan {
  int round_index = 0;
  bool head = false;
  int c2d = -1;
  int dwc = -1;
  int pro = -1;
  int add = -1;
  int exp = -1;
  bool residual = false;
  bool save_residual = false;
  Dims dwc_out;
  std::uint64_t dwc_weight_bytes = 0;
  std::uint64_t pro_weight_bytes = 0;
  std::uint64_t exp_weight_bytes = 0;

  bool operator==(const RoundPlan&) const = default;
};

struct PreparedModel {
  ModelGraph graph;
  quant::Rounding rounding = quant::Rounding::Nearest;
  std::vector<RoundPlan> rounds;
  int output_channels = 0;

  const LayerDesc& layer(int i) const { return graph.layers.at(static_cast<std::size_t>(i)); }
  bool operator==(const PreparedModel&) const = default;
};

struct BlockSpec {
  int expansion = 1;
  int channels = 16;
  int repeats = 1;
  int stride = 1;
};

struct NetworkConfig {
  int resolution = 224;
  double width_multiplier = 1.0;
  int stem_channels = 32;
  std::vector<BlockSpec> blocks;
  int head_channels = 1280;
  int num_classes = 1000;
  bool residuals = true;
  bool head = true;

  static NetworkConfig mobilenet_v2(double width_multiplier = 1.0, int resolution = 224);
};

using Rng = std::mt19937_64;

inline constexpr double kMinActivationScale = 1.0 / 1024;  // 2^-10
inline constexpr double kMaxActivationScale = 0.25;        // 2^-2

ModelGraph build_network(const NetworkConfig& config, std::uint64_t seed);
ModelGraph build_mobilenet_v2(double width_multiplier, int resolution, std::uint64_t seed);

int round_up16(int n);
int same_padding_before(int in, int kernel, int stride);
int conv_output_size(int in, int stride);

/// Channel/filter padding to multiples of 16.  Added weights hold their
/// filter's zero point, added biases are 0, added output channels reuse the
/// requantization of channel 0 so they evaluate to the output zero point.
LayerDesc pad_channels(const LayerDesc& layer);

/// Derives MULT/SHIFT, narrows biases and fills ADD scalars for one layer
/// without padding it.
LayerDesc prepare_layer(const LayerDesc& layer, quant::Rounding rounding);

PreparedModel prepare(const ModelGraph& graph, quant::Rounding rounding = quant::Rounding::Nearest);

std::uint64_t weight_bytes(const LayerDesc& layer);

enum class LayerStyle : std::uint8_t {
  Adversarial,  // arbitrary 8-bit weights and zero points, wide scale range
  Benign,       // float weights folded and quantized, outputs rarely saturate
};

/// Random unprepared layer for property tests.  DWC/AVGPOOL ignore
/// out_channels; ADD produces in-shaped output.
LayerDesc random_layer(LayerKind kind, Dims in, int out_channels, int stride, Rng& rng,
                       LayerStyle style = LayerStyle::Adversarial);

QTensor random_tensor(Dims dims, QuantParams q, Rng& rng);
QTensor random_image(const ModelGraph& graph, std::uint64_t seed);

}  // namespace semistream::model
