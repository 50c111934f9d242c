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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace semistream {

struct Dims {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::size_t elements() const { return pixels() * channels; }
  bool operator==(const Dims&) const = default;
};

struct QuantParams {
  double scale = 1.0;
  std::int32_t zero_point = 0;

  bool operator==(const QuantParams&) const = default;
};

/// 8-bit activation tensor, row-major (row, column, channel).
struct QTensor {
  Dims dims;
  QuantParams quant;
  std::vector<std::uint8_t> data;

  QTensor() = default;
  QTensor(Dims d, QuantParams q);
  QTensor(Dims d, QuantParams q, std::uint8_t fill);

  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * dims.width + col) * dims.channels + ch;
  }
  std::uint8_t at(int row, int col, int ch) const { return data[index(row, col, ch)]; }
  std::uint8_t& at(int row, int col, int ch) { return data[index(row, col, ch)]; }
  std::span<const std::uint8_t> pixel(std::size_t p) const {
    return {data.data() + p * dims.channels, static_cast<std::size_t>(dims.channels)};
  }
  std::span<std::uint8_t> pixel(std::size_t p) {
    return {data.data() + p * dims.channels, static_cast<std::size_t>(dims.channels)};
  }

  /// Throws ShapeError unless the data length and zero point are consistent.
  void validate() const;

  bool operator==(const QTensor&) const = default;
};

/// Quantized filter bank, laid out (filter, kernel_row, kernel_col, channel).
/// Depthwise filters use in_channels = 1 with one filter per channel.
struct QFilterSet {
  int kernel_h = 0;
  int kernel_w = 0;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<std::uint8_t> weights;
  std::vector<std::int32_t> weight_zero_points;
  std::vector<double> weight_scales;
  std::vector<std::int32_t> biases;

  std::size_t index(int filter, int ky, int kx, int ch) const {
    return ((static_cast<std::size_t>(filter) * kernel_h + ky) * kernel_w + kx) * in_channels + ch;
  }
  std::uint8_t at(int filter, int ky, int kx, int ch) const { return weights[index(filter, ky, kx, ch)]; }
  std::size_t filter_volume() const { return static_cast<std::size_t>(kernel_h) * kernel_w * in_channels; }

  void validate() const;

  bool operator==(const QFilterSet&) const = default;
};

struct FloatTensor {
  Dims dims;
  std::vector<double> data;

  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * dims.width + col) * dims.channels + ch;
  }
  double at(int row, int col, int ch) const { return data[index(row, col, ch)]; }
  double& at(int row, int col, int ch) { return data[index(row, col, ch)]; }
};

FloatTensor dequantize(const QTensor& t);

/// Widens the channel dimension to `channels`, filling with the zero point.
QTensor pad_tensor(const QTensor& t, int channels);

}  // namespace semistream
