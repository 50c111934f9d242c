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
#include <span>
#include <vector>

#include "tensor.hpp"

namespace semistream {

inline constexpr int kBatchLanes = 16;

/// One 16-channel slice of one pixel, the unit every inter-engine stream
/// carries.
struct ChannelBatch {
  int row = 0;
  int col = 0;
  int batch_index = 0;
  std::array<std::uint8_t, kBatchLanes> values{};

  bool operator==(const ChannelBatch&) const = default;
};

ChannelBatch batch_of(const QTensor& t, int row, int col, int batch_index);
void store_batch(QTensor& t, const ChannelBatch& b);

/// Single-pass reader over a tensor in pixel-major batch order (pixel 0
/// batches 0..n-1, pixel 1, ...).  A batch can be read exactly once and only
/// at the cursor; anything else raises SequencingError.
class TensorBatchReader {
 public:
  explicit TensorBatchReader(const QTensor& tensor);

  ChannelBatch next();
  ChannelBatch read(std::size_t pixel, int batch_index);
  bool exhausted() const { return cursor_ == total_; }
  std::size_t reads() const { return cursor_; }
  int batches_per_pixel() const { return per_pixel_; }

 private:
  const QTensor& tensor_;
  int per_pixel_;
  std::size_t total_;
  std::size_t cursor_ = 0;
};

/// Collects batches into a frame; tracks how full the frame is.
class FrameBuffer {
 public:
  FrameBuffer(Dims dims, QuantParams quant);

  void put(const ChannelBatch& b);
  bool complete() const { return filled_ == expected_; }
  std::size_t filled() const { return filled_; }
  std::size_t capacity() const { return expected_; }
  const QTensor& tensor() const { return tensor_; }
  QTensor take() { return std::move(tensor_); }

 private:
  QTensor tensor_;
  std::vector<bool> seen_;
  std::size_t filled_ = 0;
  std::size_t expected_;
};

}  // namespace semistream
