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

#include "stream.hpp"

#include <sstream>

#include "errors.hpp"

namespace semistream {

ChannelBatch batch_of(const QTensor& t, int row, int col, int batch_index) {
  ChannelBatch b{row, col, batch_index, {}};
  const std::size_t base = t.index(row, col, batch_index * kBatchLanes);
  for (int i = 0; i < kBatchLanes; ++i) b.values[i] = t.data[base + i];
  return b;
}

void store_batch(QTensor& t, const ChannelBatch& b) {
  const std::size_t base = t.index(b.row, b.col, b.batch_index * kBatchLanes);
  for (int i = 0; i < kBatchLanes; ++i) t.data[base + i] = b.values[i];
}

TensorBatchReader::TensorBatchReader(const QTensor& tensor)
    : tensor_(tensor), per_pixel_(tensor.dims.channels / kBatchLanes), total_(tensor.dims.pixels() * per_pixel_) {
  if (tensor.dims.channels % kBatchLanes != 0) throw ShapeError("batch streams need channels divisible by 16");
}

ChannelBatch TensorBatchReader::next() {
  if (cursor_ >= total_) throw SequencingError("read past the end of the activation stream");
  const std::size_t pixel = cursor_ / per_pixel_;
  const int batch = static_cast<int>(cursor_ % per_pixel_);
  ++cursor_;
  const int row = static_cast<int>(pixel / tensor_.dims.width);
  const int col = static_cast<int>(pixel % tensor_.dims.width);
  return batch_of(tensor_, row, col, batch);
}

ChannelBatch TensorBatchReader::read(std::size_t pixel, int batch_index) {
  const std::size_t position = pixel * per_pixel_ + batch_index;
  if (position != cursor_) {
    std::ostringstream os;
    os << "activation batch (pixel " << pixel << ", batch " << batch_index << ") requested at stream position "
       << cursor_ << (position < cursor_ ? "; it was already consumed" : "; streams cannot skip ahead");
    throw SequencingError(os.str());
  }
  return next();
}

FrameBuffer::FrameBuffer(Dims dims, QuantParams quant)
    : tensor_(dims, quant), seen_(dims.pixels() * (dims.channels / kBatchLanes), false),
      expected_(dims.pixels() * (dims.channels / kBatchLanes)) {
  if (dims.channels % kBatchLanes != 0) throw ShapeError("frame buffers need channels divisible by 16");
}

void FrameBuffer::put(const ChannelBatch& b) {
  const Dims& d = tensor_.dims;
  if (b.row < 0 || b.row >= d.height || b.col < 0 || b.col >= d.width || b.batch_index < 0 ||
      b.batch_index >= d.channels / kBatchLanes) {
    throw SequencingError("batch coordinates outside the frame");
  }
  const std::size_t slot = (static_cast<std::size_t>(b.row) * d.width + b.col) * (d.channels / kBatchLanes) + b.batch_index;
  if (seen_[slot]) throw SequencingError("batch delivered twice into a frame buffer");
  seen_[slot] = true;
  ++filled_;
  store_batch(tensor_, b);
}

}  // namespace semistream
