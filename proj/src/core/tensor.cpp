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

#include "tensor.hpp"

#include <algorithm>
#include <sstream>

#include "errors.hpp"

namespace semistream {

QTensor::QTensor(Dims d, QuantParams q) : QTensor(d, q, static_cast<std::uint8_t>(q.zero_point)) {}

QTensor::QTensor(Dims d, QuantParams q, std::uint8_t fill) : dims(d), quant(q), data(d.elements(), fill) {}

void QTensor::validate() const {
  if (dims.height <= 0 || dims.width <= 0 || dims.channels <= 0) throw ShapeError("tensor dims must be positive");
  if (data.size() != dims.elements()) {
    std::ostringstream os;
    os << "tensor data holds " << data.size() << " values, dims need " << dims.elements();
    throw ShapeError(os.str());
  }
  if (quant.zero_point < 0 || quant.zero_point > 255) throw ShapeError("activation zero point outside [0, 255]");
  if (!(quant.scale > 0.0)) throw ShapeError("activation scale must be positive");
}

void QFilterSet::validate() const {
  if (kernel_h <= 0 || kernel_w <= 0 || in_channels <= 0 || out_channels <= 0) {
    throw ShapeError("filter dims must be positive");
  }
  if (weights.size() != filter_volume() * out_channels) throw ShapeError("filter weight count mismatch");
  const auto n = static_cast<std::size_t>(out_channels);
  if (weight_zero_points.size() != n || weight_scales.size() != n || biases.size() != n) {
    throw ShapeError("per-channel filter vectors must match out_channels");
  }
  for (auto z : weight_zero_points) {
    if (z < 0 || z > 255) throw ShapeError("weight zero point outside [0, 255]");
  }
  for (auto s : weight_scales) {
    if (!(s > 0.0)) throw ShapeError("weight scale must be positive");
  }
}

FloatTensor dequantize(const QTensor& t) {
  FloatTensor out{t.dims, std::vector<double>(t.data.size())};
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    out.data[i] = t.quant.scale * (static_cast<int>(t.data[i]) - t.quant.zero_point);
  }
  return out;
}

QTensor pad_tensor(const QTensor& t, int channels) {
  if (channels < t.dims.channels) throw ShapeError("pad_tensor cannot drop channels");
  QTensor out(Dims{t.dims.height, t.dims.width, channels}, t.quant);
  for (std::size_t p = 0; p < t.dims.pixels(); ++p) {
    const auto src = t.pixel(p);
    std::copy(src.begin(), src.end(), out.pixel(p).begin());
  }
  return out;
}

}  // namespace semistream
