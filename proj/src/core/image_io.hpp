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

#include <filesystem>

#include "tensor.hpp"

namespace semistream::image {

/// Reads a binary P6 PPM (maxval 255) or a raw HWC blob with the header line
/// "RAWHWC <height> <width> <channels>".  The tensor takes quantization `q`.
QTensor read_image(const std::filesystem::path& path, QuantParams q);

void write_ppm(const QTensor& t, const std::filesystem::path& path);
void write_raw(const QTensor& t, const std::filesystem::path& path);

}  // namespace semistream::image
