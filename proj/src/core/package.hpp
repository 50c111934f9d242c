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
#include <optional>

#include "model.hpp"

namespace semistream::package {

inline constexpr int kFormatVersion = 1;

enum class Kind : std::uint8_t { Graph, Prepared };

struct Loaded {
  Kind kind = Kind::Graph;
  model::ModelGraph graph;
  std::optional<model::PreparedModel> prepared;

  /// The prepared model, preparing a raw graph with `rounding` on demand.
  model::PreparedModel resolve(quant::Rounding rounding) const;
};

/// Writes `dir/manifest` and one blob per weight and bias tensor.
void save_graph(const model::ModelGraph& graph, const std::filesystem::path& dir);
void save_package(const model::PreparedModel& model, const std::filesystem::path& dir);

/// FormatError on version mismatch, truncated blobs or checksum failures;
/// IoError when files cannot be read.
Loaded load(const std::filesystem::path& dir);
model::PreparedModel load_package(const std::filesystem::path& dir);

}  // namespace semistream::package
