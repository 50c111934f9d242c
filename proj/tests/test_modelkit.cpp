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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <string>

#include <json.hpp>

#include "errors.hpp"
#include "image_io.hpp"
#include "model.hpp"
#include "oracle.hpp"
#include "package.hpp"
#include "test_support.hpp"

using namespace semistream;
using namespace semistream::model;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("semistream_modelkit_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("standard network topology") {
  const ModelGraph g = build_mobilenet_v2(1.0, 224, 0);
  CHECK(g.input_dims == Dims{224, 224, 3});
  std::set<int> blocks;
  for (const auto& l : g.layers) {
    if (l.block >= 0) blocks.insert(l.block);
  }
  CHECK(blocks.size() == 17);
  REQUIRE(g.layers.front().kind == LayerKind::C2D);
  CHECK(g.layers.front().out == Dims{112, 112, 32});
  CHECK(g.residuals.size() == 10);
  CHECK(g.layers.back().out == Dims{1, 1, 1000});
}

TEST_CASE("network generation is seeded") {
  CHECK(build_mobilenet_v2(1.0, 224, 0) == build_mobilenet_v2(1.0, 224, 0));
  CHECK_FALSE(build_mobilenet_v2(0.5, 96, 1) == build_mobilenet_v2(0.5, 96, 2));
}

TEST_CASE("network generation rejects bad configurations") {
  CHECK_THROWS_AS(build_mobilenet_v2(0.0, 224, 0), DomainError);
  CHECK_THROWS_AS(build_mobilenet_v2(1.0, 0, 0), DomainError);
  auto c = NetworkConfig::mobilenet_v2();
  c.blocks.front().expansion = 6;
  CHECK_THROWS_AS(build_network(c, 0), DomainError);
}

TEST_CASE("graph validation checks neighbouring dims") {
  ModelGraph g = build_mobilenet_v2(0.35, 64, 3);
  g.validate();
  g.layers[3].in.channels += 1;
  CHECK_THROWS_AS(g.validate(), ShapeError);

  ModelGraph h = build_mobilenet_v2(0.35, 64, 3);
  h.residuals.front().source_layer = h.residuals.front().add_layer;
  CHECK_THROWS_AS(h.validate(), ShapeError);
}

TEST_CASE("graph layers chain dims") {
  const ModelGraph g = build_mobilenet_v2(1.0, 224, 0);
  CHECK(g.layers.front().in == g.input_dims);
  for (std::size_t i = 1; i < g.layers.size(); ++i) CHECK(g.layers[i - 1].out == g.layers[i].in);
}

TEST_CASE("pad_channels widens to multiples of 16") {
  Rng rng(1);
  const LayerDesc pro = prepare_layer(random_layer(LayerKind::PRO, Dims{4, 4, 16}, 24, 1, rng), quant::Rounding::Nearest);
  const LayerDesc padded = pad_channels(pro);
  CHECK(padded.out.channels == 32);
  CHECK(padded.fpass == 2);
  CHECK(padded.apass == 1);
  CHECK(padded.filters->out_channels == 32);
  CHECK(padded.logical_out_channels == 24);

  const LayerDesc sixteen = prepare_layer(random_layer(LayerKind::DWC, Dims{5, 5, 16}, 0, 1, rng), quant::Rounding::Nearest);
  const LayerDesc same = pad_channels(sixteen);
  CHECK(same.in == sixteen.in);
  CHECK(same.out == sixteen.out);
  CHECK(same.filters == sixteen.filters);
}

TEST_CASE("padding keeps original channels intact") {
  Rng rng(2);
  for (auto kind : {LayerKind::DWC, LayerKind::EXP, LayerKind::PRO}) {
    const LayerDesc raw = random_layer(kind, Dims{5, 4, 20}, 40, 1, rng);
    const LayerDesc exact = prepare_layer(raw, quant::Rounding::Nearest);
    const LayerDesc padded = pad_channels(exact);
    const QTensor input = random_tensor(raw.in, raw.in_q, rng);
    const QTensor want = oracle::naive_quant_layer(input, exact);
    const QTensor got = oracle::naive_quant_layer(pad_tensor(input, padded.in.channels), padded);
    REQUIRE(got.dims.channels == padded.out.channels);
    for (int y = 0; y < want.dims.height; ++y) {
      for (int x = 0; x < want.dims.width; ++x) {
        for (int c = 0; c < got.dims.channels; ++c) {
          if (c < want.dims.channels) {
            REQUIRE(got.at(y, x, c) == want.at(y, x, c));
          } else {
            REQUIRE(got.at(y, x, c) == padded.out_q.zero_point);
          }
        }
      }
    }
  }
}

TEST_CASE("prepare derives MULT and SHIFT") {
  auto l = testing::hand_layer(LayerKind::PRO, Dims{1, 1, 16}, 16, 1, {0.5, 0}, {1.0 / 3, 0}, 0.25);
  const LayerDesc p = prepare_layer(l, quant::Rounding::Nearest);
  REQUIRE(p.requant.size() == 16);
  // 0.5 * 0.25 / (1/3) = 0.375
  for (const auto& r : p.requant) CHECK(r.ms == quant::MultShift{3221225472u, 33});
  CHECK(p.bias_bits == 18);
}

TEST_CASE("prepare narrows biases per engine") {
  auto pro = testing::hand_layer(LayerKind::PRO, Dims{1, 1, 16}, 16, 1, {0.5, 0}, {1.0, 0});
  pro.filters->biases[0] = (1 << 17) - 1;
  pro.filters->biases[1] = -(1 << 17);
  CHECK(prepare_layer(pro, quant::Rounding::Nearest).filters->biases[0] == (1 << 17) - 1);
  pro.filters->biases[2] = 1 << 17;
  CHECK_THROWS_AS(prepare_layer(pro, quant::Rounding::Nearest), RangeError);

  auto exp = testing::hand_layer(LayerKind::EXP, Dims{1, 1, 16}, 16, 1, {0.5, 0}, {1.0, 0});
  exp.filters->biases[0] = 1 << 15;
  CHECK_THROWS_AS(prepare_layer(exp, quant::Rounding::Nearest), RangeError);
  exp.filters->biases[0] = (1 << 15) - 1;
  CHECK(prepare_layer(exp, quant::Rounding::Nearest).bias_bits == 16);
}

TEST_CASE("prepare of a symmetric ADD") {
  auto add = testing::hand_layer(LayerKind::ADD, Dims{2, 2, 16}, 0, 1, {0.05, 128}, {0.05, 128});
  add.residual_q = add.in_q;
  const LayerDesc p = prepare_layer(add, quant::Rounding::Nearest);
  REQUIRE(p.add);
  CHECK(p.add->mult1 == p.add->mult2);
  CHECK(p.add->pre_shift == 20);
  CHECK(p.add->mult1 == quant::MultShift{2147483648u, 32});
}

TEST_CASE("prepared model satisfies the pass invariants") {
  const PreparedModel pm = prepare(build_mobilenet_v2(1.0, 224, 0));
  for (const auto& l : pm.graph.layers) {
    if (l.kind == LayerKind::EXP || l.kind == LayerKind::PRO) {
      CHECK(l.in.channels % 16 == 0);
      CHECK(l.out.channels % 16 == 0);
      CHECK(l.apass * 16 == l.in.channels);
      CHECK(l.fpass * 16 == l.out.channels);
    } else if (l.kind == LayerKind::DWC) {
      CHECK(l.in.channels % 16 == 0);
      CHECK(l.apass * 16 == l.in.channels);
    }
    if (l.filters) CHECK(l.requant.size() == static_cast<std::size_t>(l.out.channels));
  }
  CHECK(pm.output_channels == 1000);
  CHECK(pm.graph.layers.back().out.channels == 1008);
}

TEST_CASE("prepare rejects a multiplier outside the representable range") {
  auto l = testing::hand_layer(LayerKind::PRO, Dims{1, 1, 16}, 16, 1, {1.0, 0}, {0.5, 0}, 1.0);
  CHECK_THROWS_AS(prepare_layer(l, quant::Rounding::Nearest), DomainError);
}

TEST_CASE("package round trip") {
  const PreparedModel pm = prepare(build_mobilenet_v2(0.5, 96, 4));
  const fs::path dir = scratch("roundtrip");
  package::save_package(pm, dir);
  CHECK(package::load_package(dir) == pm);

  const package::Loaded loaded = package::load(dir);
  CHECK(loaded.kind == package::Kind::Prepared);
  CHECK(loaded.graph == pm.graph);
  fs::remove_all(dir);
}

TEST_CASE("graph package resolves with either rounding") {
  const ModelGraph g = build_mobilenet_v2(0.35, 32, 9);
  const fs::path dir = scratch("graph");
  package::save_graph(g, dir);
  const package::Loaded loaded = package::load(dir);
  CHECK(loaded.kind == package::Kind::Graph);
  CHECK(loaded.graph == g);
  CHECK(loaded.resolve(quant::Rounding::Truncate) == prepare(g, quant::Rounding::Truncate));
  CHECK(loaded.resolve(quant::Rounding::Nearest) == prepare(g, quant::Rounding::Nearest));
  fs::remove_all(dir);
}

TEST_CASE("packages are byte-identical for the same seed") {
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  package::save_package(prepare(build_mobilenet_v2(0.35, 64, 0)), a);
  package::save_package(prepare(build_mobilenet_v2(0.35, 64, 0)), b);
  int files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
  }
  CHECK(files > 2);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("package corruption is detected") {
  const PreparedModel pm = prepare(build_mobilenet_v2(0.35, 32, 5));

  SUBCASE("truncated blob") {
    const fs::path dir = scratch("trunc");
    package::save_package(pm, dir);
    const fs::path blob = dir / "layer000_weights.bin";
    fs::resize_file(blob, fs::file_size(blob) - 1);
    CHECK_THROWS_AS(package::load(dir), FormatError);
    fs::remove_all(dir);
  }
  SUBCASE("flipped byte") {
    const fs::path dir = scratch("flip");
    package::save_package(pm, dir);
    const fs::path blob = dir / "layer001_weights.bin";
    std::string bytes = slurp(blob);
    bytes[bytes.size() / 2] ^= 0x5a;
    std::ofstream(blob, std::ios::binary | std::ios::trunc) << bytes;
    CHECK_THROWS_AS(package::load(dir), FormatError);
    fs::remove_all(dir);
  }
  SUBCASE("future version") {
    const fs::path dir = scratch("version");
    package::save_package(pm, dir);
    auto manifest = nlohmann::json::parse(slurp(dir / "manifest"));
    manifest["version"] = 99;
    std::ofstream(dir / "manifest", std::ios::trunc) << manifest.dump();
    try {
      package::load(dir);
      FAIL("version 99 was accepted");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("99") != std::string::npos);
    }
    fs::remove_all(dir);
  }
  SUBCASE("missing manifest") {
    const fs::path dir = scratch("empty");
    fs::create_directories(dir);
    CHECK_THROWS_AS(package::load(dir), Error);
    fs::remove_all(dir);
  }
}

TEST_CASE("image files round trip") {
  Rng rng(8);
  const QTensor t = random_tensor(Dims{5, 7, 3}, {1.0 / 128, 128}, rng);
  const fs::path dir = scratch("images");
  fs::create_directories(dir);
  image::write_ppm(t, dir / "a.ppm");
  CHECK(image::read_image(dir / "a.ppm", t.quant) == t);
  image::write_raw(t, dir / "a.raw");
  CHECK(image::read_image(dir / "a.raw", t.quant) == t);

  std::ofstream(dir / "bad.ppm", std::ios::binary) << "P3\n1 1\n255\n0 0 0\n";
  CHECK_THROWS_AS(image::read_image(dir / "bad.ppm", t.quant), FormatError);
  std::ofstream(dir / "short.raw", std::ios::binary) << "RAWHWC 2 2 3\n" << std::string(5, 'x');
  CHECK_THROWS_AS(image::read_image(dir / "short.raw", t.quant), FormatError);
  CHECK_THROWS_AS(image::read_image(dir / "missing.ppm", t.quant), IoError);
  fs::remove_all(dir);
}
