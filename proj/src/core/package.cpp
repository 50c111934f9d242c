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

#include "package.hpp"

#include <zlib.h>

#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "dataflow.hpp"
#include "errors.hpp"

namespace semistream::package {

namespace fs = std::filesystem;
using json = nlohmann::json;
using model::LayerDesc;
using model::ModelGraph;
using model::PreparedModel;

namespace {

constexpr const char* kMagic = "semistream-package";

std::uint32_t crc_of(const std::vector<std::uint8_t>& bytes) {
  return static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

// ---------------------------------------------------------------------------
// Blobs

class Writer {
 public:
  explicit Writer(fs::path dir) : dir_(std::move(dir)) {}

  json blob(const std::string& file, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(dir_ / file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir_ / file).string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + (dir_ / file).string());
    return {{"file", file}, {"bytes", bytes.size()}, {"crc32", crc_of(bytes)}};
  }

 private:
  fs::path dir_;
};

std::vector<std::uint8_t> read_blob(const fs::path& dir, const json& desc) {
  const std::string file = desc.at("file").get<std::string>();
  if (file.find('/') != std::string::npos || file.find("..") != std::string::npos) {
    throw FormatError("blob name " + file + " escapes the package directory");
  }
  std::ifstream in(dir / file, std::ios::binary);
  if (!in) throw FormatError("missing blob " + file);
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const auto expect = desc.at("bytes").get<std::size_t>();
  if (bytes.size() != expect) {
    std::ostringstream os;
    os << "blob " << file << " holds " << bytes.size() << " bytes, manifest declares " << expect;
    throw FormatError(os.str());
  }
  if (crc_of(bytes) != desc.at("crc32").get<std::uint32_t>()) throw FormatError("checksum mismatch in blob " + file);
  return bytes;
}

std::vector<std::uint8_t> pack_i32(const std::vector<std::int32_t>& v) {
  std::vector<std::uint8_t> out;
  out.reserve(v.size() * 4);
  for (std::int32_t x : v) {
    const auto u = static_cast<std::uint32_t>(x);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
  }
  return out;
}

std::vector<std::int32_t> unpack_i32(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() % 4 != 0) throw FormatError("bias blob length is not a multiple of 4");
  std::vector<std::int32_t> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << (8 * b);
    out[i] = static_cast<std::int32_t>(u);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest pieces

json dims_json(const Dims& d) { return json::array({d.height, d.width, d.channels}); }
Dims dims_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()}; }

json quant_json(const QuantParams& q) { return {{"scale", q.scale}, {"zero_point", q.zero_point}}; }
QuantParams quant_from(const json& j) { return {j.at("scale").get<double>(), j.at("zero_point").get<std::int32_t>()}; }

json ms_json(const quant::MultShift& m) { return json::array({m.mult, m.shift}); }
quant::MultShift ms_from(const json& j) { return {j.at(0).get<std::uint32_t>(), j.at(1).get<std::uint8_t>()}; }

json layer_json(const LayerDesc& l, std::size_t index, Writer& w) {
  json j;
  j["kind"] = std::string(model::to_string(l.kind));
  j["name"] = l.name;
  j["block"] = l.block;
  j["in"] = dims_json(l.in);
  j["out"] = dims_json(l.out);
  j["stride"] = l.stride;
  j["in_q"] = quant_json(l.in_q);
  j["out_q"] = quant_json(l.out_q);
  j["residual_q"] = quant_json(l.residual_q);
  j["bias_bits"] = l.bias_bits;
  j["apass"] = l.apass;
  j["fpass"] = l.fpass;
  j["residual"] = l.residual;
  j["logical_channels"] = json::array({l.logical_in_channels, l.logical_out_channels});
  json rq = json::array();
  for (const auto& r : l.requant) rq.push_back(json::array({r.ms.mult, r.ms.shift, r.out_zero, r.out_min, r.out_max}));
  j["requant"] = rq;
  if (l.add) {
    const auto& a = *l.add;
    j["add"] = {{"mult1", ms_json(a.mult1)}, {"mult2", ms_json(a.mult2)},   {"mult3", ms_json(a.mult3)},
                {"in1_zero", a.in1_zero},    {"in2_zero", a.in2_zero},      {"out_zero", a.out_zero},
                {"pre_shift", a.pre_shift},  {"out_min", a.out_min},        {"out_max", a.out_max}};
  }
  if (l.filters) {
    const auto& f = *l.filters;
    std::ostringstream stem;
    stem << "layer" << std::setw(3) << std::setfill('0') << index;
    json bias = w.blob(stem.str() + "_bias.bin", pack_i32(f.biases));
    bias["logical_bits"] = l.bias_bits;
    j["filters"] = {{"kernel", json::array({f.kernel_h, f.kernel_w})},
                    {"in_channels", f.in_channels},
                    {"out_channels", f.out_channels},
                    {"weight_zero_points", f.weight_zero_points},
                    {"weight_scales", f.weight_scales},
                    {"weights", w.blob(stem.str() + "_weights.bin", f.weights)},
                    {"biases", bias}};
  }
  return j;
}

LayerDesc layer_from(const json& j, const fs::path& dir) {
  LayerDesc l;
  l.kind = model::layer_kind_from_string(j.at("kind").get<std::string>());
  l.name = j.at("name").get<std::string>();
  l.block = j.at("block").get<int>();
  l.in = dims_from(j.at("in"));
  l.out = dims_from(j.at("out"));
  l.stride = j.at("stride").get<int>();
  l.in_q = quant_from(j.at("in_q"));
  l.out_q = quant_from(j.at("out_q"));
  l.residual_q = quant_from(j.at("residual_q"));
  l.bias_bits = j.at("bias_bits").get<int>();
  l.apass = j.at("apass").get<int>();
  l.fpass = j.at("fpass").get<int>();
  l.residual = j.at("residual").get<bool>();
  l.logical_in_channels = j.at("logical_channels").at(0).get<int>();
  l.logical_out_channels = j.at("logical_channels").at(1).get<int>();
  for (const auto& r : j.at("requant")) {
    l.requant.push_back({{r.at(0).get<std::uint32_t>(), r.at(1).get<std::uint8_t>()},
                         r.at(2).get<std::int32_t>(),
                         r.at(3).get<std::int32_t>(),
                         r.at(4).get<std::int32_t>()});
  }
  if (j.contains("add")) {
    const auto& a = j.at("add");
    quant::AddParams p;
    p.mult1 = ms_from(a.at("mult1"));
    p.mult2 = ms_from(a.at("mult2"));
    p.mult3 = ms_from(a.at("mult3"));
    p.in1_zero = a.at("in1_zero").get<std::int32_t>();
    p.in2_zero = a.at("in2_zero").get<std::int32_t>();
    p.out_zero = a.at("out_zero").get<std::int32_t>();
    p.pre_shift = a.at("pre_shift").get<std::int32_t>();
    p.out_min = a.at("out_min").get<std::int32_t>();
    p.out_max = a.at("out_max").get<std::int32_t>();
    l.add = p;
  }
  if (j.contains("filters")) {
    const auto& fj = j.at("filters");
    QFilterSet f;
    f.kernel_h = fj.at("kernel").at(0).get<int>();
    f.kernel_w = fj.at("kernel").at(1).get<int>();
    f.in_channels = fj.at("in_channels").get<int>();
    f.out_channels = fj.at("out_channels").get<int>();
    f.weight_zero_points = fj.at("weight_zero_points").get<std::vector<std::int32_t>>();
    f.weight_scales = fj.at("weight_scales").get<std::vector<double>>();
    f.weights = read_blob(dir, fj.at("weights"));
    const auto& bias = fj.at("biases");
    f.biases = unpack_i32(read_blob(dir, bias));
    const int bits = bias.at("logical_bits").get<int>();
    if (bits < 32) {
      const std::int64_t lim = std::int64_t{1} << (bits - 1);
      for (auto b : f.biases) {
        if (b < -lim || b >= lim) throw FormatError("layer " + l.name + ": bias exceeds its declared width");
      }
    }
    try {
      f.validate();
    } catch (const ShapeError& e) {
      throw FormatError("layer " + l.name + ": " + e.what());
    }
    l.filters = std::move(f);
  }
  return l;
}

json round_json(const model::RoundPlan& r) {
  return {{"round", r.round_index},
          {"head", r.head},
          {"slots", json::array({r.c2d, r.dwc, r.pro, r.add, r.exp})},
          {"residual", r.residual},
          {"save_residual", r.save_residual},
          {"dwc_out", dims_json(r.dwc_out)},
          {"weight_bytes", json::array({r.dwc_weight_bytes, r.pro_weight_bytes, r.exp_weight_bytes})}};
}

model::RoundPlan round_from(const json& j) {
  model::RoundPlan r;
  r.round_index = j.at("round").get<int>();
  r.head = j.at("head").get<bool>();
  const auto& s = j.at("slots");
  r.c2d = s.at(0).get<int>();
  r.dwc = s.at(1).get<int>();
  r.pro = s.at(2).get<int>();
  r.add = s.at(3).get<int>();
  r.exp = s.at(4).get<int>();
  r.residual = j.at("residual").get<bool>();
  r.save_residual = j.at("save_residual").get<bool>();
  r.dwc_out = dims_from(j.at("dwc_out"));
  const auto& w = j.at("weight_bytes");
  r.dwc_weight_bytes = w.at(0).get<std::uint64_t>();
  r.pro_weight_bytes = w.at(1).get<std::uint64_t>();
  r.exp_weight_bytes = w.at(2).get<std::uint64_t>();
  return r;
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create package directory " + dir.string());
}

json graph_json(const ModelGraph& g, Writer& w) {
  json j;
  j["name"] = g.name;
  j["input"] = {{"dims", dims_json(g.input_dims)}, {"quant", quant_json(g.input_q)}};
  json layers = json::array();
  for (std::size_t i = 0; i < g.layers.size(); ++i) layers.push_back(layer_json(g.layers[i], i, w));
  j["layers"] = layers;
  json res = json::array();
  for (const auto& r : g.residuals) res.push_back(json::array({r.add_layer, r.source_layer}));
  j["residuals"] = res;
  return j;
}

void write_manifest(const fs::path& dir, const json& m) {
  std::ofstream out(dir / "manifest", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "manifest").string());
  out << m.dump(1) << '\n';
  if (!out) throw IoError("short write to manifest");
}

}  // namespace

void save_graph(const ModelGraph& graph, const fs::path& dir) {
  prepare_dir(dir);
  Writer w(dir);
  json m = {{"format", kMagic}, {"version", kFormatVersion}, {"kind", "graph"}};
  m["graph"] = graph_json(graph, w);
  write_manifest(dir, m);
}

void save_package(const PreparedModel& model, const fs::path& dir) {
  prepare_dir(dir);
  Writer w(dir);
  json m = {{"format", kMagic}, {"version", kFormatVersion}, {"kind", "prepared"}};
  m["graph"] = graph_json(model.graph, w);
  m["rounding"] = model.rounding == quant::Rounding::Nearest ? "nearest" : "truncate";
  m["output_channels"] = model.output_channels;
  json rounds = json::array();
  for (const auto& r : model.rounds) rounds.push_back(round_json(r));
  m["rounds"] = rounds;
  write_manifest(dir, m);
}

Loaded load(const fs::path& dir) {
  std::ifstream in(dir / "manifest");
  if (!in) throw IoError("cannot open " + (dir / "manifest").string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
  try {
    if (!m.is_object() || m.value("format", "") != kMagic) throw FormatError("not a semistream package manifest");
    const int version = m.at("version").get<int>();
    if (version != kFormatVersion) {
      throw FormatError("unsupported package version " + std::to_string(version) + " (this build reads version " +
                        std::to_string(kFormatVersion) + ")");
    }
    Loaded out;
    const auto& gj = m.at("graph");
    out.graph.name = gj.at("name").get<std::string>();
    out.graph.input_dims = dims_from(gj.at("input").at("dims"));
    out.graph.input_q = quant_from(gj.at("input").at("quant"));
    for (const auto& lj : gj.at("layers")) out.graph.layers.push_back(layer_from(lj, dir));
    for (const auto& r : gj.at("residuals")) out.graph.residuals.push_back({r.at(0).get<int>(), r.at(1).get<int>()});
    try {
      out.graph.validate();
    } catch (const ShapeError& e) {
      throw FormatError(std::string("package graph is inconsistent: ") + e.what());
    }

    const std::string kind = m.at("kind").get<std::string>();
    if (kind == "graph") {
      out.kind = Kind::Graph;
      return out;
    }
    if (kind != "prepared") throw FormatError("unknown package kind " + kind);
    out.kind = Kind::Prepared;
    PreparedModel pm;
    pm.graph = out.graph;
    const std::string rounding = m.at("rounding").get<std::string>();
    if (rounding != "nearest" && rounding != "truncate") throw FormatError("unknown rounding mode " + rounding);
    pm.rounding = rounding == "nearest" ? quant::Rounding::Nearest : quant::Rounding::Truncate;
    pm.output_channels = m.at("output_channels").get<int>();
    for (const auto& r : m.at("rounds")) pm.rounds.push_back(round_from(r));
    if (pm.rounds != dataflow::schedule_rounds(pm)) throw FormatError("stored round plan disagrees with the graph");
    out.prepared = std::move(pm);
    return out;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  } catch (const PlanError& e) {
    throw FormatError(std::string("package round plan is invalid: ") + e.what());
  }
}

model::PreparedModel Loaded::resolve(quant::Rounding rounding) const {
  if (prepared) return *prepared;
  return model::prepare(graph, rounding);
}

PreparedModel load_package(const fs::path& dir) {
  Loaded l = load(dir);
  if (!l.prepared) throw FormatError("package " + dir.string() + " holds an unprepared graph");
  return std::move(*l.prepared);
}

}  // namespace semistream::package
