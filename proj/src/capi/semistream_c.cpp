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

#include "semistream/semistream.h"

#include <cstring>
#include <new>
#include <optional>
#include <sstream>
#include <string>

#include "dataflow.hpp"
#include "errors.hpp"
#include "image_io.hpp"
#include "model.hpp"
#include "oracle.hpp"
#include "package.hpp"
#include "perfmodel.hpp"
#include "verify.hpp"

using namespace semistream;

struct ss_model {
  model::ModelGraph graph;
  std::optional<model::PreparedModel> prepared;
};

struct ss_tensor {
  QTensor t;
};

struct ss_result {
  dataflow::RunResult run;
  ss_tensor logits;
};

namespace {

thread_local std::string g_last_error;

ss_status fail(ss_status s, const char* what) {
  g_last_error = what;
  return s;
}

template <class F>
ss_status guard(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const DomainError& e) {
    return fail(SS_ERR_DOMAIN, e.what());
  } catch (const RangeError& e) {
    return fail(SS_ERR_RANGE, e.what());
  } catch (const ShapeError& e) {
    return fail(SS_ERR_SHAPE, e.what());
  } catch (const FormatError& e) {
    return fail(SS_ERR_FORMAT, e.what());
  } catch (const SequencingError& e) {
    return fail(SS_ERR_SEQUENCING, e.what());
  } catch (const PlanError& e) {
    return fail(SS_ERR_PLAN, e.what());
  } catch (const IoError& e) {
    return fail(SS_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SS_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SS_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SS_ERR_INTERNAL, "unknown failure");
  }
}

#define SS_REQUIRE(cond, msg) \
  if (!(cond)) return fail(SS_ERR_INVALID_ARGUMENT, msg)

quant::Rounding to_rounding(ss_rounding r) {
  return r == SS_ROUND_TRUNCATE ? quant::Rounding::Truncate : quant::Rounding::Nearest;
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

model::PreparedModel planned(const ss_model* m) {
  return m->prepared ? *m->prepared : model::prepare(m->graph, quant::Rounding::Nearest);
}

perf::ClockConfig clock_of(const ss_clock* c) {
  perf::ClockConfig clock;
  if (c) {
    clock.frequency_hz = c->frequency_hz;
    clock.external_bandwidth = c->external_bandwidth;
  }
  return clock;
}

}  // namespace

extern "C" {

const char* ss_last_error(void) { return g_last_error.c_str(); }

const char* ss_status_string(ss_status status) {
  switch (status) {
    case SS_OK: return "ok";
    case SS_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SS_ERR_DOMAIN: return "domain error";
    case SS_ERR_RANGE: return "range error";
    case SS_ERR_SHAPE: return "shape error";
    case SS_ERR_FORMAT: return "format error";
    case SS_ERR_SEQUENCING: return "sequencing error";
    case SS_ERR_PLAN: return "plan error";
    case SS_ERR_IO: return "I/O error";
    case SS_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* ss_version(void) { return "1.0.0"; }

void ss_string_free(char* s) { std::free(s); }

ss_status ss_model_generate(double width_multiplier, int resolution, uint64_t seed, ss_model** out) {
  SS_REQUIRE(out, "out is NULL");
  return guard([&] {
    auto m = std::make_unique<ss_model>();
    m->graph = model::build_mobilenet_v2(width_multiplier, resolution, seed);
    *out = m.release();
    return SS_OK;
  });
}

ss_status ss_model_load(const char* dir, ss_model** out) {
  SS_REQUIRE(dir && out, "dir and out must be non-NULL");
  return guard([&] {
    auto loaded = package::load(dir);
    auto m = std::make_unique<ss_model>();
    m->graph = std::move(loaded.graph);
    m->prepared = std::move(loaded.prepared);
    *out = m.release();
    return SS_OK;
  });
}

ss_status ss_model_save(const ss_model* model, const char* dir) {
  SS_REQUIRE(model && dir, "model and dir must be non-NULL");
  return guard([&] {
    if (model->prepared) {
      package::save_package(*model->prepared, dir);
    } else {
      package::save_graph(model->graph, dir);
    }
    return SS_OK;
  });
}

ss_status ss_model_prepare(ss_model* model, ss_rounding rounding) {
  SS_REQUIRE(model, "model is NULL");
  SS_REQUIRE(rounding == SS_ROUND_NEAREST || rounding == SS_ROUND_TRUNCATE, "unknown rounding mode");
  return guard([&] {
    if (model->prepared) {
      if (model->prepared->rounding != to_rounding(rounding)) {
        return fail(SS_ERR_INVALID_ARGUMENT, "model was prepared with a different rounding mode");
      }
      return SS_OK;
    }
    model->prepared = model::prepare(model->graph, to_rounding(rounding));
    model->graph = model->prepared->graph;
    return SS_OK;
  });
}

void ss_model_free(ss_model* model) { delete model; }

ss_status ss_model_info_get(const ss_model* m, ss_model_info* out) {
  SS_REQUIRE(m && out, "model and out must be non-NULL");
  return guard([&] {
    const auto pm = planned(m);
    ss_model_info info{};
    info.prepared = m->prepared ? 1 : 0;
    info.rounding = pm.rounding == quant::Rounding::Truncate ? SS_ROUND_TRUNCATE : SS_ROUND_NEAREST;
    info.layers = static_cast<int>(pm.graph.layers.size());
    info.residual_links = static_cast<int>(pm.graph.residuals.size());
    for (const auto& r : pm.rounds) (r.head ? info.head_entries : info.rounds)++;
    info.input_height = pm.graph.input_dims.height;
    info.input_width = pm.graph.input_dims.width;
    info.input_channels = pm.graph.input_dims.channels;
    info.output_channels = pm.output_channels;
    for (const auto& l : pm.graph.layers) info.weight_bytes += model::weight_bytes(l);
    info.residual_fifo_batches = dataflow::residual_fifo_capacity(pm);
    *out = info;
    return SS_OK;
  });
}

ss_status ss_model_summary(const ss_model* m, char** out) {
  SS_REQUIRE(m && out, "model and out must be non-NULL");
  return guard([&] {
    const auto pm = planned(m);
    std::ostringstream os;
    os << "model " << pm.graph.name << (m->prepared ? " (prepared)" : " (graph)") << "\n";
    os << "input " << pm.graph.input_dims.height << "x" << pm.graph.input_dims.width << "x"
       << pm.graph.input_dims.channels << "\n";
    for (std::size_t i = 0; i < m->graph.layers.size(); ++i) {
      const auto& l = m->graph.layers[i];
      os << "layer " << i << " " << model::to_string(l.kind) << " " << l.name << " " << l.in.height << "x"
         << l.in.width << "x" << l.in.channels << " -> " << l.out.height << "x" << l.out.width << "x"
         << l.out.channels << " stride " << l.stride << "\n";
    }
    int rounds = 0;
    for (const auto& r : pm.rounds) {
      auto name = [&](int i) { return i < 0 ? std::string("-") : pm.layer(i).name; };
      os << (r.head ? "head   " : "round " + std::to_string(r.round_index) + " ");
      if (r.c2d >= 0) os << " C2D=" << name(r.c2d);
      os << " DWC=" << name(r.dwc) << " PRO=" << name(r.pro) << " ADD=" << (r.add >= 0 ? name(r.add) : "pass")
         << " EXP=" << name(r.exp) << " weights=" << r.pro_weight_bytes + r.exp_weight_bytes << "\n";
      if (!r.head) ++rounds;
    }
    os << rounds << " rounds, " << pm.rounds.size() - static_cast<std::size_t>(rounds) << " head entries\n";
    *out = dup_string(os.str());
    return SS_OK;
  });
}

ss_status ss_tensor_create(int height, int width, int channels, double scale, int32_t zero_point,
                           const uint8_t* data, ss_tensor** out) {
  SS_REQUIRE(out, "out is NULL");
  SS_REQUIRE(height > 0 && width > 0 && channels > 0, "tensor dims must be positive");
  return guard([&] {
    auto t = std::make_unique<ss_tensor>();
    t->t = QTensor(Dims{height, width, channels}, QuantParams{scale, zero_point});
    if (data) std::memcpy(t->t.data.data(), data, t->t.data.size());
    t->t.validate();
    *out = t.release();
    return SS_OK;
  });
}

ss_status ss_image_load(const char* path, const ss_model* m, ss_tensor** out) {
  SS_REQUIRE(path && m && out, "path, model and out must be non-NULL");
  return guard([&] {
    auto t = std::make_unique<ss_tensor>();
    t->t = image::read_image(path, m->graph.input_q);
    *out = t.release();
    return SS_OK;
  });
}

ss_status ss_image_random(const ss_model* m, uint64_t seed, ss_tensor** out) {
  SS_REQUIRE(m && out, "model and out must be non-NULL");
  return guard([&] {
    auto t = std::make_unique<ss_tensor>();
    t->t = model::random_image(m->graph, seed);
    *out = t.release();
    return SS_OK;
  });
}

ss_status ss_image_save(const ss_tensor* image, const char* path, int ppm) {
  SS_REQUIRE(image && path, "image and path must be non-NULL");
  return guard([&] {
    if (ppm) {
      image::write_ppm(image->t, path);
    } else {
      image::write_raw(image->t, path);
    }
    return SS_OK;
  });
}

ss_status ss_tensor_shape(const ss_tensor* t, int* height, int* width, int* channels) {
  SS_REQUIRE(t, "tensor is NULL");
  if (height) *height = t->t.dims.height;
  if (width) *width = t->t.dims.width;
  if (channels) *channels = t->t.dims.channels;
  return SS_OK;
}

ss_status ss_tensor_quant(const ss_tensor* t, double* scale, int32_t* zero_point) {
  SS_REQUIRE(t, "tensor is NULL");
  if (scale) *scale = t->t.quant.scale;
  if (zero_point) *zero_point = t->t.quant.zero_point;
  return SS_OK;
}

ss_status ss_tensor_data(const ss_tensor* t, const uint8_t** data, size_t* size) {
  SS_REQUIRE(t && data && size, "tensor, data and size must be non-NULL");
  *data = t->t.data.data();
  *size = t->t.data.size();
  return SS_OK;
}

void ss_tensor_free(ss_tensor* t) { delete t; }

ss_status ss_infer(const ss_model* m, const ss_tensor* image, const ss_infer_options* options, ss_result** out) {
  SS_REQUIRE(m && image && out, "model, image and out must be non-NULL");
  SS_REQUIRE(m->prepared, "model is not prepared");
  return guard([&] {
    dataflow::RunOptions opt;
    if (options) {
      opt.mode = options->mode == SS_MODE_STREAM ? dataflow::ExecMode::Stream : dataflow::ExecMode::Sequential;
      opt.stream_queue_capacity = options->stream_queue_capacity;
      opt.residual_capacity = options->residual_capacity;
    }
    auto r = std::make_unique<ss_result>();
    r->run = dataflow::run_inference(*m->prepared, image->t, opt);
    r->logits.t = r->run.logits;
    *out = r.release();
    return SS_OK;
  });
}

ss_status ss_result_logits(const ss_result* result, const ss_tensor** out) {
  SS_REQUIRE(result && out, "result and out must be non-NULL");
  *out = &result->logits;
  return SS_OK;
}

ss_status ss_result_engine_stats(const ss_result* result, ss_engine engine, ss_engine_stats* out) {
  SS_REQUIRE(result && out, "result and out must be non-NULL");
  SS_REQUIRE(engine >= SS_ENGINE_C2D && engine <= SS_ENGINE_ADD, "unknown engine");
  const auto& s = result->run.engine_stats[static_cast<std::size_t>(engine)];
  *out = {s.cycles, s.madds, s.useful_madds, s.weight_bytes, s.output_elements, s.accumulator_words};
  return SS_OK;
}

void ss_result_free(ss_result* result) { delete result; }

ss_status ss_oracle_infer(const ss_model* m, const ss_tensor* image, ss_tensor** out) {
  SS_REQUIRE(m && image && out, "model, image and out must be non-NULL");
  SS_REQUIRE(m->prepared, "model is not prepared");
  return guard([&] {
    auto t = std::make_unique<ss_tensor>();
    t->t = oracle::run_model_oracle(*m->prepared, image->t);
    *out = t.release();
    return SS_OK;
  });
}

ss_status ss_verify(const ss_verify_options* options, int* passed, char** report) {
  SS_REQUIRE(options && passed, "options and passed must be non-NULL");
  return guard([&] {
    verify::Options opt;
    opt.seed = options->seed;
    opt.trials = options->trials;
    opt.rounding = to_rounding(options->rounding);
    opt.suite = options->suite ? options->suite : "";
    opt.fault = options->fault == SS_FAULT_REQUANT_OFF_BY_ONE ? verify::Fault::RequantOffByOne : verify::Fault::None;
    const auto r = verify::run(opt);
    *passed = r.ok() ? 1 : 0;
    if (report) {
      std::ostringstream os;
      verify::write(os, r, opt);
      *report = dup_string(os.str());
    }
    return SS_OK;
  });
}

ss_clock ss_clock_default(void) {
  const perf::ClockConfig c;
  return {c.frequency_hz, c.external_bandwidth};
}

ss_status ss_report(const ss_model* m, const ss_clock* clock, ss_format format, char** out) {
  SS_REQUIRE(m && out, "model and out must be non-NULL");
  return guard([&] {
    const auto report = perf::build_report(planned(m), clock_of(clock));
    std::ostringstream os;
    perf::write_report(os, report, format == SS_FORMAT_CSV ? perf::Format::Csv : perf::Format::Text);
    *out = dup_string(os.str());
    return SS_OK;
  });
}

ss_status ss_latency(const ss_model* m, const ss_clock* clock, double* milliseconds, double* fps) {
  SS_REQUIRE(m, "model is NULL");
  return guard([&] {
    const auto c = clock_of(clock);
    const auto l = perf::total_latency(perf::estimate_timeline(planned(m), c), c);
    if (milliseconds) *milliseconds = l.milliseconds;
    if (fps) *fps = l.fps;
    return SS_OK;
  });
}

ss_status ss_engine_gops(ss_engine engine, double frequency_hz, double* gops) {
  SS_REQUIRE(gops, "gops is NULL");
  SS_REQUIRE(engine >= SS_ENGINE_C2D && engine <= SS_ENGINE_ADD, "unknown engine");
  return guard([&] {
    perf::ClockConfig clock;
    clock.frequency_hz = frequency_hz;
    *gops = perf::throughput_report(engines::EngineConfig{}, clock)[static_cast<std::size_t>(engine)].gops;
    return SS_OK;
  });
}

ss_status ss_normalize_performance(double gops, double freq_mhz, int dsps, double* out) {
  SS_REQUIRE(out, "out is NULL");
  return guard([&] {
    *out = perf::normalize_performance(gops, freq_mhz, dsps);
    return SS_OK;
  });
}

}  // extern "C"
