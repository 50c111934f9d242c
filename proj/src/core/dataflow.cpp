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

#include "dataflow.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

namespace semistream::dataflow {

using engines::Engine;
using engines::EngineStats;
using model::LayerDesc;
using model::LayerKind;
using quant::Rounding;
using Queue = BoundedQueue<ChannelBatch>;

// ---------------------------------------------------------------------------
// Schedulers

void run_cooperative(std::vector<Process>& processes) {
  for (;;) {
    bool all_done = true;
    bool progress = false;
    for (auto& p : processes) {
      if (p.done()) continue;
      all_done = false;
      auto& promise = p.handle().promise();
      if (promise.pending) {
        if (!promise.pending()) continue;
        promise.pending = nullptr;
      }
      p.handle().resume();
      progress = true;
      if (promise.error) std::rethrow_exception(promise.error);
    }
    if (all_done) return;
    if (!progress) {
      std::string blocked;
      for (const auto& p : processes) {
        if (!p.done()) blocked += (blocked.empty() ? "" : ", ") + p.name();
      }
      throw SequencingError("deadlock: no process can make progress (blocked: " + blocked + ")");
    }
  }
}

void run_threaded(std::vector<Process>& processes, const std::vector<std::function<void()>>& abort_all) {
  std::mutex mu;
  bool aborted = false;
  std::vector<std::thread> threads;
  threads.reserve(processes.size());
  for (auto& p : processes) {
    threads.emplace_back([&, h = p.handle()] {
      h.resume();
      if (h.promise().error) {
        std::lock_guard lock(mu);
        if (!aborted) {
          aborted = true;
          for (const auto& hook : abort_all) hook();
        }
      }
    });
  }
  for (auto& t : threads) t.join();

  // Report the root cause rather than the aborts it triggered.
  std::exception_ptr first;
  for (auto& p : processes) {
    const auto& e = p.handle().promise().error;
    if (!e) continue;
    try {
      std::rethrow_exception(e);
    } catch (const QueueAborted&) {
      if (!first) first = e;
    } catch (...) {
      std::rethrow_exception(e);
    }
  }
  if (first) std::rethrow_exception(first);
  for (auto& p : processes) {
    if (!p.done()) throw SequencingError("process " + p.name() + " did not finish");
  }
}

// ---------------------------------------------------------------------------
// Planning

namespace {

[[noreturn]] void plan_error(const model::ModelGraph& g, int layer, const std::string& what) {
  std::ostringstream os;
  os << "layer " << layer << " (" << g.layers[static_cast<std::size_t>(layer)].name << "): " << what;
  throw PlanError(os.str());
}

}  // namespace

std::vector<RoundPlan> schedule_rounds(const PreparedModel& model) {
  const auto& g = model.graph;
  std::vector<RoundPlan> rounds;
  RoundPlan cur;
  bool open = false;
  auto close = [&] {
    if (open) rounds.push_back(cur);
    cur = RoundPlan{};
    cur.round_index = static_cast<int>(rounds.size());
    open = false;
  };

  for (int i = 0; i < static_cast<int>(g.layers.size()); ++i) {
    const LayerDesc& l = g.layers[static_cast<std::size_t>(i)];
    switch (l.kind) {
      case LayerKind::C2D:
        if (i != 0) plan_error(g, i, "the entry convolution must be the first layer");
        cur.c2d = i;
        open = true;
        break;
      case LayerKind::DWC:
      case LayerKind::AVGPOOL:
        if (cur.pro >= 0) close();
        if (cur.dwc >= 0) plan_error(g, i, "two depthwise layers in one round");
        if (cur.head) plan_error(g, i, "layers after the pooling head");
        if (!rounds.empty() && rounds.back().head) plan_error(g, i, "layers after the pooling head");
        cur.dwc = i;
        cur.head = l.kind == LayerKind::AVGPOOL;
        cur.dwc_out = l.out;
        open = true;
        break;
      case LayerKind::PRO:
        if (cur.dwc < 0 || cur.pro >= 0) plan_error(g, i, "projection without a preceding depthwise layer");
        cur.pro = i;
        break;
      case LayerKind::ADD:
        if (cur.pro < 0 || cur.add >= 0) plan_error(g, i, "residual addition must follow a projection");
        cur.add = i;
        cur.residual = true;
        break;
      case LayerKind::EXP:
        if (cur.pro < 0 || cur.head) plan_error(g, i, "expansion must close a round that ran a projection");
        cur.exp = i;
        close();
        break;
      default:
        plan_error(g, i, "layer kind has no engine slot");
    }
  }
  close();

  for (std::size_t r = 0; r < rounds.size(); ++r) {
    auto& rp = rounds[r];
    if (rp.c2d >= 0 && r != 0) throw PlanError("entry convolution outside round 0");
    if (rp.dwc >= 0) rp.dwc_weight_bytes = model::weight_bytes(model.layer(rp.dwc));
    if (rp.pro >= 0) rp.pro_weight_bytes = model::weight_bytes(model.layer(rp.pro));
    if (rp.exp >= 0) rp.exp_weight_bytes = model::weight_bytes(model.layer(rp.exp));
    if (!rp.residual) continue;
    // The shortcut must be the frame the previous round streamed out of ADD.
    int source = -1;
    for (const auto& link : g.residuals) {
      if (link.add_layer == rp.add) source = link.source_layer;
    }
    const int expected = r == 0 ? -1 : (rounds[r - 1].add >= 0 ? rounds[r - 1].add : rounds[r - 1].pro);
    if (source < 0 || source != expected) {
      plan_error(g, rp.add, "shortcut source is not the previous round's projection output");
    }
    rounds[r - 1].save_residual = true;
  }
  return rounds;
}

std::size_t residual_fifo_capacity(const PreparedModel& model) {
  std::size_t best = 0;
  for (const auto& l : model.graph.layers) {
    if (l.kind != LayerKind::PRO) continue;
    best = std::max(best, l.out.pixels() * static_cast<std::size_t>(l.out.channels / kBatchLanes));
  }
  return best;
}

SplitStream split_c2d_stream(const QTensor& t) {
  if (t.dims.channels % kBatchLanes != 0 || t.dims.channels < kBatchLanes) {
    throw ShapeError("entry stream split needs channels divisible by 16");
  }
  SplitStream s;
  const int per_pixel = t.dims.channels / kBatchLanes;
  for (int row = 0; row < t.dims.height; ++row) {
    for (int col = 0; col < t.dims.width; ++col) {
      s.first.push_back(batch_of(t, row, col, 0));
      for (int b = 1; b < per_pixel; ++b) s.second.push_back(batch_of(t, row, col, b));
    }
  }
  return s;
}

std::vector<ChannelBatch> merge_c2d_stream(const SplitStream& s) {
  if (s.first.empty() || s.second.size() % s.first.size() != 0) {
    throw SequencingError("entry streams disagree on pixel count");
  }
  const std::size_t extra = s.second.size() / s.first.size();
  std::vector<ChannelBatch> out;
  out.reserve(s.first.size() + s.second.size());
  for (std::size_t p = 0; p < s.first.size(); ++p) {
    out.push_back(s.first[p]);
    for (std::size_t b = 0; b < extra; ++b) {
      const auto& buffered = s.second[p * extra + b];
      if (buffered.row != s.first[p].row || buffered.col != s.first[p].col) {
        throw SequencingError("buffered entry stream is out of step");
      }
      out.push_back(buffered);
    }
  }
  return out;
}

QTensor unpad_channels(const QTensor& t, int channels) {
  if (channels <= 0 || channels >= t.dims.channels) return t;
  QTensor out(Dims{t.dims.height, t.dims.width, channels}, t.quant);
  for (std::size_t p = 0; p < t.dims.pixels(); ++p) {
    const auto src = t.pixel(p);
    std::copy_n(src.begin(), channels, out.pixel(p).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage-2 processes

namespace {

void mix(std::uint64_t& h, std::uint64_t v) {
  h ^= v;
  h *= 0x100000001b3ULL;
}

std::uint64_t digest(std::uint64_t h, const ChannelBatch& b) {
  mix(h, static_cast<std::uint64_t>(b.row));
  mix(h, static_cast<std::uint64_t>(b.col));
  mix(h, static_cast<std::uint64_t>(b.batch_index));
  for (auto v : b.values) mix(h, v);
  return h;
}

constexpr std::uint64_t kDigestSeed = 0xcbf29ce484222325ULL;

void expect_batch(const ChannelBatch& b, int row, int col, int index, const char* who) {
  if (b.row != row || b.col != col || b.batch_index != index) {
    std::ostringstream os;
    os << who << " expected batch (" << row << ", " << col << ", " << index << ") but received (" << b.row << ", "
       << b.col << ", " << b.batch_index << ")";
    throw SequencingError(os.str());
  }
}

std::uint64_t frame_batches(Dims d) { return d.pixels() * static_cast<std::uint64_t>(d.channels / kBatchLanes); }

Process feeder(const QTensor& frame, Queue& out) {
  TensorBatchReader reader(frame);
  while (!reader.exhausted()) co_await push(out, reader.next());
}

Process forward(std::uint64_t count, Queue& in, Queue& out) {
  for (std::uint64_t n = 0; n < count; ++n) co_await push(out, co_await pop(in));
}

Process pro_process(const LayerDesc& layer, Rounding rounding, Queue& in, Queue& out) {
  const engines::ProjectionEngine engine(layer, rounding);
  std::vector<std::uint8_t> acts(static_cast<std::size_t>(layer.in.channels));
  for (int row = 0; row < layer.in.height; ++row) {
    for (int col = 0; col < layer.in.width; ++col) {
      for (int a = 0; a < layer.apass; ++a) {
        const ChannelBatch b = co_await pop(in);
        expect_batch(b, row, col, a, "PRO");
        std::copy(b.values.begin(), b.values.end(), acts.begin() + a * kBatchLanes);
      }
      for (int f = 0; f < layer.fpass; ++f) {
        ChannelBatch o{row, col, f, {}};
        engine.filter_batch(acts, f, o.values);
        co_await push(out, o);
      }
    }
  }
}

struct ResidualPort {
  Queue* fifo = nullptr;
  const LayerDesc* add = nullptr;  // null: pass-through
  bool save = false;
  RoundTrace* trace = nullptr;
};

Process add_process(std::uint64_t count, Rounding rounding, Queue& in, Queue& out, ResidualPort port) {
  for (std::uint64_t n = 0; n < count; ++n) {
    ChannelBatch b = co_await pop(in);
    if (port.add) {
      const ChannelBatch shortcut = co_await pop(*port.fifo);
      expect_batch(shortcut, b.row, b.col, b.batch_index, "residual FIFO");
      ++port.trace->residual_popped;
      port.trace->residual_pop_digest = digest(port.trace->residual_pop_digest, shortcut);
      b = engines::add_batch(b, shortcut, *port.add->add, rounding);
    }
    if (port.save) {
      ++port.trace->residual_pushed;
      port.trace->residual_push_digest = digest(port.trace->residual_push_digest, b);
      co_await push(*port.fifo, b);
    }
    co_await push(out, b);
  }
}

Process exp_process(const LayerDesc& layer, Rounding rounding, Queue& in, Queue& out) {
  engines::ExpansionEngine engine(layer, rounding);
  for (int row = 0; row < layer.in.height; ++row) {
    for (int col = 0; col < layer.in.width; ++col) {
      engine.begin_pixel();
      for (int a = 0; a < layer.apass; ++a) {
        const ChannelBatch b = co_await pop(in);
        expect_batch(b, row, col, a, "EXP");
        engine.consume(a, b.values);
      }
      const auto values = engine.outputs();
      for (int f = 0; f < layer.fpass; ++f) {
        ChannelBatch o{row, col, f, {}};
        std::copy_n(values.begin() + f * kBatchLanes, kBatchLanes, o.values.begin());
        co_await push(out, o);
      }
    }
  }
}

Process collector(std::uint64_t count, Queue& in, FrameBuffer& frame) {
  for (std::uint64_t n = 0; n < count; ++n) frame.put(co_await pop(in));
}

class Runner {
 public:
  Runner(const PreparedModel& model, const RunOptions& options, RunResult& result)
      : model_(model), options_(options), result_(result),
        qmode_(options.mode == ExecMode::Stream ? QueueMode::Blocking : QueueMode::Cooperative) {
    const std::size_t needed = residual_fifo_capacity(model);
    if (options.residual_capacity != 0 && options.residual_capacity < needed) {
      std::ostringstream os;
      os << "residual FIFO capacity " << options.residual_capacity << " is below the " << needed
         << " batches the largest projection frame needs";
      throw PlanError(os.str());
    }
    const std::size_t cap = options.residual_capacity != 0 ? options.residual_capacity : std::max<std::size_t>(needed, 1);
    residual_ = std::make_unique<Queue>("residual_fifo", cap, qmode_);
  }

  QTensor run(const QTensor& image) {
    if (model_.rounds.empty()) throw PlanError("model has no rounds");
    const auto& first = model_.layer(model_.rounds.front().c2d >= 0 ? model_.rounds.front().c2d
                                                                    : model_.rounds.front().dwc);
    if (!(image.dims == first.in)) {
      std::ostringstream os;
      os << "image is " << image.dims.height << "x" << image.dims.width << "x" << image.dims.channels
         << ", model expects " << first.in.height << "x" << first.in.width << "x" << first.in.channels;
      throw ShapeError(os.str());
    }
    QTensor frame = image;
    for (const auto& round : model_.rounds) {
      try {
        frame = run_round(round, std::move(frame));
      } catch (...) {
        rethrow_with_round(round);
      }
    }
    result_.queues.push_back(residual_->stats());
    return frame;
  }

 private:
  [[noreturn]] static void rethrow_with_round(const RoundPlan& round) {
    const std::string prefix =
        (round.head ? std::string("head entry: ") : "round " + std::to_string(round.round_index) + ": ");
    try {
      throw;
    } catch (const QueueAborted& e) {
      throw QueueAborted(prefix + e.what());
    } catch (const ShapeError& e) {
      throw ShapeError(prefix + e.what());
    } catch (const SequencingError& e) {
      throw SequencingError(prefix + e.what());
    } catch (const DomainError& e) {
      throw DomainError(prefix + e.what());
    } catch (const RangeError& e) {
      throw RangeError(prefix + e.what());
    } catch (const PlanError& e) {
      throw PlanError(prefix + e.what());
    }
  }

  EngineStats& stats(Engine e) { return result_.engine_stats[static_cast<std::size_t>(e)]; }

  QTensor run_round(const RoundPlan& round, QTensor frame) {
    RoundTrace trace;
    trace.round_index = round.round_index;
    trace.head = round.head;
    trace.residual_push_digest = trace.residual_pop_digest = kDigestSeed;
    const Rounding rounding = model_.rounding;

    // Entry convolution; its two output streams are reassembled into the
    // DWC input buffer.
    std::unique_ptr<FrameBuffer> dwc_in;
    if (round.c2d >= 0) {
      const LayerDesc& c2d = model_.layer(round.c2d);
      auto r = engines::c2d_forward(frame, c2d, rounding);
      stats(Engine::C2D) += r.stats;
      dwc_in = std::make_unique<FrameBuffer>(c2d.out, c2d.out_q);
      for (const auto& b : merge_c2d_stream(split_c2d_stream(r.output))) dwc_in->put(b);
    } else {
      dwc_in = std::make_unique<FrameBuffer>(frame.dims, frame.quant);
      TensorBatchReader reader(frame);
      while (!reader.exhausted()) dwc_in->put(reader.next());
    }
    trace.dwc_frame_batches = dwc_in->capacity();

    // Reorder boundary: DWC only starts on a full frame and its pass-major
    // output is buffered whole before the pointwise stream begins.
    QTensor stage2_in;
    if (round.dwc >= 0) {
      if (!dwc_in->complete()) throw SequencingError("DWC started on a partial frame");
      const LayerDesc& dwc = model_.layer(round.dwc);
      stats(Engine::DWC) += engines::analytic_stats(dwc, options_.engine);
      if (dwc.kind == LayerKind::AVGPOOL) {
        trace.dwc_fill_at_first_emit = dwc_in->filled();
        stage2_in = engines::dwc_avgpool(dwc_in->tensor(), dwc, rounding).output;
      } else {
        FrameBuffer out(dwc.out, dwc.out_q);
        bool first = true;
        engines::dwc_run(dwc_in->tensor(), dwc, rounding, [&](const ChannelBatch& b) {
          if (first) {
            trace.dwc_fill_at_first_emit = dwc_in->filled();
            first = false;
          }
          out.put(b);
        });
        if (!out.complete()) throw SequencingError("DWC left its output frame incomplete");
        stage2_in = out.take();
      }
    } else {
      stage2_in = dwc_in->take();
    }
    if (round.pro < 0) {
      result_.rounds.push_back(trace);
      return stage2_in;
    }

    // Streaming triplet.
    const LayerDesc& pro = model_.layer(round.pro);
    const LayerDesc* add = round.add >= 0 ? &model_.layer(round.add) : nullptr;
    const LayerDesc* exp = round.exp >= 0 ? &model_.layer(round.exp) : nullptr;
    const Dims out_dims = exp ? exp->out : pro.out;
    const QuantParams out_q = exp ? exp->out_q : (add ? add->out_q : pro.out_q);
    const std::size_t cap =
        options_.stream_queue_capacity != 0 ? options_.stream_queue_capacity
                                            : std::max<std::size_t>(2 * static_cast<std::size_t>(stage2_in.dims.width), 1);
    const std::string tag = round.head ? "head" : "round" + std::to_string(round.round_index);
    Queue q_in(tag + "/dwc->pro", cap, qmode_);
    Queue q_pro(tag + "/pro->add", cap, qmode_);
    Queue q_add(tag + "/add->exp", cap, qmode_);
    Queue q_out(tag + "/exp->dwc", cap, qmode_);
    FrameBuffer next(out_dims, out_q);

    stats(Engine::PRO) += engines::analytic_stats(pro, options_.engine);
    if (add) {
      stats(Engine::ADD) += engines::analytic_stats(*add, options_.engine);
    } else {
      EngineStats pass;
      pass.cycles = frame_batches(pro.out);
      pass.output_elements = pro.out.elements();
      stats(Engine::ADD) += pass;
    }
    if (exp) stats(Engine::EXP) += engines::analytic_stats(*exp, options_.engine);

    const std::uint64_t pro_batches = frame_batches(pro.out);
    std::vector<Process> procs;
    procs.push_back(feeder(stage2_in, q_in).named("feeder"));
    procs.push_back(pro_process(pro, rounding, q_in, q_pro).named("PRO"));
    procs.push_back(add_process(pro_batches, rounding, q_pro, q_add, {residual_.get(), add, round.save_residual, &trace})
                        .named("ADD"));
    if (exp) {
      procs.push_back(exp_process(*exp, rounding, q_add, q_out).named("EXP"));
    } else {
      procs.push_back(forward(pro_batches, q_add, q_out).named("EXP(idle)"));
    }
    procs.push_back(collector(frame_batches(out_dims), q_out, next).named("collector"));

    if (qmode_ == QueueMode::Blocking) {
      run_threaded(procs, {[&] { q_in.abort(); }, [&] { q_pro.abort(); }, [&] { q_add.abort(); },
                           [&] { q_out.abort(); }, [&] { residual_->abort(); }});
    } else {
      run_cooperative(procs);
    }
    if (!next.complete()) throw SequencingError("stream stage left its output frame incomplete");

    for (const Queue* q : {&q_in, &q_pro, &q_add, &q_out}) {
      auto s = q->stats();
      trace.stream_max_occupancy = std::max(trace.stream_max_occupancy, s.max_occupancy);
      result_.queues.push_back(std::move(s));
    }
    trace.stream_frame_batches =
        std::min({frame_batches(stage2_in.dims), pro_batches, static_cast<std::uint64_t>(frame_batches(out_dims))});
    result_.rounds.push_back(trace);
    return next.take();
  }

  const PreparedModel& model_;
  const RunOptions& options_;
  RunResult& result_;
  QueueMode qmode_;
  std::unique_ptr<Queue> residual_;
};

}  // namespace

RunResult run_inference(const PreparedModel& model, const QTensor& image, const RunOptions& options) {
  image.validate();
  RunResult result;
  Runner runner(model, options, result);
  const QTensor out = runner.run(image);
  result.logits = unpad_channels(out, model.output_channels);
  return result;
}

QTensor run_layers(const PreparedModel& model, const QTensor& image) {
  const auto& g = model.graph;
  std::map<int, QTensor> saved;
  for (const auto& link : g.residuals) saved[link.source_layer];
  std::map<int, int> source_of;
  for (const auto& link : g.residuals) source_of[link.add_layer] = link.source_layer;

  QTensor cur = image;
  for (int i = 0; i < static_cast<int>(g.layers.size()); ++i) {
    const LayerDesc& l = model.layer(i);
    if (l.kind == LayerKind::ADD) {
      cur = engines::add_forward(cur, saved.at(source_of.at(i)), l, model.rounding).output;
    } else {
      cur = engines::run_layer(cur, l, model.rounding).output;
    }
    if (auto it = saved.find(i); it != saved.end()) it->second = cur;
  }
  return unpad_channels(cur, model.output_channels);
}

}  // namespace semistream::dataflow
