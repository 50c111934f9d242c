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
#include <condition_variable>
#include <coroutine>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "engines.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "stream.hpp"

namespace semistream::dataflow {

using model::PreparedModel;
using model::RoundPlan;

/// Raised inside a process blocked on a queue that another process gave up on.
class QueueAborted : public SequencingError {
 public:
  using SequencingError::SequencingError;
};

enum class QueueMode : std::uint8_t {
  Cooperative,  // never blocks; the scheduler retries the operation
  Blocking,     // one thread per process
};

struct QueueStats {
  std::string name;
  std::size_t capacity = 0;
  std::uint64_t enqueued = 0;
  std::uint64_t dequeued = 0;
  std::size_t max_occupancy = 0;
};

template <class T>
class BoundedQueue {
 public:
  BoundedQueue(std::string name, std::size_t capacity, QueueMode mode) : mode_(mode) {
    if (capacity == 0) throw DomainError("queue " + name + " needs a positive capacity");
    stats_.name = std::move(name);
    stats_.capacity = capacity;
  }
  BoundedQueue(const BoundedQueue&) = delete;
  BoundedQueue& operator=(const BoundedQueue&) = delete;

  QueueMode mode() const { return mode_; }
  const std::string& name() const { return stats_.name; }

  bool try_push(T& value) {
    std::lock_guard lock(mu_);
    check_aborted();
    if (items_.size() >= stats_.capacity) return false;
    emplace(std::move(value));
    return true;
  }

  bool try_pop(T& out) {
    std::lock_guard lock(mu_);
    check_aborted();
    if (items_.empty()) return false;
    out = take();
    return true;
  }

  void push(T value) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return aborted_ || items_.size() < stats_.capacity; });
    check_aborted();
    emplace(std::move(value));
  }

  T pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return aborted_ || !items_.empty(); });
    check_aborted();
    return take();
  }

  void abort() {
    {
      std::lock_guard lock(mu_);
      aborted_ = true;
    }
    not_full_.notify_all();
    not_empty_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }

  QueueStats stats() const {
    std::lock_guard lock(mu_);
    return stats_;
  }

 private:
  void check_aborted() const {
    if (aborted_) throw QueueAborted("queue " + stats_.name + " was aborted");
  }
  void emplace(T&& v) {
    items_.push_back(std::move(v));
    ++stats_.enqueued;
    stats_.max_occupancy = std::max(stats_.max_occupancy, items_.size());
    not_empty_.notify_one();
  }
  T take() {
    T v = std::move(items_.front());
    items_.pop_front();
    ++stats_.dequeued;
    not_full_.notify_one();
    return v;
  }

  QueueMode mode_;
  mutable std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  bool aborted_ = false;
  QueueStats stats_;
};

// ---------------------------------------------------------------------------
// Processes

/// A sequential engine process.  Suspended processes park a retry predicate
/// that performs the pending queue operation when it can.
class Process {
 public:
  struct promise_type {
    std::function<bool()> pending;
    std::exception_ptr error;

    Process get_return_object() { return Process(std::coroutine_handle<promise_type>::from_promise(*this)); }
    std::suspend_always initial_suspend() noexcept { return {}; }
    std::suspend_always final_suspend() noexcept { return {}; }
    void return_void() {}
    void unhandled_exception() { error = std::current_exception(); }
  };
  using Handle = std::coroutine_handle<promise_type>;

  Process() = default;
  explicit Process(Handle h) : h_(h) {}
  Process(Process&& o) noexcept : h_(std::exchange(o.h_, {})), name_(std::move(o.name_)) {}
  Process& operator=(Process&& o) noexcept {
    if (this != &o) {
      if (h_) h_.destroy();
      h_ = std::exchange(o.h_, {});
      name_ = std::move(o.name_);
    }
    return *this;
  }
  ~Process() {
    if (h_) h_.destroy();
  }

  Process named(std::string name) && {
    name_ = std::move(name);
    return std::move(*this);
  }
  const std::string& name() const { return name_; }
  Handle handle() const { return h_; }
  bool done() const { return !h_ || h_.done(); }

 private:
  Handle h_;
  std::string name_;
};

template <class T>
struct PushAwaiter {
  BoundedQueue<T>& queue;
  T value;

  bool await_ready() {
    if (queue.mode() == QueueMode::Blocking) {
      queue.push(std::move(value));
      return true;
    }
    return queue.try_push(value);
  }
  void await_suspend(Process::Handle h) {
    h.promise().pending = [this] { return queue.try_push(value); };
  }
  void await_resume() const noexcept {}
};

template <class T>
struct PopAwaiter {
  BoundedQueue<T>& queue;
  T slot{};

  bool await_ready() {
    if (queue.mode() == QueueMode::Blocking) {
      slot = queue.pop();
      return true;
    }
    return queue.try_pop(slot);
  }
  void await_suspend(Process::Handle h) {
    h.promise().pending = [this] { return queue.try_pop(slot); };
  }
  T await_resume() { return std::move(slot); }
};

template <class T>
PushAwaiter<T> push(BoundedQueue<T>& q, T value) {
  return {q, std::move(value)};
}

template <class T>
PopAwaiter<T> pop(BoundedQueue<T>& q) {
  return {q};
}

/// Round-robin on the calling thread.  Throws SequencingError when a full
/// sweep makes no progress.
void run_cooperative(std::vector<Process>& processes);

/// One thread per process.  The first failure runs every `abort_all` hook so
/// blocked peers unwind, then the failure is rethrown.
void run_threaded(std::vector<Process>& processes, const std::vector<std::function<void()>>& abort_all);

// ---------------------------------------------------------------------------
// Planning

/// One round per bottleneck block plus a trailing head entry (average pool
/// on DWC, classifier on PRO).
std::vector<RoundPlan> schedule_rounds(const PreparedModel& model);

/// Residual FIFO slots (ChannelBatch units) the plan needs: the largest
/// projection output frame.
std::size_t residual_fifo_capacity(const PreparedModel& model);

struct SplitStream {
  std::vector<ChannelBatch> first;
  std::vector<ChannelBatch> second;
};

/// Splits a 32-channel entry-conv output into its two 16-channel streams.
SplitStream split_c2d_stream(const QTensor& c2d_output);

/// Interleaves the two streams back (batch 0 then batch 1 per pixel).
std::vector<ChannelBatch> merge_c2d_stream(const SplitStream& s);

// ---------------------------------------------------------------------------
// Inference

enum class ExecMode : std::uint8_t { Sequential, Stream };

struct RunOptions {
  ExecMode mode = ExecMode::Sequential;
  // Stage-2 queue capacity in batches; 0 selects twice the frame width.
  std::size_t stream_queue_capacity = 0;
  // 0 selects residual_fifo_capacity(model).
  std::size_t residual_capacity = 0;
  engines::EngineConfig engine;
};

struct RoundTrace {
  int round_index = 0;
  bool head = false;
  // DWC input buffer occupancy when DWC emitted its first batch.
  std::size_t dwc_fill_at_first_emit = 0;
  std::size_t dwc_frame_batches = 0;
  // Largest occupancy among the PRO/ADD/EXP stream queues, and the frame
  // those queues carry.
  std::size_t stream_max_occupancy = 0;
  std::size_t stream_frame_batches = 0;
  std::uint64_t residual_pushed = 0;
  std::uint64_t residual_popped = 0;
  std::uint64_t residual_push_digest = 0;
  std::uint64_t residual_pop_digest = 0;
};

struct RunResult {
  // Output frame with channel padding removed (1x1xclasses with a head).
  QTensor logits;
  std::array<engines::EngineStats, 5> engine_stats{};
  std::vector<QueueStats> queues;
  std::vector<RoundTrace> rounds;

  const engines::EngineStats& stats(engines::Engine e) const { return engine_stats[static_cast<std::size_t>(e)]; }
};

RunResult run_inference(const PreparedModel& model, const QTensor& image, const RunOptions& options = {});

/// Reference path: each layer runs to completion on its engine, shortcuts
/// come from a table of saved outputs.
QTensor run_layers(const PreparedModel& model, const QTensor& image);

/// Drops padded channels beyond `channels` from every pixel.
QTensor unpad_channels(const QTensor& t, int channels);

}  // namespace semistream::dataflow
