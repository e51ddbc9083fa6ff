#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "pphpc/config.hpp"

namespace pphpc {

enum class Strategy { ST, EQ, EX, ER, OD };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::ST: return "st";
    case Strategy::EQ: return "eq";
    case Strategy::EX: return "ex";
    case Strategy::ER: return "er";
    case Strategy::OD: return "od";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "st") return Strategy::ST;
  if (s == "eq") return Strategy::EQ;
  if (s == "ex") return Strategy::EX;
  if (s == "er") return Strategy::ER;
  if (s == "od") return Strategy::OD;
  throw std::invalid_argument("unknown strategy '" + name + "' (expected st, eq, ex, er or od)");
}

inline constexpr std::array<Strategy, 5> kAllStrategies{Strategy::ST, Strategy::EQ, Strategy::EX, Strategy::ER,
                                                       Strategy::OD};

// ---------------------------------------------------------------------------
// Synchronization policy

enum class SyncKind : std::uint8_t { None, Serialized, Barrier };
enum class CellSync : std::uint8_t { None, Serialized, Ordered };

struct SyncPolicy {
  std::array<SyncKind, 8> controller{};  // points 1..8
  SyncKind provider = SyncKind::None;
  CellSync init = CellSync::None;
  CellSync move = CellSync::None;

  SyncKind at(int point) const { return controller.at(static_cast<std::size_t>(point - 1)); }

  friend bool operator==(const SyncPolicy&, const SyncPolicy&) = default;

  static SyncPolicy for_strategy(Strategy s) {
    constexpr auto N = SyncKind::None;
    constexpr auto S = SyncKind::Serialized;
    constexpr auto B = SyncKind::Barrier;
    switch (s) {
      case Strategy::ST:
        return {{N, N, N, N, N, N, N, N}, N, CellSync::None, CellSync::None};
      case Strategy::EQ:
        return {{S, B, S, B, S, B, B, S}, N, CellSync::Serialized, CellSync::Serialized};
      case Strategy::EX:
        return {{S, B, S, B, S, B, B, S}, N, CellSync::Ordered, CellSync::Ordered};
      case Strategy::ER:
        return {{S, B, S, B, S, B, B, S}, B, CellSync::Ordered, CellSync::None};
      case Strategy::OD:
        return {{S, B, S, B, B, B, B, S}, S, CellSync::Serialized, CellSync::Serialized};
    }
    throw std::logic_error("unhandled strategy");
  }
};

// ---------------------------------------------------------------------------
// Tokens

/// Half-open token range. A negative `begin` is the end-of-cycle sentinel.
struct TokenRange {
  std::int64_t begin = -1;
  std::int64_t end = -1;

  static constexpr TokenRange end_of_cycle() { return {}; }
  bool is_end() const { return begin < 0; }
  std::int64_t size() const { return is_end() ? 0 : end - begin; }

  friend bool operator==(const TokenRange&, const TokenRange&) = default;
};

/// Tokens of worker `i` under an equal split of `total` over `workers`:
/// [n·i, min(n·(i+1), T)) with n = ceil(T/N).
inline TokenRange eq_token_range(std::int64_t total, std::uint32_t workers, std::uint32_t i) {
  if (workers == 0) throw std::invalid_argument("eq_token_range: zero workers");
  if (i >= workers) throw std::out_of_range("eq_token_range: worker index out of range");
  if (total < 0) throw std::invalid_argument("eq_token_range: negative token count");
  const std::int64_t n = (total + workers - 1) / workers;
  const std::int64_t lo = std::min(n * i, total);
  const std::int64_t hi = std::min(n * (i + 1), total);
  return {lo, hi};
}

struct ErGeometry {
  std::int32_t d_min = 0;
  std::int32_t n_max = 0;
  std::int32_t rows_per_worker = 0;        // initial estimate
  std::int32_t rows_per_worker_final = 0;  // after the divisibility adjustment
  std::int64_t tokens_per_worker = 0;
  std::vector<TokenRange> ranges;          // one per worker
  std::vector<std::int32_t> first_row;     // one per worker, plus y_env at the end
};

/// Row-block geometry of the ER strategy. Refuses worker counts that cannot
/// keep 2r+1 rows between consecutive workers.
inline ErGeometry er_geometry(std::int32_t x_env, std::int32_t y_env, std::uint32_t workers,
                              std::int32_t radius = 1) {
  if (workers == 0) throw std::invalid_argument("er_geometry: zero workers");
  if (radius < 0) throw std::invalid_argument("er_geometry: negative radius");
  ErGeometry g;
  g.d_min = 2 * radius + 1;
  g.n_max = y_env / g.d_min;
  if (static_cast<std::int64_t>(workers) > g.n_max)
    throw config_error("ER strategy refuses " + std::to_string(workers) + " workers: N_max = " +
                       std::to_string(g.n_max) + " for " + std::to_string(y_env) + " rows and d_min = " +
                       std::to_string(g.d_min));
  const std::int32_t n = static_cast<std::int32_t>(workers);
  g.rows_per_worker = y_env / n;
  const bool bump = (y_env % n > 0) && (n - 1) * (g.rows_per_worker + 1) <= y_env - g.d_min;
  g.rows_per_worker_final = g.rows_per_worker + (bump ? 1 : 0);
  g.tokens_per_worker = std::int64_t{x_env} * g.rows_per_worker_final;
  const std::int64_t total = std::int64_t{x_env} * y_env;
  for (std::int32_t i = 0; i < n; ++i) {
    const std::int64_t lo = g.tokens_per_worker * i;
    const std::int64_t hi = i < n - 1 ? g.tokens_per_worker * (i + 1) : total;
    g.ranges.push_back({lo, hi});
    g.first_row.push_back(g.rows_per_worker_final * i);
  }
  g.first_row.push_back(y_env);
  return g;
}

/// Strategy selection plus its parameters.
struct StrategyConfig {
  Strategy kind = Strategy::ST;
  std::uint32_t workers = 1;
  std::int64_t block = 500;
  std::int32_t radius = 1;

  void validate(const SizeParams& size) const {
    if (workers < 1) throw config_error("at least one worker is required");
    if (kind == Strategy::ST && workers != 1)
      throw config_error("the ST strategy runs exactly one worker (got " + std::to_string(workers) + ")");
    if (kind == Strategy::OD && block < 1) throw config_error("OD block size must be >= 1");
    if (kind == Strategy::ER) (void)er_geometry(size.x_env, size.y_env, workers, radius);
  }
};

// ---------------------------------------------------------------------------
// Cancellation

class run_cancelled : public std::runtime_error {
 public:
  run_cancelled() : std::runtime_error("run cancelled by a failing worker") {}
};

// Reusable rendezvous barrier that can be released early on failure.
class CancellableBarrier {
 public:
  explicit CancellableBarrier(std::uint32_t parties) : parties_(parties) {}

  // Returns false if the barrier was cancelled.
  bool arrive_and_wait() {
    std::unique_lock lock(mutex_);
    if (cancelled_) return false;
    const std::uint64_t gen = generation_;
    if (++arrived_ == parties_) {
      arrived_ = 0;
      ++generation_;
      cv_.notify_all();
      return true;
    }
    cv_.wait(lock, [&] { return generation_ != gen || cancelled_; });
    return !cancelled_;
  }

  void cancel() {
    std::lock_guard lock(mutex_);
    cancelled_ = true;
    cv_.notify_all();
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::uint32_t parties_;
  std::uint32_t arrived_ = 0;
  std::uint64_t generation_ = 0;
  bool cancelled_ = false;
};

/// Holds workers at the eight controller synchronization points according to
/// the strategy's policy.
class Controller {
 public:
  Controller(SyncPolicy policy, std::uint32_t workers) : policy_(policy), workers_(workers), barrier_(workers) {}

  void sync(int point) {
    if (point < 1 || point > 8) throw std::out_of_range("controller sync point must be in 1..8");
    if (cancelled_.load(std::memory_order_acquire)) throw run_cancelled();
    arrivals_[point - 1].fetch_add(1, std::memory_order_relaxed);
    switch (policy_.at(point)) {
      case SyncKind::None:
        break;
      case SyncKind::Serialized: {
        std::lock_guard lock(serial_);
        break;
      }
      case SyncKind::Barrier:
        if (!barrier_.arrive_and_wait()) throw run_cancelled();
        break;
    }
    if (cancelled_.load(std::memory_order_acquire)) throw run_cancelled();
  }

  void cancel() {
    cancelled_.store(true, std::memory_order_release);
    barrier_.cancel();
  }

  bool cancelled() const { return cancelled_.load(std::memory_order_acquire); }
  std::uint64_t arrivals(int point) const { return arrivals_.at(point - 1).load(); }
  const SyncPolicy& policy() const { return policy_; }
  std::uint32_t workers() const { return workers_; }

 private:
  SyncPolicy policy_;
  std::uint32_t workers_;
  CancellableBarrier barrier_;
  std::mutex serial_;
  std::array<std::atomic<std::uint64_t>, 8> arrivals_{};
  std::atomic<bool> cancelled_{false};
};

// ---------------------------------------------------------------------------
// Work providers

// Per-worker position inside a provider's work cycles.
struct WorkCursor {
  std::uint32_t worker = 0;
  std::int64_t cycle = -1;
  std::int64_t step = 0;
};

class WorkProvider {
 public:
  virtual ~WorkProvider() = default;

  // Must be called by every worker before it requests tokens of a new cycle.
  virtual void begin_cycle(WorkCursor& cursor) {
    ++cursor.cycle;
    cursor.step = 0;
  }

  // Next block of tokens for this worker, or the end-of-cycle sentinel.
  virtual TokenRange next(WorkCursor& cursor) = 0;

  virtual void cancel() {}

  virtual std::int64_t total() const = 0;
};

/// Fixed split computed once: each worker always gets the same tokens.
class EqualWorkProvider final : public WorkProvider {
 public:
  EqualWorkProvider(std::int64_t total, std::uint32_t workers) : total_(total) {
    for (std::uint32_t i = 0; i < workers; ++i) ranges_.push_back(eq_token_range(total, workers, i));
  }

  TokenRange next(WorkCursor& c) override {
    if (c.step++ > 0) return TokenRange::end_of_cycle();
    const TokenRange r = ranges_.at(c.worker);
    return r.size() > 0 ? r : TokenRange::end_of_cycle();
  }

  std::int64_t total() const override { return total_; }

 private:
  std::int64_t total_;
  std::vector<TokenRange> ranges_;
};

/// Shared counter advanced by the block size on every request.
class OnDemandWorkProvider final : public WorkProvider {
 public:
  OnDemandWorkProvider(std::int64_t total, std::int64_t block) : total_(total), block_(block) {
    if (block < 1) throw config_error("OD block size must be >= 1");
  }

  // Cycles alternate between two counters. Consecutive cycles are separated
  // by a barrier, so resetting the counter of the next cycle is race-free.
  void begin_cycle(WorkCursor& c) override {
    WorkProvider::begin_cycle(c);
    counters_[(c.cycle + 1) % 2].value.store(0, std::memory_order_relaxed);
  }

  TokenRange next(WorkCursor& c) override { return od_next_block(c.cycle); }

  TokenRange od_next_block(std::int64_t cycle) {
    const std::int64_t start = counters_[cycle % 2].value.fetch_add(block_, std::memory_order_relaxed);
    if (start >= total_) return TokenRange::end_of_cycle();
    return {start, std::min(start + block_, total_)};
  }

  std::int64_t total() const override { return total_; }
  std::int64_t block() const { return block_; }

 private:
  struct alignas(64) Counter {
    std::atomic<std::int64_t> value{0};
  };
  std::int64_t total_;
  std::int64_t block_;
  std::array<Counter, 2> counters_{};
};

/// Row-frontier gate between ER workers. Each worker publishes the row it is
/// about to process, which also says every earlier row of its block is done.
/// A worker may start row k only once the next worker (cyclically) has
/// published a row at least d_min past k, or has finished its block; it also
/// waits until the previous worker has entered the same cycle, since
/// controller point 5 does not hold workers together. Publishing before
/// waiting lets workers packed exactly d_min rows apart advance in lockstep.
class RowGate {
 public:
  RowGate(const ErGeometry& geometry, std::int32_t y_env)
      : first_row_(geometry.first_row), d_min_(geometry.d_min), y_env_(y_env),
        workers_(static_cast<std::uint32_t>(geometry.ranges.size())),
        marks_(std::make_unique<Mark[]>(workers_)) {
    for (std::uint32_t i = 0; i < workers_; ++i) marks_[i].value.store(-1);
  }

  void enter_cycle(std::uint32_t worker, std::int64_t cycle) { publish(worker, cycle, first_row_[worker]); }

  // Blocks until `worker` may process `row` of `cycle`, then publishes it.
  void acquire_row(std::uint32_t worker, std::int64_t cycle, std::int32_t row) {
    publish(worker, cycle, row);
    if (workers_ > 1) {
      const std::uint32_t pred = (worker + workers_ - 1) % workers_;
      const std::uint32_t succ = (worker + 1) % workers_;
      const std::int64_t base = cycle * kStride;
      wait_until(pred, [&](std::int64_t m) { return m >= base; });
      const std::int64_t need = std::int64_t{row} + d_min_;
      const std::int64_t wrap = succ == 0 ? y_env_ : 0;
      wait_until(succ, [&](std::int64_t m) {
        if (m < base) return false;
        const std::int64_t pos = m - base;
        return pos == kFinished || pos + wrap >= need;
      });
    }
  }

  void finish_cycle(std::uint32_t worker, std::int64_t cycle) { publish(worker, cycle, kFinished); }

  void cancel() {
    cancelled_.store(true, std::memory_order_release);
    for (std::uint32_t i = 0; i < workers_; ++i) {
      marks_[i].value.store(std::numeric_limits<std::int64_t>::max());
      marks_[i].value.notify_all();
    }
  }

  std::int32_t d_min() const { return d_min_; }

 private:
  static constexpr std::int64_t kStride = std::int64_t{1} << 32;
  static constexpr std::int64_t kFinished = kStride - 1;

  struct alignas(64) Mark {
    std::atomic<std::int64_t> value;
  };

  void publish(std::uint32_t worker, std::int64_t cycle, std::int64_t pos) {
    if (cancelled_.load(std::memory_order_acquire)) throw run_cancelled();
    marks_[worker].value.store(cycle * kStride + pos, std::memory_order_release);
    marks_[worker].value.notify_all();
  }

  template <class Pred>
  void wait_until(std::uint32_t other, Pred ok) {
    std::int64_t m = marks_[other].value.load(std::memory_order_acquire);
    while (!ok(m)) {
      if (cancelled_.load(std::memory_order_acquire)) throw run_cancelled();
      marks_[other].value.wait(m, std::memory_order_acquire);
      m = marks_[other].value.load(std::memory_order_acquire);
    }
    if (cancelled_.load(std::memory_order_acquire)) throw run_cancelled();
  }

  std::vector<std::int32_t> first_row_;
  std::int32_t d_min_;
  std::int32_t y_env_;
  std::uint32_t workers_;
  std::unique_ptr<Mark[]> marks_;
  std::atomic<bool> cancelled_{false};
};

/// Hands out one grid row at a time, passing each through the row gate.
class RowSyncWorkProvider final : public WorkProvider {
 public:
  RowSyncWorkProvider(std::int32_t x_env, std::int32_t y_env, std::uint32_t workers, std::int32_t radius = 1)
      : x_env_(x_env), geometry_(er_geometry(x_env, y_env, workers, radius)), gate_(geometry_, y_env) {}

  void begin_cycle(WorkCursor& c) override {
    WorkProvider::begin_cycle(c);
    gate_.enter_cycle(c.worker, c.cycle);
  }

  TokenRange next(WorkCursor& c) override {
    if (c.step < 0) return TokenRange::end_of_cycle();
    const std::int32_t row = geometry_.first_row[c.worker] + static_cast<std::int32_t>(c.step);
    if (row >= geometry_.first_row[c.worker + 1]) {
      gate_.finish_cycle(c.worker, c.cycle);
      c.step = -1;
      return TokenRange::end_of_cycle();
    }
    ++c.step;
    gate_.acquire_row(c.worker, c.cycle, row);
    return {std::int64_t{row} * x_env_, std::int64_t{row + 1} * x_env_};
  }

  void cancel() override { gate_.cancel(); }

  std::int64_t total() const override { return std::int64_t{x_env_} * (geometry_.first_row.back()); }
  const ErGeometry& geometry() const { return geometry_; }

 private:
  std::int32_t x_env_;
  ErGeometry geometry_;
  RowGate gate_;
};

}  // namespace pphpc
