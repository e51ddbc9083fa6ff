#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "pphpc/config.hpp"
#include "pphpc/model.hpp"
#include "pphpc/prng.hpp"
#include "pphpc/scheduling.hpp"
#include "pphpc/stats.hpp"

namespace pphpc {

struct RunOptions {
  // Count how many times each cell token is processed across all
  // environment-parallel cycles (test builds).
  bool audit_tokens = false;
  // Test hook: called by each worker at the start of every iteration.
  std::function<void(std::uint32_t worker, std::int32_t iter)> on_iteration;
};

struct RunResult {
  OutputSeries series;
  double wall_seconds = 0;
};

/// One PPHPC simulation under a parallelization strategy. `Generator` is the
/// per-worker random stream; it must be constructible from a WorkerSeed and
/// usable with draw().
template <class Generator = MersenneTwister>
class BasicSimulation {
 public:
  BasicSimulation(SimConfig config, StrategyConfig strategy, GlobalSeed seed, RunOptions options = {})
      : config_(config), strategy_(strategy), seed_(seed), options_(std::move(options)),
        policy_(SyncPolicy::for_strategy(strategy.kind)) {
    config_.validate();
    strategy_.validate(config_.size);
    if (config_.size.init_prey > 0 && config_.dynamics.gain_prey < 1)
      throw config_error("prey gain must be >= 1 when prey are created (initial energy range 1..2g is empty)");
    if (config_.size.init_predators > 0 && config_.dynamics.gain_predator < 1)
      throw config_error("predator gain must be >= 1 when predators are created (initial energy range 1..2g is empty)");
  }

  BasicSimulation(const BasicSimulation&) = delete;
  BasicSimulation& operator=(const BasicSimulation&) = delete;

  /// Execute the whole run. Wall time covers worker start to the final join.
  RunResult run() {
    if (ran_) throw std::logic_error("simulation already ran");
    ran_ = true;
    setup();

    const auto start = std::chrono::steady_clock::now();
    const std::uint32_t n = strategy_.workers;
    if (strategy_.kind == Strategy::ST) {
      run_worker(*workers_[0]);
    } else {
      std::vector<std::thread> threads;
      threads.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) threads.emplace_back([this, i] { run_worker(*workers_[i]); });
      for (auto& t : threads) t.join();
    }
    const auto stop = std::chrono::steady_clock::now();

    if (first_error_) std::rethrow_exception(first_error_);

    RunResult result;
    result.wall_seconds = std::chrono::duration<double>(stop - start).count();
    result.series.records.reserve(raw_.size());
    for (const auto& acc : raw_)
      result.series.records.push_back(merge_and_finalize(std::span(&acc, 1), env_->size()));
    return result;
  }

  const Environment& environment() const { return *env_; }
  const SimConfig& config() const { return config_; }
  const StrategyConfig& strategy() const { return strategy_; }
  const Controller& controller() const { return *controller_; }
  const Generator& generator(std::uint32_t worker) const { return workers_.at(worker)->rng; }

  // Per-token processing counts when RunOptions::audit_tokens is set.
  std::vector<std::uint32_t> token_audit() const {
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < audit_size_; ++i) out.push_back(audit_[i].load());
    return out;
  }
  // Number of environment-parallel cycles each worker runs.
  std::int64_t ep_cycles() const { return 3 + 2 * std::int64_t{config_.size.iterations}; }

 private:
  struct Worker {
    Worker(std::uint32_t index, const GlobalSeed& seed) : index(index), rng(derive_worker_seed(seed, index)), ids(index) {
      cells.worker = prey.worker = predators.worker = index;
    }
    std::uint32_t index;
    Generator rng;
    IdSource ids;
    WorkCursor cells, prey, predators;
    std::vector<Agent> movers;
  };

  void setup() {
    const auto& size = config_.size;
    env_ = std::make_unique<Environment>(size.x_env, size.y_env);
    raw_.assign(static_cast<std::size_t>(size.iterations) + 1, StatsAccumulator{});
    controller_ = std::make_unique<Controller>(policy_, strategy_.workers);
    const std::uint32_t n = strategy_.workers;
    const std::int64_t t = env_->size();
    switch (strategy_.kind) {
      case Strategy::ST:
      case Strategy::EQ:
      case Strategy::EX:
        cell_work_ = std::make_unique<EqualWorkProvider>(t, n);
        prey_work_ = std::make_unique<EqualWorkProvider>(size.init_prey, n);
        predator_work_ = std::make_unique<EqualWorkProvider>(size.init_predators, n);
        break;
      case Strategy::ER:
        cell_work_ = std::make_unique<RowSyncWorkProvider>(size.x_env, size.y_env, n, strategy_.radius);
        prey_work_ = std::make_unique<EqualWorkProvider>(size.init_prey, n);
        predator_work_ = std::make_unique<EqualWorkProvider>(size.init_predators, n);
        break;
      case Strategy::OD:
        cell_work_ = std::make_unique<OnDemandWorkProvider>(t, strategy_.block);
        prey_work_ = std::make_unique<OnDemandWorkProvider>(size.init_prey, strategy_.block);
        predator_work_ = std::make_unique<OnDemandWorkProvider>(size.init_predators, strategy_.block);
        break;
    }
    for (std::uint32_t i = 0; i < n; ++i) workers_.push_back(std::make_unique<Worker>(i, seed_));
    if (options_.audit_tokens) {
      audit_size_ = static_cast<std::size_t>(t);
      audit_ = std::make_unique<std::atomic<std::uint32_t>[]>(audit_size_);
    }
  }

  // Run `body(token)` over every token the provider issues this cycle.
  template <class Body>
  void for_each_token(WorkProvider& provider, WorkCursor& cursor, Body&& body, bool audit = false) {
    provider.begin_cycle(cursor);
    for (TokenRange r = provider.next(cursor); !r.is_end(); r = provider.next(cursor)) {
      for (std::int64_t t = r.begin; t < r.end; ++t) {
        if (audit) audit_[t].fetch_add(1, std::memory_order_relaxed);
        body(t);
      }
    }
  }

  template <class Body>
  void for_each_cell(Worker& w, Body&& body) {
    for_each_token(*cell_work_, w.cells, std::forward<Body>(body), options_.audit_tokens);
  }

  void merge(std::int32_t iter, const StatsAccumulator& acc) {
    if (strategy_.kind == Strategy::ST) {
      raw_[iter] += acc;
      return;
    }
    std::lock_guard lock(stats_mutex_);
    raw_[iter] += acc;
  }

  // Move every agent that has not moved yet this iteration, then grow food.
  void move_and_grow(Worker& w, std::int64_t token, std::int32_t iter) {
    const DynamicsParams& params = config_.dynamics;
    Cell& cell = env_->cell(token);
    const CellSync sync = policy_.move;
    auto& movers = w.movers;
    movers.clear();
    {
      if (sync != CellSync::None) env_->lock(token).lock();
      auto keep = cell.agents.begin();
      for (auto it = cell.agents.begin(); it != cell.agents.end(); ++it) {
        if (it->last_moved_iter < iter) movers.push_back(std::move(*it));
        else *keep++ = std::move(*it);
      }
      cell.agents.erase(keep, cell.agents.end());
      if (sync != CellSync::None) env_->lock(token).unlock();
    }
    std::uint32_t index = 0;
    for (Agent& a : movers) {
      const auto dest = move_agent(a, cell, iter, w.rng, params);
      if (!dest) continue;
      a.key = {static_cast<std::uint32_t>(iter), static_cast<std::uint32_t>(token), index++};
      insert_agent(*env_, *dest, std::move(a), sync);
    }
    grow_food(cell);
  }

  void run_worker(Worker& w) {
    try {
      work(w);
    } catch (const run_cancelled&) {
      // Another worker failed first.
    } catch (...) {
      {
        std::lock_guard lock(error_mutex_);
        if (!first_error_) {
          try {
            throw;
          } catch (const std::exception& e) {
            first_error_ = std::make_exception_ptr(
                std::runtime_error("worker " + std::to_string(w.index) + " failed: " + e.what()));
          } catch (...) {
            first_error_ = std::make_exception_ptr(
                std::runtime_error("worker " + std::to_string(w.index) + " failed with an unknown error"));
          }
        }
      }
      controller_->cancel();
      cell_work_->cancel();
    }
  }

  void work(Worker& w) {
    const DynamicsParams& params = config_.dynamics;
    Controller& ctl = *controller_;
    const std::int32_t m = config_.size.iterations;

    ctl.sync(1);
    for_each_cell(w, [&](std::int64_t t) { init_cell(*env_, t, w.rng, params); });
    ctl.sync(2);
    for_each_cell(w, [&](std::int64_t t) { env_->link_neighbors(t); });
    ctl.sync(3);
    for_each_token(*prey_work_, w.prey, [&](std::int64_t t) {
      place_initial_agent(*env_, AgentKind::Prey, t, w.rng, w.ids, params, policy_.init);
    });
    for_each_token(*predator_work_, w.predators, [&](std::int64_t t) {
      place_initial_agent(*env_, AgentKind::Predator, t, w.rng, w.ids, params, policy_.init);
    });
    ctl.sync(4);
    {
      // Point 5 may let neighbours start moving agents into cells that are
      // still being counted; take the insertion lock while reading.
      StatsAccumulator acc;
      const bool locked = policy_.move != CellSync::None;
      for_each_cell(w, [&](std::int64_t t) {
        if (locked) env_->lock(t).lock();
        collect_cell(env_->cell(t), acc, 0);
        if (locked) env_->lock(t).unlock();
      });
      merge(0, acc);
    }
    ctl.sync(5);
    for (std::int32_t iter = 1; iter <= m; ++iter) {
      if (options_.on_iteration) options_.on_iteration(w.index, iter);
      for_each_cell(w, [&](std::int64_t t) { move_and_grow(w, t, iter); });
      ctl.sync(6);
      StatsAccumulator acc;
      for_each_cell(w, [&](std::int64_t t) {
        Cell& c = env_->cell(t);
        act_cell(c, iter, w.rng, params, w.ids);
        collect_cell(c, acc, iter);
      });
      merge(iter, acc);
      ctl.sync(7);
    }
    ctl.sync(8);
  }

  SimConfig config_;
  StrategyConfig strategy_;
  GlobalSeed seed_;
  RunOptions options_;
  SyncPolicy policy_;
  bool ran_ = false;

  std::unique_ptr<Environment> env_;
  std::unique_ptr<Controller> controller_;
  std::unique_ptr<WorkProvider> cell_work_, prey_work_, predator_work_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::vector<StatsAccumulator> raw_;
  std::mutex stats_mutex_;
  std::mutex error_mutex_;
  std::exception_ptr first_error_;
  std::unique_ptr<std::atomic<std::uint32_t>[]> audit_;
  std::size_t audit_size_ = 0;
};

using Simulation = BasicSimulation<>;

}  // namespace pphpc
