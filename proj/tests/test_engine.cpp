#include <gtest/gtest.h>

#include <cstdlib>
#include <map>
#include <string>

#include "pphpc/csv.hpp"
#include "pphpc/simulation.hpp"
#include "replay_oracle.hpp"

using namespace pphpc;

namespace {

SizeParams grid(std::int32_t x, std::int32_t y, std::int64_t prey, std::int64_t predators, std::int32_t iters) {
  return SizeParams{x, y, prey, predators, iters};
}

std::string run_csv(Strategy s, std::uint32_t workers, std::int64_t block, const SizeParams& size, int set,
                    std::uint64_t rep = 1) {
  Simulation sim(SimConfig{size, dynamics_preset(set)}, StrategyConfig{s, workers, block},
                 derive_replication_seed(rep));
  return series_to_csv(sim.run().series);
}

}  // namespace

TEST(Replay, TinyGridMatchesIndependentReexecution) {
  for (std::uint64_t rep = 1; rep <= 20; ++rep)
    EXPECT_EQ(pphpc::testing::check_against_replay(grid(3, 3, 3, 2, 10), dynamics_preset(1), rep), "") << "rep " << rep;
}

TEST(Replay, LargerGridBothParameterSets) {
  for (int set : {1, 2})
    for (std::uint64_t rep = 1; rep <= 3; ++rep)
      EXPECT_EQ(pphpc::testing::check_against_replay(grid(7, 5, 14, 7, 60), dynamics_preset(set), rep), "")
          << "set " << set << " rep " << rep;
}

TEST(Replay, DetectsATamperedTape) {
  const SizeParams size = grid(3, 3, 3, 2, 5);
  BasicSimulation<RecordingGenerator<>> sim(SimConfig{size, dynamics_preset(1)}, StrategyConfig{},
                                            derive_replication_seed(1));
  sim.run();
  std::vector<TapeEntry> tape = sim.generator(0).tape();
  tape.pop_back();
  EXPECT_THROW(pphpc::testing::ReplayOracle(size, dynamics_preset(1), tape).run(), std::runtime_error);
}

TEST(Invariants, HoldEveryIterationUnderSt) {
  const SizeParams size = grid(20, 20, 40, 20, 300);
  const DynamicsParams params = dynamics_preset(1);
  const Simulation* view = nullptr;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::int64_t> last_pos;
  int violations = 0;
  RunOptions opts;
  opts.on_iteration = [&](std::uint32_t, std::int32_t iter) {
    const Environment& env = view->environment();
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::int64_t> pos;
    for (std::int64_t t = 0; t < env.size(); ++t) {
      const Cell& c = env.cell(t);
      if (c.countdown < 0 || c.countdown > params.cell_restart) ++violations;
      for (const Agent& a : c.agents) {
        if (!a.alive || a.energy < 1 || a.last_moved_iter >= iter) ++violations;
        pos[{a.id.worker, a.id.serial}] = t;
      }
    }
    for (const auto& [id, t] : pos) {
      auto it = last_pos.find(id);
      if (it == last_pos.end()) continue;
      const std::int64_t dx = std::abs(t % env.x_env() - it->second % env.x_env());
      const std::int64_t dy = std::abs(t / env.x_env() - it->second / env.x_env());
      const std::int64_t wx = std::min(dx, env.x_env() - dx), wy = std::min(dy, env.y_env() - dy);
      if (wx + wy > 1) ++violations;
    }
    last_pos = std::move(pos);
  };
  Simulation sim(SimConfig{size, params}, StrategyConfig{}, derive_replication_seed(4), opts);
  view = &sim;
  const OutputSeries s = sim.run().series;
  EXPECT_EQ(violations, 0);
  ASSERT_EQ(s.records.size(), 301u);
  for (const auto& r : s.records) {
    EXPECT_GE(r.mean_countdown, 0);
    EXPECT_LE(r.mean_countdown, params.cell_restart);
    EXPECT_LE(r.food, 400);
  }
}

TEST(Engine, InitialRecordMatchesPopulation) {
  Simulation sim(SimConfig{size_preset(100, 5), dynamics_preset(1)}, StrategyConfig{}, derive_replication_seed(1));
  const OutputSeries s = sim.run().series;
  ASSERT_EQ(s.records.size(), 6u);
  EXPECT_EQ(s.records[0].prey, 400);
  EXPECT_EQ(s.records[0].predators, 200);
  EXPECT_GE(s.records[0].mean_energy_prey, 1);
  EXPECT_LE(s.records[0].mean_energy_prey, 8);
  EXPECT_GE(s.records[0].mean_energy_predators, 1);
  EXPECT_LE(s.records[0].mean_energy_predators, 40);
}

TEST(Engine, TokenAuditEveryCellEveryCycle) {
  const SizeParams size = grid(30, 24, 60, 30, 40);
  for (Strategy s : kAllStrategies) {
    for (std::uint32_t n : {1u, 3u}) {
      if (s == Strategy::ST && n != 1) continue;
      RunOptions opts;
      opts.audit_tokens = true;
      Simulation sim(SimConfig{size, dynamics_preset(1)}, StrategyConfig{s, n, 37}, derive_replication_seed(2),
                     opts);
      sim.run();
      const auto audit = sim.token_audit();
      ASSERT_EQ(audit.size(), 720u);
      for (std::uint32_t c : audit) ASSERT_EQ(c, sim.ep_cycles()) << to_string(s) << " N=" << n;
    }
  }
}

TEST(Engine, SingleWorkerStrategiesMatchSt) {
  for (int set : {1, 2}) {
    const SizeParams size = size_preset(100, 150);
    const std::string ref = run_csv(Strategy::ST, 1, 0, size, set);
    EXPECT_EQ(run_csv(Strategy::EQ, 1, 0, size, set), ref) << "set " << set;
    EXPECT_EQ(run_csv(Strategy::EX, 1, 0, size, set), ref) << "set " << set;
    EXPECT_EQ(run_csv(Strategy::ER, 1, 0, size, set), ref) << "set " << set;
    EXPECT_EQ(run_csv(Strategy::OD, 1, 1, size, set), ref) << "set " << set;
    EXPECT_EQ(run_csv(Strategy::OD, 1, 500, size, set), ref) << "set " << set;
  }
}

TEST(Engine, ExAndErAreRunIndependent) {
  const SizeParams size = size_preset(100, 120);
  for (Strategy s : {Strategy::EX, Strategy::ER}) {
    const std::string first = run_csv(s, 4, 0, size, 1, 3);
    for (int i = 0; i < 2; ++i) EXPECT_EQ(run_csv(s, 4, 0, size, 1, 3), first) << to_string(s);
  }
}

TEST(Engine, MultiWorkerRunsConserveBasicAccounting) {
  const SizeParams size = size_preset(100, 60);
  for (Strategy s : {Strategy::EQ, Strategy::OD}) {
    Simulation sim(SimConfig{size, dynamics_preset(1)}, StrategyConfig{s, 4, 64}, derive_replication_seed(1));
    const OutputSeries out = sim.run().series;
    ASSERT_EQ(out.records.size(), 61u);
    EXPECT_EQ(out.records[0].prey, 400);
    EXPECT_EQ(out.records[0].predators, 200);
    std::int64_t prey = 0, predators = 0;
    for (const Cell& c : sim.environment().cells())
      for (const Agent& a : c.agents) (a.kind == AgentKind::Prey ? prey : predators)++;
    EXPECT_EQ(prey, out.records.back().prey);
    EXPECT_EQ(predators, out.records.back().predators);
  }
}

TEST(Engine, WorkerFailureStopsTheRun) {
  for (Strategy s : {Strategy::EQ, Strategy::EX, Strategy::ER, Strategy::OD}) {
    RunOptions opts;
    opts.on_iteration = [](std::uint32_t w, std::int32_t iter) {
      if (w == 1 && iter == 5) throw std::runtime_error("injected fault");
    };
    Simulation sim(SimConfig{size_preset(100, 50), dynamics_preset(1)}, StrategyConfig{s, 3, 100},
                   derive_replication_seed(1), opts);
    try {
      sim.run();
      FAIL() << "expected failure for " << to_string(s);
    } catch (const std::runtime_error& e) {
      EXPECT_EQ(std::string(e.what()), "worker 1 failed: injected fault") << to_string(s);
    }
  }
}

TEST(Engine, RejectsEmptyEnergyRange) {
  DynamicsParams p = dynamics_preset(1);
  p.gain_prey = 0;
  EXPECT_THROW(Simulation(SimConfig{size_preset(100, 5), p}, StrategyConfig{}, derive_replication_seed(1)),
               config_error);
  SizeParams no_prey = size_preset(100, 5);
  no_prey.init_prey = 0;
  EXPECT_NO_THROW(Simulation(SimConfig{no_prey, p}, StrategyConfig{}, derive_replication_seed(1)).run());
}

TEST(Engine, ErRefusesTooManyWorkers) {
  EXPECT_THROW(Simulation(SimConfig{size_preset(100, 5), dynamics_preset(1)}, StrategyConfig{Strategy::ER, 34},
                          derive_replication_seed(1)),
               config_error);
}
