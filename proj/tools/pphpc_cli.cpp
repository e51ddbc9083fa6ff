// Command-line front end: single runs, replication matrices, cross-variant
// comparison and reproducibility checks. Every result is written as CSV.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pphpc/pphpc.hpp"

namespace {

using namespace pphpc;

class usage_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flags shared by `run` and `check-repro`.
struct SpecOptions {
  std::string strategy = "st";
  std::uint32_t workers = 1;
  std::int64_t block = 500;
  int size = 100;
  std::vector<std::int32_t> grid;
  std::int64_t prey = -1;
  std::int64_t predators = -1;
  int params = 1;
  std::int32_t iters = kDefaultIterations;
  std::uint64_t rep = 1;
  std::string seed;
  std::string out;
  // Explicit dynamics overrides.
  std::optional<std::int32_t> gain_prey, gain_predator, loss_prey, loss_predator, threshold_prey,
      threshold_predator, prob_prey, prob_predator, restart;

  void attach(CLI::App* app) {
    app->add_option("--strategy", strategy, "Parallelization strategy")
        ->check(CLI::IsMember({"st", "eq", "ex", "er", "od"}, CLI::ignore_case));
    app->add_option("--workers", workers, "Number of worker threads")->check(CLI::PositiveNumber);
    app->add_option("--block", block, "OD block size")->check(CLI::PositiveNumber);
    auto* sz = app->add_option("--size", size, "Size preset")->check(CLI::IsMember({100, 200, 400, 800, 1600}));
    auto* gr = app->add_option("--grid", grid, "Explicit grid: X Y")->expected(2);
    gr->excludes(sz);
    app->add_option("--prey", prey, "Initial prey (with --grid)")->needs(gr);
    app->add_option("--predators", predators, "Initial predators (with --grid)")->needs(gr);
    app->add_option("--params", params, "Dynamics preset")->check(CLI::IsMember({1, 2}));
    app->add_option("--gain-prey", gain_prey);
    app->add_option("--gain-predator", gain_predator);
    app->add_option("--loss-prey", loss_prey);
    app->add_option("--loss-predator", loss_predator);
    app->add_option("--threshold-prey", threshold_prey);
    app->add_option("--threshold-predator", threshold_predator);
    app->add_option("--prob-prey", prob_prey);
    app->add_option("--prob-predator", prob_predator);
    app->add_option("--restart", restart);
    app->add_option("--iters", iters, "Iterations m")->check(CLI::PositiveNumber);
    auto* r = app->add_option("--rep", rep, "Replication number (seed = MD5 of its decimal form)");
    app->add_option("--seed", seed, "Explicit 128-bit hex seed")->excludes(r);
    app->add_option("--out", out, "Output series CSV path");
  }

  RunSpec build() const {
    RunSpec s;
    s.strategy.kind = parse_strategy(strategy);
    s.strategy.workers = workers;
    s.strategy.block = block;
    if (!grid.empty()) {
      if (prey < 0 || predators < 0) throw usage_error("--grid requires --prey and --predators");
      s.size = SizeParams{grid[0], grid[1], prey, predators, iters};
      s.size_label = 0;
    } else {
      s.size = size_preset(size, iters);
      s.size_label = size;
    }
    s.dynamics = dynamics_preset(params);
    s.params_set = params;
    auto set = [&](const std::optional<std::int32_t>& v, std::int32_t& field) {
      if (v) {
        field = *v;
        s.params_set = 0;
      }
    };
    set(gain_prey, s.dynamics.gain_prey);
    set(gain_predator, s.dynamics.gain_predator);
    set(loss_prey, s.dynamics.loss_prey);
    set(loss_predator, s.dynamics.loss_predator);
    set(threshold_prey, s.dynamics.repro_threshold_prey);
    set(threshold_predator, s.dynamics.repro_threshold_predator);
    set(prob_prey, s.dynamics.repro_prob_prey);
    set(prob_predator, s.dynamics.repro_prob_predator);
    set(restart, s.dynamics.cell_restart);
    s.replication = rep;
    if (!seed.empty()) {
      try {
        s.seed = Seed128::from_hex(seed);
      } catch (const std::invalid_argument& e) {
        throw usage_error(std::string("--seed: ") + e.what());
      }
    }
    s.out_path = out;
    return s;
  }
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) {
    try {
      out.push_back(static_cast<T>(std::stoll(item)));
    } catch (const std::exception&) {
      throw usage_error(std::string(flag) + ": '" + item + "' is not an integer");
    }
  }
  if (out.empty()) throw usage_error(std::string(flag) + ": empty list");
  return out;
}

constexpr std::int64_t kMaxTapeCells = 32 * 32;

int cmd_run(const SpecOptions& opts, const std::string& tape_path) {
  const RunSpec spec = opts.build();
  if (!tape_path.empty()) {
    spec.validate();
    if (spec.size.cells() > kMaxTapeCells) throw usage_error("--record-rng-tape is limited to grids of at most 32x32 cells");
    BasicSimulation<RecordingGenerator<>> sim(SimConfig{spec.size, spec.dynamics}, spec.strategy, spec.global_seed());
    RunResult r = sim.run();
    if (!spec.out_path.empty()) write_series_file(spec.out_path, r.series);
    std::ofstream tape(tape_path);
    tape << "worker,draw,bound,value\n";
    for (std::uint32_t w = 0; w < spec.strategy.workers; ++w) {
      const auto& t = sim.generator(w).tape();
      for (std::size_t i = 0; i < t.size(); ++i) tape << w << ',' << i << ',' << t[i].bound << ',' << t[i].value << '\n';
    }
    std::printf("time_s=%.6f seed=%s tape=%s\n", r.wall_seconds, spec.global_seed().value.to_hex().c_str(),
                tape_path.c_str());
    return kExitOk;
  }
  const BenchResult r = run_single(spec);
  if (spec.out_path.empty()) write_series(std::cout, r.series);
  std::fprintf(stderr, "strategy=%s workers=%u seed=%s time_s=%.6f\n", spec.variant().c_str(), spec.strategy.workers,
               r.seed.value.to_hex().c_str(), r.wall_seconds);
  return kExitOk;
}

struct MatrixOptions {
  std::string strategies = "st,eq,ex,er,od";
  std::string workers = "4";
  std::string blocks = "500";
  std::string sizes = "100";
  std::string params = "1,2";
  std::int32_t iters = kDefaultIterations;
  std::uint64_t reps = 10;
  std::string out_dir = "matrix_out";
  bool compare = false;
};

int cmd_matrix(const MatrixOptions& o) {
  std::vector<RunSpec> grid;
  const auto workers = parse_list<std::uint32_t>(o.workers, "--workers");
  const auto blocks = parse_list<std::int64_t>(o.blocks, "--blocks");
  const auto sizes = parse_list<int>(o.sizes, "--sizes");
  const auto params = parse_list<int>(o.params, "--params");
  std::vector<Strategy> strategies;
  for (const auto& s : split_list(o.strategies)) {
    try {
      strategies.push_back(parse_strategy(s));
    } catch (const std::invalid_argument& e) {
      throw usage_error(e.what());
    }
  }
  for (int size : sizes) {
    for (int p : params) {
      for (Strategy st : strategies) {
        const std::vector<std::uint32_t> ws = st == Strategy::ST ? std::vector<std::uint32_t>{1} : workers;
        const std::vector<std::int64_t> bs = st == Strategy::OD ? blocks : std::vector<std::int64_t>{0};
        for (std::uint32_t w : ws) {
          for (std::int64_t b : bs) {
            RunSpec s;
            s.strategy = StrategyConfig{st, w, b};
            s.size = size_preset(size, o.iters);
            s.size_label = size;
            s.dynamics = dynamics_preset(p);
            s.params_set = p;
            grid.push_back(s);
          }
        }
      }
    }
  }
  const MatrixReport report = run_matrix(grid, o.reps, o.out_dir, &std::cerr);
  write_summary_csv(std::cout, report.summary);

  if (o.compare) {
    for (int size : sizes) {
      for (int p : params) {
        std::map<std::string, std::vector<FocalMeasures>> samples;
        for (const RunSpec& s : grid) {
          if (s.size_label != size || s.params_set != p) continue;
          const std::string cell = matrix_cell_name(s);
          try {
            samples[cell] = load_focal_measures((std::filesystem::path(o.out_dir) / cell).string(),
                                                std::min(steady_state_cutoff(p), o.iters - 1));
          } catch (const std::exception& e) {
            std::cerr << "skipping " << cell << " in comparison: " << e.what() << '\n';
          }
        }
        if (samples.size() < 2 || o.reps < 2) continue;
        const auto rows = compare_variants(samples);
        const auto path = std::filesystem::path(o.out_dir) /
                          ("compare_s" + std::to_string(size) + "_p" + std::to_string(p) + ".csv");
        std::ofstream out(path);
        write_comparison_csv(out, rows);
        std::size_t below05 = 0, below01 = 0;
        for (const auto& r : rows) {
          below05 += r.p < 0.05;
          below01 += r.p < 0.01;
        }
        std::cerr << path.string() << ": " << below05 << "/36 p < 0.05, " << below01 << "/36 p < 0.01\n";
      }
    }
  }
  return report.any_failed() ? kExitRuntimeFailure : kExitOk;
}

int cmd_compare(const std::vector<std::string>& inputs, std::optional<std::int32_t> cutoff, int params,
                const std::string& out_path) {
  const std::int32_t l = cutoff ? *cutoff : steady_state_cutoff(params);
  std::map<std::string, std::vector<FocalMeasures>> samples;
  for (const auto& in : inputs) {
    const auto eq = in.find('=');
    if (eq == std::string::npos || eq == 0) throw usage_error("--input expects NAME=DIR, got '" + in + "'");
    samples[in.substr(0, eq)] = load_focal_measures(in.substr(eq + 1), l);
  }
  std::vector<ComparisonRow> rows;
  try {
    rows = compare_variants(samples);
  } catch (const std::invalid_argument& e) {
    throw usage_error(e.what());
  }
  if (out_path.empty()) {
    write_comparison_csv(std::cout, rows);
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open '" + out_path + "'");
    write_comparison_csv(out, rows);
  }
  return kExitOk;
}

int cmd_check_repro(const SpecOptions& opts, std::size_t repeats) {
  const ReproReport r = check_reproducibility(opts.build(), repeats);
  std::printf("strategy=%s repeats=%zu identical=%s guarantee=%s result=%s\n", to_string(r.strategy), r.repeats,
              r.identical ? "yes" : "no", r.guaranteed ? "reproducible" : "none",
              r.guaranteed ? (r.identical ? "PASS" : "FAIL") : "REPORT-ONLY");
  return r.passed() ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PPHPC predator-prey simulation: multithreaded strategies, benchmarks and validation"};
  app.require_subcommand(1);

  SpecOptions run_opts;
  std::string tape_path;
  auto* run = app.add_subcommand("run", "Run a single simulation");
  run_opts.attach(run);
  run->add_option("--record-rng-tape", tape_path, "Dump every random draw to this CSV (small grids only)");

  MatrixOptions mopts;
  auto* matrix = app.add_subcommand("matrix", "Run a replication matrix and summarize timings");
  matrix->add_option("--strategies", mopts.strategies, "Comma-separated strategies");
  matrix->add_option("--workers", mopts.workers, "Comma-separated worker counts");
  matrix->add_option("--blocks", mopts.blocks, "Comma-separated OD block sizes");
  matrix->add_option("--sizes", mopts.sizes, "Comma-separated size presets");
  matrix->add_option("--params", mopts.params, "Comma-separated dynamics presets");
  matrix->add_option("--iters", mopts.iters, "Iterations m")->check(CLI::PositiveNumber);
  matrix->add_option("--reps", mopts.reps, "Replications per cell")->check(CLI::PositiveNumber);
  matrix->add_option("--out-dir", mopts.out_dir, "Output directory");
  matrix->add_flag("--compare", mopts.compare, "Also compare variants per size and preset");

  std::vector<std::string> inputs;
  std::optional<std::int32_t> cutoff;
  int cmp_params = 1;
  std::string cmp_out;
  auto* compare = app.add_subcommand("compare", "Kruskal-Wallis comparison of focal measures across variants");
  compare->add_option("--input", inputs, "NAME=DIR with one series CSV per replication")->required();
  auto* co = compare->add_option("--cutoff", cutoff, "Steady-state cutoff l");
  compare->add_option("--params", cmp_params, "Preset whose cutoff to use")->check(CLI::IsMember({1, 2}))->excludes(co);
  compare->add_option("--out", cmp_out, "Comparison CSV path (default stdout)");

  SpecOptions repro_opts;
  std::size_t repeats = 3;
  auto* repro = app.add_subcommand("check-repro", "Run a spec repeatedly and compare outputs byte for byte");
  repro_opts.attach(repro);
  repro->add_option("--repeats", repeats, "Number of runs")->check(CLI::Range(2, 1000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) return cmd_run(run_opts, tape_path);
    if (*matrix) return cmd_matrix(mopts);
    if (*compare) return cmd_compare(inputs, cutoff, cmp_params, cmp_out);
    if (*repro) return cmd_check_repro(repro_opts, repeats);
  } catch (const usage_error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const config_error& e) {
    std::cerr << "configuration refused: " << e.what() << '\n';
    return kExitConfigRefused;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntimeFailure;
  }
  return kExitUsage;
}
