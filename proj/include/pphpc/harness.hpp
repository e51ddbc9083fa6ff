#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pphpc/config.hpp"
#include "pphpc/csv.hpp"
#include "pphpc/prng.hpp"
#include "pphpc/scheduling.hpp"
#include "pphpc/simulation.hpp"
#include "pphpc/stats.hpp"

namespace pphpc {

// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitConfigRefused = 3,
  kExitRuntimeFailure = 4,
};

struct RunSpec {
  StrategyConfig strategy;
  SizeParams size = size_preset(100);
  DynamicsParams dynamics = dynamics_preset(1);
  int size_label = 100;  // 0 when the grid was given explicitly
  int params_set = 1;    // 0 when dynamics were given explicitly
  std::uint64_t replication = 1;
  std::optional<Seed128> seed;  // overrides the replication seed
  std::string out_path;

  GlobalSeed global_seed() const { return seed ? GlobalSeed{*seed} : derive_replication_seed(replication); }

  std::string variant() const { return to_string(strategy.kind); }

  void validate() const {
    SimConfig{size, dynamics}.validate();
    strategy.validate(size);
  }
};

struct BenchResult {
  RunSpec spec;
  GlobalSeed seed;
  double wall_seconds = 0;
  std::string series_path;
  OutputSeries series;
};

/// One full simulation; writes the series CSV when the spec names a path.
inline BenchResult run_single(const RunSpec& spec) {
  spec.validate();
  BenchResult r;
  r.spec = spec;
  r.seed = spec.global_seed();
  Simulation sim(SimConfig{spec.size, spec.dynamics}, spec.strategy, r.seed);
  RunResult run = sim.run();
  r.wall_seconds = run.wall_seconds;
  r.series = std::move(run.series);
  if (!spec.out_path.empty()) {
    const std::filesystem::path p(spec.out_path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    write_series_file(spec.out_path, r.series);
    r.series_path = spec.out_path;
  }
  return r;
}

/// Speedup of a run taking `parallel_seconds` against a reference time.
inline double speedup(double reference_seconds, double parallel_seconds) {
  if (!(parallel_seconds > 0)) throw std::invalid_argument("speedup: parallel time must be positive");
  return reference_seconds / parallel_seconds;
}

// ---------------------------------------------------------------------------
// Replication matrix

struct MatrixRun {
  std::string variant;
  int size = 0;
  int params = 0;
  std::uint32_t workers = 0;
  std::int64_t block = 0;
  std::uint64_t rep = 0;
  std::string seed_hex;
  double time_s = 0;
  bool failed = false;
  std::string error;
  std::string series_path;
};

struct MatrixSummary {
  std::string variant;
  int size = 0;
  int params = 0;
  std::uint32_t workers = 0;
  std::int64_t block = 0;
  std::size_t runs = 0;
  std::size_t failed = 0;
  double mean_time_s = 0;
  std::optional<double> rsd_percent;  // undefined for a single run
};

inline std::string matrix_cell_name(const RunSpec& s) {
  std::ostringstream o;
  o << s.variant() << "_s" << s.size_label << "_p" << s.params_set << "_w" << s.strategy.workers << "_b"
    << s.strategy.block;
  return o.str();
}

inline MatrixSummary summarize_cell(const std::vector<MatrixRun>& runs) {
  MatrixSummary s;
  if (runs.empty()) return s;
  const MatrixRun& f = runs.front();
  s.variant = f.variant;
  s.size = f.size;
  s.params = f.params;
  s.workers = f.workers;
  s.block = f.block;
  s.runs = runs.size();
  std::vector<double> t;
  for (const auto& r : runs) {
    if (r.failed) ++s.failed;
    else t.push_back(r.time_s);
  }
  if (!t.empty()) {
    double sum = 0;
    for (double v : t) sum += v;
    s.mean_time_s = sum / static_cast<double>(t.size());
  }
  if (t.size() > 1) {
    double ss = 0;
    for (double v : t) ss += (v - s.mean_time_s) * (v - s.mean_time_s);
    s.rsd_percent = 100.0 * std::sqrt(ss / static_cast<double>(t.size() - 1)) / s.mean_time_s;
  }
  return s;
}

struct MatrixReport {
  std::vector<MatrixRun> runs;
  std::vector<MatrixSummary> summary;
  bool any_failed() const {
    return std::any_of(runs.begin(), runs.end(), [](const MatrixRun& r) { return r.failed; });
  }
};

inline void write_runs_csv(std::ostream& out, const std::vector<MatrixRun>& runs) {
  out << "variant,size,params,workers,block,rep,seed,time_s\n";
  char t[64];
  for (const auto& r : runs) {
    if (r.failed) std::snprintf(t, sizeof t, "FAILED");
    else std::snprintf(t, sizeof t, "%.6f", r.time_s);
    out << r.variant << ',' << r.size << ',' << r.params << ',' << r.workers << ',' << r.block << ',' << r.rep << ','
        << r.seed_hex << ',' << t << '\n';
  }
}

inline void write_summary_csv(std::ostream& out, const std::vector<MatrixSummary>& summary) {
  out << "variant,size,params,workers,block,runs,failed,mean_time_s,rsd_pct\n";
  char t[64], s[64];
  for (const auto& c : summary) {
    std::snprintf(t, sizeof t, "%.6f", c.mean_time_s);
    if (c.rsd_percent) std::snprintf(s, sizeof s, "%.3f", *c.rsd_percent);
    else s[0] = '\0';
    out << c.variant << ',' << c.size << ',' << c.params << ',' << c.workers << ',' << c.block << ',' << c.runs << ','
        << c.failed << ',' << t << ',' << s << '\n';
  }
}

/// Run each spec of `grid` for replications 1..R, one simulation at a time.
/// Series land in `out_dir/<cell>/rep<r>.csv`; `runs.csv` and `summary.csv`
/// are written to `out_dir` when it is non-empty.
inline MatrixReport run_matrix(const std::vector<RunSpec>& grid, std::uint64_t replications,
                               const std::string& out_dir, std::ostream* log = nullptr) {
  if (replications < 1) throw std::invalid_argument("run_matrix: at least one replication is required");
  MatrixReport report;
  for (const RunSpec& base : grid) {
    std::vector<MatrixRun> cell_runs;
    for (std::uint64_t rep = 1; rep <= replications; ++rep) {
      RunSpec spec = base;
      spec.replication = rep;
      spec.seed.reset();
      spec.out_path = out_dir.empty() ? std::string()
                                      : (std::filesystem::path(out_dir) / matrix_cell_name(base) /
                                         ("rep" + std::to_string(rep) + ".csv"))
                                            .string();
      MatrixRun row;
      row.variant = spec.variant();
      row.size = spec.size_label;
      row.params = spec.params_set;
      row.workers = spec.strategy.workers;
      row.block = spec.strategy.block;
      row.rep = rep;
      row.seed_hex = spec.global_seed().value.to_hex();
      try {
        const BenchResult r = run_single(spec);
        row.time_s = r.wall_seconds;
        row.series_path = r.series_path;
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
      }
      if (log) {
        *log << matrix_cell_name(base) << " rep " << rep << ": "
             << (row.failed ? "FAILED (" + row.error + ")" : std::to_string(row.time_s) + " s") << '\n';
      }
      cell_runs.push_back(row);
      report.runs.push_back(row);
    }
    report.summary.push_back(summarize_cell(cell_runs));
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream runs(std::filesystem::path(out_dir) / "runs.csv");
    write_runs_csv(runs, report.runs);
    std::ofstream summary(std::filesystem::path(out_dir) / "summary.csv");
    write_summary_csv(summary, report.summary);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Cross-variant comparison

struct ComparisonRow {
  std::size_t output = 0;
  Statistic statistic = Statistic::Max;
  double h = 0;
  double p = 1;

  std::string flag() const { return p < 0.01 ? "**" : (p < 0.05 ? "*" : ""); }
};

/// Kruskal-Wallis over each of the 36 focal measures, one group per variant.
inline std::vector<ComparisonRow> compare_variants(const std::map<std::string, std::vector<FocalMeasures>>& samples) {
  if (samples.size() < 2) throw std::invalid_argument("compare_variants: need at least two variants");
  std::optional<std::int32_t> cutoff;
  for (const auto& [name, reps] : samples) {
    if (reps.size() < 2)
      throw std::invalid_argument("compare_variants: variant '" + name + "' has fewer than two replications");
    for (const auto& fm : reps) {
      if (cutoff && *cutoff != fm.cutoff)
        throw std::invalid_argument("compare_variants: focal measures use different steady-state cutoffs");
      cutoff = fm.cutoff;
    }
  }
  std::vector<ComparisonRow> rows;
  for (std::size_t idx = 0; idx < kFocalMeasures; ++idx) {
    std::vector<std::vector<double>> groups;
    for (const auto& [name, reps] : samples) {
      std::vector<double> g;
      for (const auto& fm : reps) g.push_back(fm.at(idx));
      groups.push_back(std::move(g));
    }
    const KruskalWallisResult kw = kruskal_wallis(groups);
    rows.push_back({idx / kStatistics, static_cast<Statistic>(idx % kStatistics), kw.h, kw.p});
  }
  return rows;
}

inline void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  out << "output,statistic,p_value,flag\n";
  char p[64];
  for (const auto& r : rows) {
    std::snprintf(p, sizeof p, "%.10g", r.p);
    out << kOutputNames[r.output] << ',' << kStatisticNames[static_cast<std::size_t>(r.statistic)] << ',' << p << ','
        << r.flag() << '\n';
  }
}

/// Focal measures of every *.csv series in `dir` (sorted by name).
inline std::vector<FocalMeasures> load_focal_measures(const std::string& dir, std::int32_t cutoff) {
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no series CSV files in '" + dir + "'");
  std::vector<FocalMeasures> out;
  for (const auto& f : files) out.push_back(focal_measures(read_series_file(f), cutoff));
  return out;
}

// ---------------------------------------------------------------------------
// Reproducibility

inline bool reproducible_by_design(Strategy s) {
  return s == Strategy::ST || s == Strategy::EX || s == Strategy::ER;
}

struct ReproReport {
  Strategy strategy = Strategy::ST;
  std::size_t repeats = 0;
  bool identical = false;
  bool guaranteed = false;
  std::vector<std::string> csv;

  // Strategies without a reproducibility guarantee never fail the check.
  bool passed() const { return identical || !guaranteed; }
};

inline ReproReport check_reproducibility(RunSpec spec, std::size_t repeats) {
  if (repeats < 2) throw std::invalid_argument("check_reproducibility: need at least two repeats");
  ReproReport rep;
  rep.strategy = spec.strategy.kind;
  rep.repeats = repeats;
  rep.guaranteed = reproducible_by_design(spec.strategy.kind);
  spec.out_path.clear();
  for (std::size_t i = 0; i < repeats; ++i) rep.csv.push_back(series_to_csv(run_single(spec).series));
  rep.identical = std::all_of(rep.csv.begin(), rep.csv.end(), [&](const std::string& c) { return c == rep.csv[0]; });
  return rep;
}

}  // namespace pphpc
