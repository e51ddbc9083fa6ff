#pragma once

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pphpc/model.hpp"

namespace pphpc {

// Integer sums gathered from cells; means are formed only at finalization so
// merge order cannot change the result.
struct StatsAccumulator {
  std::int64_t prey = 0;
  std::int64_t predators = 0;
  std::int64_t food = 0;
  std::int64_t energy_prey = 0;
  std::int64_t energy_predators = 0;
  std::int64_t countdown = 0;

  StatsAccumulator& operator+=(const StatsAccumulator& o) {
    prey += o.prey;
    predators += o.predators;
    food += o.food;
    energy_prey += o.energy_prey;
    energy_predators += o.energy_predators;
    countdown += o.countdown;
    return *this;
  }

  friend bool operator==(const StatsAccumulator&, const StatsAccumulator&) = default;
};

/// Tally one cell. Only agents that have not yet moved past iteration `iter`
/// are counted, so a concurrent move into the cell does not count twice.
inline void collect_cell(const Cell& cell, StatsAccumulator& acc, std::int32_t iter = INT32_MAX) {
  for (const Agent& a : cell.agents) {
    if (!a.alive || a.last_moved_iter > iter) continue;
    if (a.kind == AgentKind::Prey) {
      ++acc.prey;
      acc.energy_prey += a.energy;
    } else {
      ++acc.predators;
      acc.energy_predators += a.energy;
    }
  }
  if (cell.countdown == 0) ++acc.food;
  acc.countdown += cell.countdown;
}

inline constexpr std::size_t kOutputs = 6;

struct OutputRecord {
  std::int64_t prey = 0;
  std::int64_t predators = 0;
  std::int64_t food = 0;
  double mean_energy_prey = 0.0;
  double mean_energy_predators = 0.0;
  double mean_countdown = 0.0;

  double value(std::size_t output) const {
    switch (output) {
      case 0: return static_cast<double>(prey);
      case 1: return static_cast<double>(predators);
      case 2: return static_cast<double>(food);
      case 3: return mean_energy_prey;
      case 4: return mean_energy_predators;
      case 5: return mean_countdown;
    }
    throw std::out_of_range("output index must be in 0..5");
  }

  friend bool operator==(const OutputRecord&, const OutputRecord&) = default;
};

inline constexpr std::array<const char*, kOutputs> kOutputNames{
    "sheep", "wolves", "grass", "mean_energy_sheep", "mean_energy_wolves", "mean_countdown"};

/// Merge worker partials into the iteration's record. Mean energy of an
/// empty population is 0.
inline OutputRecord merge_and_finalize(std::span<const StatsAccumulator> partials, std::int64_t cells) {
  StatsAccumulator total;
  for (const auto& p : partials) total += p;
  OutputRecord r;
  r.prey = total.prey;
  r.predators = total.predators;
  r.food = total.food;
  r.mean_energy_prey = total.prey > 0 ? static_cast<double>(total.energy_prey) / static_cast<double>(total.prey) : 0.0;
  r.mean_energy_predators = total.predators > 0 ? static_cast<double>(total.energy_predators) /
                                                      static_cast<double>(total.predators)
                                                : 0.0;
  r.mean_countdown = cells > 0 ? static_cast<double>(total.countdown) / static_cast<double>(cells) : 0.0;
  return r;
}

// Records for iterations 0..m.
struct OutputSeries {
  std::vector<OutputRecord> records;

  std::int32_t last_iteration() const { return static_cast<std::int32_t>(records.size()) - 1; }
  friend bool operator==(const OutputSeries&, const OutputSeries&) = default;
};

// ---------------------------------------------------------------------------
// Focal measures

enum class Statistic : std::uint8_t { Max, ArgMax, Min, ArgMin, SteadyMean, SteadyStd };
inline constexpr std::size_t kStatistics = 6;
inline constexpr std::size_t kFocalMeasures = kOutputs * kStatistics;
inline constexpr std::array<const char*, kStatistics> kStatisticNames{"max", "argmax", "min", "argmin", "mean_ss",
                                                                      "std_ss"};

struct SeriesSummary {
  double max = 0;
  std::int32_t argmax = 0;
  double min = 0;
  std::int32_t argmin = 0;
  double steady_mean = 0;
  double steady_std = 0;

  double get(Statistic s) const {
    switch (s) {
      case Statistic::Max: return max;
      case Statistic::ArgMax: return argmax;
      case Statistic::Min: return min;
      case Statistic::ArgMin: return argmin;
      case Statistic::SteadyMean: return steady_mean;
      case Statistic::SteadyStd: return steady_std;
    }
    return 0;
  }
};

/// Six summaries of one output series X_0..X_m. Extremum ties resolve to
/// the earliest iteration; the steady-state window is l+1..m and the
/// standard deviation uses the m-l-1 divisor.
inline SeriesSummary summarize(std::span<const double> x, std::int32_t cutoff) {
  const std::int32_t m = static_cast<std::int32_t>(x.size()) - 1;
  if (m < 0) throw std::invalid_argument("summarize: empty series");
  if (cutoff < 0 || cutoff >= m)
    throw std::out_of_range("steady-state cutoff " + std::to_string(cutoff) + " must be in [0, " + std::to_string(m) + ")");
  SeriesSummary s;
  s.max = s.min = x[0];
  for (std::int32_t i = 1; i <= m; ++i) {
    if (x[i] > s.max) {
      s.max = x[i];
      s.argmax = i;
    }
    if (x[i] < s.min) {
      s.min = x[i];
      s.argmin = i;
    }
  }
  const std::int32_t n = m - cutoff;
  double sum = 0;
  for (std::int32_t i = cutoff + 1; i <= m; ++i) sum += x[i];
  s.steady_mean = sum / n;
  if (n > 1) {
    double ss = 0;
    for (std::int32_t i = cutoff + 1; i <= m; ++i) ss += (x[i] - s.steady_mean) * (x[i] - s.steady_mean);
    s.steady_std = std::sqrt(ss / (n - 1));
  } else {
    s.steady_std = std::nan("");
  }
  return s;
}

struct FocalMeasures {
  std::int32_t cutoff = 0;
  std::array<SeriesSummary, kOutputs> outputs{};

  double get(std::size_t output, Statistic s) const { return outputs.at(output).get(s); }
  // Flattened as output-major, statistic-minor (36 values).
  double at(std::size_t index) const {
    return get(index / kStatistics, static_cast<Statistic>(index % kStatistics));
  }
};

inline FocalMeasures focal_measures(const OutputSeries& series, std::int32_t cutoff) {
  FocalMeasures fm;
  fm.cutoff = cutoff;
  std::vector<double> x(series.records.size());
  for (std::size_t o = 0; o < kOutputs; ++o) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = series.records[i].value(o);
    fm.outputs[o] = summarize(x, cutoff);
  }
  return fm;
}

// ---------------------------------------------------------------------------
// Kruskal-Wallis

/// Upper tail of the chi-square distribution, Q(df/2, x/2).
inline double chi_square_sf(double x, double df) {
  if (!(df > 0)) throw std::invalid_argument("chi_square_sf: df must be positive");
  if (x <= 0) return 1.0;
  return boost::math::gamma_q(df / 2.0, x / 2.0);
}

struct KruskalWallisResult {
  double h = 0;
  double p = 1;
};

/// Kruskal-Wallis H test with mid-ranks and the tie-correction divisor.
/// Fully tied input yields H = 0, p = 1.
inline KruskalWallisResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw std::invalid_argument("kruskal_wallis: need at least two groups");
  struct Obs {
    double value;
    std::size_t group;
  };
  std::vector<Obs> pooled;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw std::invalid_argument("kruskal_wallis: group " + std::to_string(g) + " is empty");
    for (double v : groups[g]) {
      if (std::isnan(v)) throw std::invalid_argument("kruskal_wallis: NaN observation");
      pooled.push_back({v, g});
    }
  }
  std::sort(pooled.begin(), pooled.end(), [](const Obs& a, const Obs& b) { return a.value < b.value; });

  const double n = static_cast<double>(pooled.size());
  std::vector<double> rank_sum(groups.size(), 0.0);
  double tie_term = 0;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].value == pooled[i].value) ++j;
    const double t = static_cast<double>(j - i);
    const double mid = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;
    for (std::size_t k = i; k < j; ++k) rank_sum[pooled[k].group] += mid;
    tie_term += t * t * t - t;
    i = j;
  }
  const double correction = 1.0 - tie_term / (n * n * n - n);
  if (correction <= 0) return {0.0, 1.0};

  // Deviation form: exactly zero when every group has the pooled mean rank.
  const double mean_rank = (n + 1) / 2.0;
  double h = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double size = static_cast<double>(groups[g].size());
    const double dev = rank_sum[g] / size - mean_rank;
    h += size * dev * dev;
  }
  h = 12.0 / (n * (n + 1)) * h / correction;
  return {h, chi_square_sf(h, static_cast<double>(groups.size() - 1))};
}

}  // namespace pphpc
