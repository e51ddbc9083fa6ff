#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pphpc/stats.hpp"

namespace pphpc {

inline constexpr const char* kSeriesHeader =
    "iter,sheep,wolves,grass,mean_energy_sheep,mean_energy_wolves,mean_countdown";

inline void write_series(std::ostream& out, const OutputSeries& series) {
  out << kSeriesHeader << '\n';
  char line[256];
  for (std::size_t i = 0; i < series.records.size(); ++i) {
    const OutputRecord& r = series.records[i];
    std::snprintf(line, sizeof line, "%zu,%lld,%lld,%lld,%.6f,%.6f,%.6f\n", i, static_cast<long long>(r.prey),
                  static_cast<long long>(r.predators), static_cast<long long>(r.food), r.mean_energy_prey,
                  r.mean_energy_predators, r.mean_countdown);
    out << line;
  }
}

inline std::string series_to_csv(const OutputSeries& series) {
  std::ostringstream out;
  write_series(out, series);
  return out.str();
}

inline void write_series_file(const std::string& path, const OutputSeries& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_series(out, series);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

/// Parse an OutputSeries CSV. Rows must be numbered 0, 1, 2, ... in order.
inline OutputSeries read_series(std::istream& in, const std::string& origin = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(origin + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSeriesHeader) throw std::runtime_error(origin + ": unexpected header '" + line + "'");
  OutputSeries s;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    long long iter, prey, wolves, grass;
    double ep, ew, mc;
    int consumed = 0;
    if (std::sscanf(line.c_str(), "%lld,%lld,%lld,%lld,%lf,%lf,%lf%n", &iter, &prey, &wolves, &grass, &ep, &ew, &mc,
                    &consumed) != 7 ||
        static_cast<std::size_t>(consumed) != line.size())
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": malformed row");
    if (iter != static_cast<long long>(s.records.size()))
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected iteration " +
                               std::to_string(s.records.size()));
    s.records.push_back({prey, wolves, grass, ep, ew, mc});
  }
  if (s.records.empty()) throw std::runtime_error(origin + ": no data rows");
  return s;
}

inline OutputSeries read_series_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_series(in, path);
}

}  // namespace pphpc
