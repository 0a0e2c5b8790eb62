#pragma once

// Demand traces: CSV `day,buyer_id,task_count`, one row per buyer per day.
// The first days of every buyer seed its history, later days drive the
// realized demand of successive transactions.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgemarket/stats.hpp"

namespace edgemarket::trace {

struct TraceRow {
  int day = 0;
  int buyer_id = 0;
  int task_count = 0;
  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct TraceData {
  std::vector<int> buyer_ids;                      // ascending
  std::vector<stats::EmpiricalDemand> histories;   // per buyer
  std::vector<std::vector<int>> realizations;      // per transaction, per buyer
};

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline bool parse_int(const std::string& s, int& out) {
  std::size_t pos = 0;
  try {
    out = std::stoi(s, &pos);
  } catch (const std::exception&) {
    return false;
  }
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  return pos == s.size();
}

}  // namespace detail

inline std::vector<TraceRow> parse_rows(std::istream& in, const std::string& name) {
  std::vector<TraceRow> rows;
  std::string line;
  int line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "day,buyer_id,task_count")
        throw TraceError(name + ":" + std::to_string(line_no) + ": expected header day,buyer_id,task_count");
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    TraceRow r;
    if (cells.size() != 3 || !detail::parse_int(cells[0], r.day) || !detail::parse_int(cells[1], r.buyer_id) ||
        !detail::parse_int(cells[2], r.task_count))
      throw TraceError(name + ":" + std::to_string(line_no) + ": malformed row '" + line + "'");
    if (r.task_count < 0) throw TraceError(name + ":" + std::to_string(line_no) + ": task_count must be >= 0");
    rows.push_back(r);
  }
  if (!header) throw TraceError(name + ": empty trace");
  return rows;
}

/// Splits rows into per-buyer histories (first `history_days` rows of each
/// buyer) and per-transaction realizations.
inline TraceData split_rows(const std::vector<TraceRow>& rows, int history_days, const std::string& name = "trace") {
  if (history_days < 1) throw TraceError("history length must be >= 1");
  std::map<int, std::vector<TraceRow>> by_buyer;
  for (const auto& r : rows) {
    auto& v = by_buyer[r.buyer_id];
    if (!v.empty() && r.day <= v.back().day)
      throw TraceError(name + ": days of buyer " + std::to_string(r.buyer_id) + " are not increasing");
    v.push_back(r);
  }
  if (by_buyer.empty()) throw TraceError(name + ": no rows");
  const std::size_t days = by_buyer.begin()->second.size();
  for (const auto& [id, v] : by_buyer)
    if (v.size() != days)
      throw TraceError(name + ": buyer " + std::to_string(id) + " has " + std::to_string(v.size()) +
                       " rows, expected " + std::to_string(days));
  if (days < static_cast<std::size_t>(history_days))
    throw TraceError(name + ": fewer than " + std::to_string(history_days) + " days per buyer");
  TraceData out;
  out.realizations.assign(days - static_cast<std::size_t>(history_days), {});
  for (const auto& [id, v] : by_buyer) {
    out.buyer_ids.push_back(id);
    std::vector<int> h;
    for (int d = 0; d < history_days; ++d) h.push_back(v[static_cast<std::size_t>(d)].task_count);
    out.histories.emplace_back(std::move(h));
    for (std::size_t d = static_cast<std::size_t>(history_days); d < days; ++d)
      out.realizations[d - static_cast<std::size_t>(history_days)].push_back(v[d].task_count);
  }
  return out;
}

inline TraceData load_trace(const std::string& path, int history_days = 30) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace " + path);
  return split_rows(parse_rows(in, path), history_days, path);
}

/// Synthetic per-buyer daily counts: Poisson around a buyer-specific mean,
/// optional weekly-style seasonality and, from a given day on, a level shift
/// whose factor is drawn per buyer.
struct GeneratorSpec {
  double mean_min = 12.0;
  double mean_max = 20.0;
  double season_amplitude = 0.0;
  int season_period = 7;
  int shift_day = -1;  // < 0: no shift
  double shift_factor_min = 1.0;
  double shift_factor_max = 1.0;
};

inline void validate(const GeneratorSpec& g) {
  if (!(g.mean_min >= 0.0) || g.mean_max < g.mean_min) throw std::invalid_argument("trace mean range is invalid");
  if (g.season_amplitude < 0.0 || g.season_amplitude >= 1.0)
    throw std::invalid_argument("trace.season_amplitude must lie in [0, 1)");
  if (g.season_period < 1) throw std::invalid_argument("trace.season_period must be >= 1");
  if (!(g.shift_factor_min >= 0.0) || g.shift_factor_max < g.shift_factor_min)
    throw std::invalid_argument("trace shift factors need 0 <= min <= max");
}

inline std::vector<TraceRow> generate_trace(int buyers, int days, std::uint64_t seed, const GeneratorSpec& spec = {}) {
  if (buyers < 1 || days < 1) throw std::invalid_argument("trace needs at least one buyer and one day");
  validate(spec);
  std::mt19937_64 rng(seed);
  const auto nb = static_cast<std::size_t>(buyers);
  std::vector<double> mean(nb), phase(nb), shift(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    mean[b] = std::uniform_real_distribution<double>(spec.mean_min, spec.mean_max)(rng);
    phase[b] = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
    shift[b] = std::uniform_real_distribution<double>(spec.shift_factor_min, spec.shift_factor_max)(rng);
  }
  std::vector<TraceRow> rows;
  for (int d = 0; d < days; ++d) {
    for (int b = 0; b < buyers; ++b) {
      double lambda = mean[static_cast<std::size_t>(b)];
      lambda *= 1.0 + spec.season_amplitude *
                          std::sin(2.0 * std::numbers::pi * d / spec.season_period + phase[static_cast<std::size_t>(b)]);
      if (spec.shift_day >= 0 && d >= spec.shift_day) lambda *= shift[static_cast<std::size_t>(b)];
      const int count = lambda > 0.0 ? std::poisson_distribution<int>(lambda)(rng) : 0;
      rows.push_back({d, b, count});
    }
  }
  return rows;
}

inline void write_trace(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << "day,buyer_id,task_count\n";
  for (const auto& r : rows) out << r.day << ',' << r.buyer_id << ',' << r.task_count << '\n';
}

inline void write_trace(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw TraceError("cannot write trace " + path);
  write_trace(out, rows);
  if (!out) throw TraceError("failed writing trace " + path);
}

}  // namespace edgemarket::trace
