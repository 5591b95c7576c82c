#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <span>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "logitcal/losses.hpp"
#include "logitcal/tensor.hpp"

namespace logitcal {

/// Number of non-target logits averaged in the recorded margin.
inline std::size_t margin_top_k(std::size_t class_count) {
  return std::min<std::size_t>(20, class_count - 1);
}

struct TrajectoryRow {
  std::size_t iteration = 0;
  double target_logit = 0.0;
  double nt1_logit = 0.0;  // largest non-target logit
  double nt2_logit = 0.0;  // second largest (equals nt1 when N == 2)
  double margin = 0.0;     // z_t - mean of the top-K non-target logits

  bool operator==(const TrajectoryRow&) const = default;
};

/// Per-iteration logit statistics of one attack run. Non-targets are
/// re-ranked at every iteration.
struct TrajectoryRecord {
  std::vector<TrajectoryRow> rows;
};

/// Appends the row for `logits` at `iteration` (defaults to one past the last
/// recorded iteration, starting at 1).
inline TrajectoryRecord& record_iteration(TrajectoryRecord& rec,
                                          std::span<const float> logits,
                                          std::size_t target,
                                          std::size_t iteration = 0) {
  if (logits.size() < 2) throw ShapeError("record_iteration: need N >= 2");
  if (target >= logits.size()) throw LossError("record_iteration: bad target");
  const std::size_t next = rec.rows.empty() ? 1 : rec.rows.back().iteration + 1;
  if (iteration == 0) iteration = next;
  if (!rec.rows.empty() && iteration <= rec.rows.back().iteration) {
    throw Error("record_iteration: iteration indices must increase");
  }
  std::vector<float> others;
  others.reserve(logits.size() - 1);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (i != target) others.push_back(logits[i]);
  }
  const std::size_t k = margin_top_k(logits.size());
  std::partial_sort(others.begin(), others.begin() + static_cast<long>(k),
                    others.end(), std::greater<>());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += others[i];
  TrajectoryRow row;
  row.iteration = iteration;
  row.target_logit = logits[target];
  row.nt1_logit = others[0];
  row.nt2_logit = others.size() > 1 ? others[1] : others[0];
  row.margin = row.target_logit - sum / static_cast<double>(k);
  rec.rows.push_back(row);
  return rec;
}

struct AggregateTrajectory {
  std::vector<TrajectoryRow> rows;  // column means
  std::size_t sample_count = 0;
};

/// Column-wise mean over records sharing one iteration schedule.
inline AggregateTrajectory aggregate(const std::vector<TrajectoryRecord>& records) {
  if (records.empty()) throw Error("aggregate: no records");
  AggregateTrajectory agg;
  agg.sample_count = records.size();
  const auto& ref = records.front().rows;
  for (const auto& r : records) {
    if (r.rows.size() != ref.size()) {
      throw Error("aggregate: schedule mismatch (row counts differ)");
    }
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (r.rows[i].iteration != ref[i].iteration) {
        throw Error("aggregate: schedule mismatch at row " + std::to_string(i));
      }
    }
  }
  const double n = static_cast<double>(records.size());
  agg.rows.resize(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    TrajectoryRow m;
    m.iteration = ref[i].iteration;
    for (const auto& r : records) {
      m.target_logit += r.rows[i].target_logit;
      m.nt1_logit += r.rows[i].nt1_logit;
      m.nt2_logit += r.rows[i].nt2_logit;
      m.margin += r.rows[i].margin;
    }
    m.target_logit /= n;
    m.nt1_logit /= n;
    m.nt2_logit /= n;
    m.margin /= n;
    agg.rows[i] = m;
  }
  return agg;
}

/// Least-squares slope of margin against iteration over rows [begin, end).
inline double margin_slope(const std::vector<TrajectoryRow>& rows,
                           std::size_t begin, std::size_t end) {
  if (end <= begin + 1) return 0.0;
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    mx += static_cast<double>(rows[i].iteration);
    my += rows[i].margin;
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const double dx = static_cast<double>(rows[i].iteration) - mx;
    sxy += dx * (rows[i].margin - my);
    sxx += dx * dx;
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

struct SaturationSummary {
  double peak_margin = 0.0;
  double final_margin = 0.0;
  double plateau_slope = 0.0;  // over the final third of iterations
  double initial_slope = 0.0;  // over the first 20 iterations
};

inline constexpr std::size_t kMinSaturationRows = 50;

inline SaturationSummary saturation_summary(const AggregateTrajectory& agg) {
  const auto& rows = agg.rows;
  if (rows.size() < kMinSaturationRows) {
    throw Error("saturation_summary: need at least " +
                std::to_string(kMinSaturationRows) + " iterations, got " +
                std::to_string(rows.size()));
  }
  SaturationSummary s;
  s.peak_margin = rows.front().margin;
  for (const auto& r : rows) s.peak_margin = std::max(s.peak_margin, r.margin);
  s.final_margin = rows.back().margin;
  s.plateau_slope = margin_slope(rows, rows.size() - rows.size() / 3, rows.size());
  s.initial_slope = margin_slope(rows, 0, std::min<std::size_t>(20, rows.size()));
  return s;
}

struct CurvePoint {
  double margin;
  double p_target;
  double p_non_target;
};

/// Two-class target / non-target probabilities over a margin grid.
inline std::vector<CurvePoint> saturation_curve(const std::vector<double>& margins) {
  std::vector<CurvePoint> out;
  out.reserve(margins.size());
  for (double m : margins) {
    const TwoClassProb p = two_class_prob(m);
    out.push_back({m, p.p_target, p.p_non_target});
  }
  return out;
}

/// Inclusive grid lo, lo + step, ..., hi (computed as lo + i * step).
inline std::vector<double> margin_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw Error("margin_grid: need step > 0 and hi >= lo");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + static_cast<double>(i) * step;
  return g;
}

// --------------------------------------------------------------------------
// CSV output with shortest round-trip number formatting.

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline constexpr const char* kTrajectoryCsvHeader =
    "iter,target_logit,nt1_logit,nt2_logit,margin";
inline constexpr const char* kCurveCsvHeader = "margin,p_t,p_nt";

inline std::string to_csv(const std::vector<TrajectoryRow>& rows) {
  std::ostringstream os;
  os << kTrajectoryCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.iteration << ',' << format_number(r.target_logit) << ','
       << format_number(r.nt1_logit) << ',' << format_number(r.nt2_logit) << ','
       << format_number(r.margin) << '\n';
  }
  return os.str();
}

inline std::string to_csv(const AggregateTrajectory& agg) { return to_csv(agg.rows); }

inline std::string to_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream os;
  os << kCurveCsvHeader << '\n';
  for (const auto& p : curve) {
    os << format_number(p.margin) << ',' << format_number(p.p_target) << ','
       << format_number(p.p_non_target) << '\n';
  }
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error("write failed: " + path);
}

template <class T>
void emit_csv(const T& table, const std::string& path) {
  write_text(path, to_csv(table));
}

/// Parses a trajectory CSV produced by to_csv.
inline std::vector<TrajectoryRow> parse_trajectory_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kTrajectoryCsvHeader) {
    throw Error("trajectory CSV: unexpected header");
  }
  std::vector<TrajectoryRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    TrajectoryRow r;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    const auto field = [&](auto& out) {
      const auto res = std::from_chars(p, end, out);
      if (res.ec != std::errc()) throw Error("trajectory CSV: bad number in '" + line + "'");
      p = res.ptr;
      if (p < end && *p == ',') ++p;
    };
    field(r.iteration);
    field(r.target_logit);
    field(r.nt1_logit);
    field(r.nt2_logit);
    field(r.margin);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace logitcal
