#pragma once

// Observables: local densities, instantaneous fundamental-diagram samples,
// micro/macro field comparison, hysteresis envelopes, empirical overlays.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "delayflow/csv.hpp"
#include "delayflow/errors.hpp"
#include "delayflow/macro_sim.hpp"
#include "delayflow/micro_sim.hpp"
#include "delayflow/ov_core.hpp"

namespace delayflow {

struct FDSample {
  double t = 0.0;
  std::size_t subject = 0;
  double density = 0.0;
  double speed = 0.0;
  double flow = 0.0;
};

inline FDSample make_fd_sample(double t, std::size_t subject, double density, double speed) {
  return {t, subject, density, speed, density * speed};
}

inline double agent_density(const MicroState& st, std::size_t i) {
  const double s = st.spacing(i);
  if (!(s > 0.0)) throw ModelError("agent_density: zero spacing at agent " + std::to_string(i));
  return 1.0 / s;
}

/// Micro series: density 1/spacing, speed as realized by the Euler step.
inline std::vector<FDSample> fd_series(const TrajectoryRecord& rec, std::size_t agent) {
  std::vector<FDSample> out;
  out.reserve(rec.samples.size());
  for (const auto& s : rec.samples) {
    if (agent >= s.spacing.size()) throw std::out_of_range("fd_series: agent index");
    out.push_back(make_fd_sample(s.t, agent, 1.0 / s.spacing[agent], s.speed[agent]));
  }
  return out;
}

/// Macro series: cell density and the delayed speed against the downstream cell.
template <FundamentalDiagram FD>
std::vector<FDSample> fd_series(const DensityFieldRecord& rec, const FD& ov, double tau, std::size_t cell) {
  std::vector<FDSample> out;
  out.reserve(rec.times.size());
  for (std::size_t k = 0; k < rec.times.size(); ++k) {
    const auto& f = rec.fields[k];
    if (cell >= f.size()) throw std::out_of_range("fd_series: cell index");
    const double r = f[cell];
    out.push_back(make_fd_sample(rec.times[k], cell, r, cell_speed(ov, tau, r, f[(cell + 1) % f.size()])));
  }
  return out;
}

inline void write_fd_series_csv(std::ostream& os, const std::vector<FDSample>& samples) {
  os << "t,subject,density,speed,flow\n";
  csv::RowWriter w(os);
  for (const auto& s : samples) w.row(s.t, s.subject, s.density, s.speed, s.flow);
}

// ---------------------------------------------------------------------------
// Micro to cells

/// Each agent carries unit mass spread uniformly over the interval to its
/// predecessor; cell density is the mass overlapping the cell divided by dx.
inline std::vector<double> micro_to_cells(const MicroState& st, double dx, std::size_t m) {
  if (m == 0 || !(dx > 0.0)) throw ConfigError("micro_to_cells: need dx > 0 and M >= 1");
  const double length = st.ring_length;
  if (std::abs(dx * static_cast<double>(m) - length) > 1e-9 * length)
    throw ConfigError("micro_to_cells: M dx must equal the ring length");
  std::vector<double> mass(m, 0.0);
  for (std::size_t i = 0; i < st.size(); ++i) {
    const double s = st.spacing(i);
    if (!(s > 0.0)) throw ModelError("micro_to_cells: zero spacing at agent " + std::to_string(i));
    const double rho = 1.0 / s;
    double a = st.x[i];
    double left = s;
    auto c = std::min(static_cast<std::size_t>(a / dx), m - 1);
    while (left > 0.0) {
      const double cell_end = static_cast<double>(c + 1) * dx;
      const double piece = std::min(left, std::max(cell_end - a, 0.0));
      mass[c] += piece * rho;
      left -= piece;
      a += piece;
      if (left > 0.0) {
        c = (c + 1) % m;
        if (c == 0) a -= length;
      }
    }
  }
  for (double& v : mass) v /= dx;
  return mass;
}

inline DensityFieldRecord micro_to_cells(const TrajectoryRecord& rec, double dx, std::size_t m) {
  DensityFieldRecord out{dx, {}, {}};
  for (const auto& s : rec.samples) {
    MicroState st;
    st.t = s.t;
    st.ring_length = rec.ring_length;
    st.x = s.x;
    out.times.push_back(s.t);
    out.fields.push_back(micro_to_cells(st, dx, m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Wave speed and field comparison

namespace detail {

inline std::vector<double> demeaned(const std::vector<double>& f) {
  double mean = 0.0;
  for (double v : f) mean += v;
  mean /= static_cast<double>(f.size());
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i] - mean;
  return out;
}

// Shift (in cells, fractional) maximizing sum_i a_i b_{i+s}, in (-M/2, M/2].
inline std::optional<double> correlation_shift(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t m = a.size();
  const auto da = demeaned(a), db = demeaned(b);
  double ea = 0.0, eb = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    ea += da[i] * da[i];
    eb += db[i] * db[i];
  }
  if (!(ea > 1e-12 * static_cast<double>(m)) || !(eb > 1e-12 * static_cast<double>(m))) return std::nullopt;
  std::vector<double> corr(m, 0.0);
  for (std::size_t s = 0; s < m; ++s)
    for (std::size_t i = 0; i < m; ++i) corr[s] += da[i] * db[(i + s) % m];
  const auto best = static_cast<std::size_t>(std::max_element(corr.begin(), corr.end()) - corr.begin());
  const double cm = corr[(best + m - 1) % m], c0 = corr[best], cp = corr[(best + 1) % m];
  const double curv = cm - 2.0 * c0 + cp;
  const double frac = curv < 0.0 ? 0.5 * (cm - cp) / curv : 0.0;
  double shift = static_cast<double>(best) + frac;
  if (shift > 0.5 * static_cast<double>(m)) shift -= static_cast<double>(m);
  return shift;
}

}  // namespace detail

/// Mean pattern velocity over all sample pairs `lag` time units apart.
/// Undefined when no pair carries a non-flat field.
inline std::optional<double> estimate_wave_speed(const DensityFieldRecord& rec, double lag = 10.0, double t_from = -kInf,
                                                 double t_to = kInf) {
  if (rec.times.size() < 2 || !(lag > 0.0)) return std::nullopt;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < rec.times.size(); ++k) {
    if (rec.times[k] < t_from - 1e-9) continue;
    const double target = rec.times[k] + lag;
    if (target > t_to + 1e-9) break;
    const auto it = std::lower_bound(rec.times.begin() + static_cast<std::ptrdiff_t>(k), rec.times.end(), target - 1e-9);
    if (it == rec.times.end() || std::abs(*it - target) > 1e-9) continue;
    const auto j = static_cast<std::size_t>(it - rec.times.begin());
    const auto s = detail::correlation_shift(rec.fields[k], rec.fields[j]);
    if (!s) continue;
    sum += *s * rec.dx / (rec.times[j] - rec.times[k]);
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

struct CompareReport {
  std::optional<double> wave_speed_a;
  std::optional<double> wave_speed_b;
  std::vector<double> times;
  std::vector<double> l1;  // sum |a - b| dx over the mean mass of the pair

  double max_l1() const { return l1.empty() ? 0.0 : *std::max_element(l1.begin(), l1.end()); }
};

inline CompareReport compare_fields(const DensityFieldRecord& a, const DensityFieldRecord& b, double lag = 10.0) {
  if (a.times.size() != b.times.size() || a.times.empty())
    throw std::invalid_argument("compare_fields: records have different sample counts");
  if (std::abs(a.times.back() - b.times.back()) > 1e-9 || std::abs(a.times.front() - b.times.front()) > 1e-9)
    throw std::invalid_argument("compare_fields: records cover different durations");
  if (a.cells() != b.cells() || std::abs(a.dx - b.dx) > 1e-12 * a.dx)
    throw std::invalid_argument("compare_fields: records use different grids");
  CompareReport r{estimate_wave_speed(a, lag), estimate_wave_speed(b, lag), a.times, {}};
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    if (std::abs(a.times[k] - b.times[k]) > 1e-9) throw std::invalid_argument("compare_fields: sample times differ");
    double diff = 0.0, ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.cells(); ++i) {
      diff += std::abs(a.fields[k][i] - b.fields[k][i]);
      ma += a.fields[k][i];
      mb += b.fields[k][i];
    }
    const double mean_mass = 0.5 * (ma + mb);
    r.l1.push_back(mean_mass > 0.0 ? diff / mean_mass : 0.0);
  }
  return r;
}

inline void write_compare_csv(std::ostream& os, const CompareReport& r) {
  os << "# wave_speed_micro=" << (r.wave_speed_a ? csv::num(*r.wave_speed_a) : "undefined")
     << " wave_speed_macro=" << (r.wave_speed_b ? csv::num(*r.wave_speed_b) : "undefined") << '\n';
  os << "t,l1\n";
  csv::RowWriter w(os);
  for (std::size_t k = 0; k < r.times.size(); ++k) w.row(r.times[k], r.l1[k]);
}

// ---------------------------------------------------------------------------
// Empirical data and envelopes

struct EmpiricalPoint {
  double density = 0.0;
  double speed = 0.0;
};

struct EmpiricalSet {
  std::vector<EmpiricalPoint> points;
  std::vector<std::string> errors;  // one entry per rejected line
};

/// Reads `density,speed` rows. Bad rows are skipped and reported, the rest kept.
inline EmpiricalSet parse_empirical(std::istream& in) {
  EmpiricalSet set;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    if (!header) {
      std::string h;
      for (char c : line)
        if (c != ' ' && c != '\t') h += c;
      if (h != "density,speed") {
        set.errors.push_back("line " + std::to_string(lineno) + ": expected header 'density,speed'");
        return set;
      }
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string a, b, extra;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || std::getline(ss, extra, ',')) {
      set.errors.push_back("line " + std::to_string(lineno) + ": expected two fields");
      continue;
    }
    try {
      std::size_t pa = 0, pb = 0;
      const double d = std::stod(a, &pa), v = std::stod(b, &pb);
      if (a.find_first_not_of(" \t", pa) != std::string::npos || b.find_first_not_of(" \t", pb) != std::string::npos)
        throw std::invalid_argument("trailing characters");
      if (!std::isfinite(d) || !std::isfinite(v) || d < 0.0 || v < 0.0) {
        set.errors.push_back("line " + std::to_string(lineno) + ": values must be finite and non-negative");
        continue;
      }
      set.points.push_back({d, v});
    } catch (const std::exception&) {
      set.errors.push_back("line " + std::to_string(lineno) + ": not a number");
    }
  }
  if (!header) set.errors.push_back("missing header 'density,speed'");
  return set;
}

struct EnvelopeReport {
  std::optional<double> coverage;  // undefined for an empty set
  std::vector<bool> inside;
  double eps = 0.0;
};

/// Fraction of points with V-(rho) - eps <= v <= V+(rho) + eps. The default
/// slack is 5% of the maximal speed.
template <FundamentalDiagram FD>
EnvelopeReport envelope_overlay(const EmpiricalSet& set, const FD& ov, double tau, std::optional<double> eps = std::nullopt) {
  EnvelopeReport r;
  r.eps = eps ? *eps : 0.05 * ov.max_speed();
  if (set.points.empty()) return r;
  std::size_t hits = 0;
  for (const auto& p : set.points) {
    const bool ok = p.speed >= bound_lower(ov, tau, p.density) - r.eps && p.speed <= bound_upper(ov, tau, p.density) + r.eps;
    r.inside.push_back(ok);
    hits += ok ? 1 : 0;
  }
  r.coverage = static_cast<double>(hits) / static_cast<double>(set.points.size());
  return r;
}

struct BoundCurvePoint {
  double density = 0.0;
  double v = 0.0;
  double v_upper = 0.0;
  double v_lower = 0.0;
};

/// V, V+ and V- sampled on n evenly spaced densities in [0, 1/ell].
template <FundamentalDiagram FD>
std::vector<BoundCurvePoint> bound_curves(const FD& ov, double tau, std::size_t n = 500) {
  if (n < 2) throw std::invalid_argument("bound_curves: need at least 2 points");
  const double top = ov.jam_density();
  if (!std::isfinite(top)) throw std::invalid_argument("bound_curves: jam density must be finite");
  std::vector<BoundCurvePoint> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double r = top * static_cast<double>(k) / static_cast<double>(n - 1);
    out.push_back({r, ov.v(r), bound_upper(ov, tau, r), bound_lower(ov, tau, r)});
  }
  return out;
}

inline void write_bound_curves_csv(std::ostream& os, const std::vector<BoundCurvePoint>& pts) {
  os << "density,v,v_upper,v_lower,flow,flow_upper,flow_lower\n";
  csv::RowWriter w(os);
  for (const auto& p : pts)
    w.row(p.density, p.v, p.v_upper, p.v_lower, p.density * p.v, p.density * p.v_upper, p.density * p.v_lower);
}

}  // namespace delayflow
