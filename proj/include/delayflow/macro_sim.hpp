#pragma once

// Finite-volume schemes for the Eulerian models on a periodic grid:
//
//   rho_i <- rho_i + dt/dx (f_{i-1} - f_i)
//
// with three boundary-flux strategies
//   godunov_euler    f1 = G(rho_i, rho_{i+1}) + tau/dx (rho_i V'(rho_i))^2 (rho_{i+1} - rho_i)
//   godunov_godunov  f2 = G(rho_i, rho_{i+1}) + tau/dx rho_i V'(rho_i) [G(rho_{i+1}, rho_{i+2}) - G(rho_i, rho_{i+1})]
//   godunov_exact    f3 = G(rho_i / D_i, rho_{i+1} / D_{i+1}),  D_i = 1 - tau/dx (V(rho_{i+1}) - V(rho_i))

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "delayflow/csv.hpp"
#include "delayflow/errors.hpp"
#include "delayflow/ov_core.hpp"

namespace delayflow {

enum class Scheme { godunov_euler, godunov_godunov, godunov_exact };
enum class BoundsPolicy { abort, clamp_and_flag, flag_only };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::godunov_euler: return "godunov_euler";
    case Scheme::godunov_godunov: return "godunov_godunov";
    case Scheme::godunov_exact: return "godunov_exact";
  }
  return "?";
}

template <FundamentalDiagram FD>
struct MacroGrid {
  double t = 0.0;
  std::int64_t step = 0;
  double dx = 1.0;
  std::vector<double> rho;
  FD ov;
  double tau = 0.0;
  double dt = 0.01;
  Scheme scheme = Scheme::godunov_exact;
  BoundsPolicy policy = BoundsPolicy::abort;
  std::size_t bound_flags = 0;  // out-of-range cell updates seen under the non-aborting policies

  std::size_t size() const noexcept { return rho.size(); }
  double at(std::ptrdiff_t i) const {
    const auto n = static_cast<std::ptrdiff_t>(rho.size());
    return rho[static_cast<std::size_t>(((i % n) + n) % n)];
  }
  double mass() const {
    double m = 0.0;
    for (double r : rho) m += r * dx;
    return m;
  }
};

template <FundamentalDiagram FD>
MacroGrid<FD> make_grid(FD ov, std::vector<double> rho, double dx, double tau, double dt, Scheme scheme,
                        BoundsPolicy policy = BoundsPolicy::abort) {
  if (rho.size() < 3) throw ConfigError("grid: need at least 3 cells");
  if (!(dx > 0.0)) throw ConfigError("grid: dx must be > 0");
  if (!(dt > 0.0)) throw ConfigError("grid: dt must be > 0");
  for (double r : rho)
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("grid: densities must be finite and >= 0");
  MacroGrid<FD> g{0.0, 0, dx, std::move(rho), std::move(ov), tau, dt, scheme, policy, 0};
  return g;
}

template <FundamentalDiagram FD>
double flux_f1(const MacroGrid<FD>& g, std::size_t i) {
  const auto k = static_cast<std::ptrdiff_t>(i);
  const double r0 = g.at(k), r1 = g.at(k + 1);
  const double d = r0 * g.ov.v_prime(r0);
  return godunov_flux(g.ov, r0, r1) + g.tau / g.dx * d * d * (r1 - r0);
}

template <FundamentalDiagram FD>
double flux_f2(const MacroGrid<FD>& g, std::size_t i) {
  const auto k = static_cast<std::ptrdiff_t>(i);
  const double r0 = g.at(k), r1 = g.at(k + 1), r2 = g.at(k + 2);
  const double g01 = godunov_flux(g.ov, r0, r1);
  const double g12 = godunov_flux(g.ov, r1, r2);
  return g01 + g.tau / g.dx * r0 * g.ov.v_prime(r0) * (g12 - g01);
}

namespace detail {

// Effective density rho_i / (1 - tau/dx (V(rho_{i+1}) - V(rho_i))), clamped to
// [0, 1/ell]. Above the jam density demand stays at capacity and supply at
// zero, so the clamp does not change G.
template <FundamentalDiagram FD>
double effective_density(const MacroGrid<FD>& g, std::ptrdiff_t i) {
  const double r0 = g.at(i), r1 = g.at(i + 1);
  const double denom = 1.0 - g.tau / g.dx * (g.ov.v(r1) - g.ov.v(r0));
  if (!(denom > 0.0)) {
    const auto n = static_cast<std::ptrdiff_t>(g.size());
    throw CflViolation(static_cast<std::size_t>(((i % n) + n) % n), denom);
  }
  return std::clamp(r0 / denom, 0.0, g.ov.jam_density());
}

}  // namespace detail

template <FundamentalDiagram FD>
double flux_f3(const MacroGrid<FD>& g, std::size_t i) {
  const auto k = static_cast<std::ptrdiff_t>(i);
  return godunov_flux(g.ov, detail::effective_density(g, k), detail::effective_density(g, k + 1));
}

template <FundamentalDiagram FD>
double boundary_flux(const MacroGrid<FD>& g, std::size_t i) {
  switch (g.scheme) {
    case Scheme::godunov_euler: return flux_f1(g, i);
    case Scheme::godunov_godunov: return flux_f2(g, i);
    case Scheme::godunov_exact: return flux_f3(g, i);
  }
  return 0.0;
}

/// One synchronous update of every cell. Mass is conserved up to rounding
/// because the flux differences telescope on the ring.
template <FundamentalDiagram FD>
MacroGrid<FD> step(const MacroGrid<FD>& g) {
  const std::size_t n = g.size();
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = boundary_flux(g, i);
  MacroGrid<FD> next = g;
  next.step = g.step + 1;
  next.t = static_cast<double>(next.step) * g.dt;
  const double ratio = g.dt / g.dx;
  const double rho_max = g.ov.jam_density();
  const double slack = 1e-12 * (std::isfinite(rho_max) ? rho_max : 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = g.rho[i] + ratio * (f[(i + n - 1) % n] - f[i]);
    if (r < -slack || r > rho_max + slack || !std::isfinite(r)) {
      if (g.policy == BoundsPolicy::abort) throw BoundsViolation(i, next.t, r);
      ++next.bound_flags;
      if (g.policy == BoundsPolicy::clamp_and_flag) {
        next.rho[i] = std::isfinite(r) ? std::clamp(r, 0.0, rho_max) : rho_max;
        continue;
      }
    }
    next.rho[i] = r;
  }
  return next;
}

struct BoundsVerdict {
  bool guaranteed = false;
  std::string reason;
};

/// Sufficient conditions keeping densities in [0, 1/ell]:
/// f1 needs tau <= 0, f2 needs tau >= -dx rho_e / W'(1/rho_e), f3 needs tau < dx/V0.
template <FundamentalDiagram FD>
BoundsVerdict check_bounds_map(Scheme scheme, const FD& ov, double tau, double dx, double rho_e) {
  if (tau == 0.0) return {true, "tau = 0: plain Godunov scheme of a bounded diagram"};
  switch (scheme) {
    case Scheme::godunov_euler:
      return tau <= 0.0 ? BoundsVerdict{true, "godunov_euler bounded for tau <= 0"}
                        : BoundsVerdict{false, "godunov_euler bounded only for tau <= 0"};
    case Scheme::godunov_godunov: {
      // W'(1/rho_e) = -rho_e^2 V'(rho_e)
      const double wp = -rho_e * rho_e * ov.v_prime(rho_e);
      if (!(wp > 0.0)) return {true, "godunov_godunov: W'(1/rho_e) = 0, no lower bound on tau"};
      const double lo = -dx * rho_e / wp;
      return tau >= lo ? BoundsVerdict{true, "godunov_godunov: tau >= " + csv::num(lo)}
                       : BoundsVerdict{false, "godunov_godunov requires tau >= " + csv::num(lo)};
    }
    case Scheme::godunov_exact: {
      const double v0 = ov.max_speed();
      const double hi = std::isfinite(v0) ? dx / v0 : kInf;
      return tau < hi ? BoundsVerdict{true, "godunov_exact: tau < dx/V0 = " + csv::num(hi)}
                      : BoundsVerdict{false, "godunov_exact requires tau < dx/V0 = " + csv::num(hi)};
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Density-field records

struct DensityFieldRecord {
  double dx = 1.0;
  std::vector<double> times;
  std::vector<std::vector<double>> fields;

  std::size_t cells() const { return fields.empty() ? 0 : fields.front().size(); }
};

template <FundamentalDiagram FD>
DensityFieldRecord run_macro(MacroGrid<FD> g, double t_end, std::size_t stride) {
  if (t_end < 0.0) throw ConfigError("run: t_end must be >= 0");
  if (stride == 0) throw ConfigError("run: stride must be >= 1");
  const auto n_steps = static_cast<std::int64_t>(std::llround(t_end / g.dt));
  DensityFieldRecord rec{g.dx, {}, {}};
  for (std::int64_t k = 0;; ++k) {
    if (k % static_cast<std::int64_t>(stride) == 0 || k == n_steps) {
      rec.times.push_back(g.t);
      rec.fields.push_back(g.rho);
    }
    if (k == n_steps) break;
    g = step(g);
  }
  return rec;
}

/// Speed reported for cell i: the delayed profile with the cell's own density.
template <FundamentalDiagram FD>
double cell_speed(const FD& ov, double tau, double rho_i, double rho_ip1) {
  return delayed_speed(ov, tau, rho_ip1, rho_i);
}

template <FundamentalDiagram FD>
void write_density_csv(std::ostream& os, const DensityFieldRecord& rec, const FD& ov, double tau) {
  os << "t,cell,rho,speed,flow\n";
  csv::RowWriter w(os);
  for (std::size_t k = 0; k < rec.times.size(); ++k) {
    const auto& f = rec.fields[k];
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double v = cell_speed(ov, tau, f[i], f[(i + 1) % f.size()]);
      w.row(rec.times[k], i, f[i], v, f[i] * v);
    }
  }
}

// Dense matrix: one row per time sample, one column per cell.
inline void write_heatmap_csv(std::ostream& os, const DensityFieldRecord& rec) {
  for (const auto& f : rec.fields) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i) os << ',';
      os << csv::num(f[i]);
    }
    os << '\n';
  }
}

}  // namespace delayflow
