#pragma once

// Linear stability of homogeneous solutions.
//
// A discrete scheme linearized at rho_e updates a perturbation as
//   e_i <- alpha e_i + beta e_{i+1} + gamma e_{i+2} + xi e_{i-1}.
// The update matrix is circulant, so its eigenvalues are the symbol
//   lambda_l = alpha + beta w + gamma w^2 + xi / w,   w = exp(2 pi i l / N),
// and the homogeneous state is stable iff |lambda_l| < 1 for l = 1..N-1
// (lambda_0 = 1 is the conserved-mass mode).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "delayflow/csv.hpp"
#include "delayflow/ov_core.hpp"

namespace delayflow {

enum class StabilityScheme { micro, continuous, godunov_euler, godunov_godunov, godunov_exact };
enum class Verdict { stable, marginal, unstable, infeasible };
enum class WaveKind { none, long_wave, short_wave };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::stable: return "stable";
    case Verdict::marginal: return "marginal";
    case Verdict::unstable: return "unstable";
    case Verdict::infeasible: return "infeasible";
  }
  return "?";
}

inline const char* wave_kind_name(WaveKind k) {
  switch (k) {
    case WaveKind::none: return "none";
    case WaveKind::long_wave: return "long_wave";
    case WaveKind::short_wave: return "short_wave";
  }
  return "?";
}

inline constexpr double kStabilityMargin = 1e-9;

struct LinearizationCoeffs {
  double alpha = 1.0;
  double beta = 0.0;
  double gamma = 0.0;
  double xi = 0.0;

  double row_sum() const noexcept { return alpha + beta + gamma + xi; }
};

struct StabilityQuery {
  StabilityScheme scheme = StabilityScheme::godunov_exact;
  double rho_e = 1.0 / 2.02;
  double tau = 1.0;
  double t_gap = 1.0;
  double ell = 1.0;
  double dx = 2.02;
  double dt = 0.01;
  std::size_t n_cells = 50;
  double v0 = kInf;  // sup V; only used for the exact scheme's feasibility bound

  void validate() const {
    if (!(rho_e > 0.0) || (ell > 0.0 && !(rho_e < 1.0 / ell)))
      throw std::invalid_argument("stability: rho_e must lie in (0, 1/ell)");
    if (n_cells < 2) throw std::invalid_argument("stability: N must be >= 2");
    if (!(dx > 0.0)) throw std::invalid_argument("stability: dx must be > 0");
    if (!(dt > 0.0)) throw std::invalid_argument("stability: dt must be > 0");
    if (!(t_gap > 0.0)) throw std::invalid_argument("stability: T must be > 0");
  }
};

// Godunov/Euler: A = dt ell/(T dx), B = dt tau/(T dx rho_e)^2.
inline LinearizationCoeffs coeffs_f1(const StabilityQuery& q) {
  const double a = q.dt * q.ell / (q.t_gap * q.dx);
  const double m = q.t_gap * q.dx * q.rho_e;
  const double b = q.dt * q.tau / (m * m);
  return {1.0 - a + 2.0 * b, a - b, 0.0, -b};
}

// Godunov/Godunov and exact Godunov share the linearization:
// A = dt ell/(T dx), B = tau/(T dx rho_e).
inline LinearizationCoeffs coeffs_f23(const StabilityQuery& q) {
  const double a = q.dt * q.ell / (q.t_gap * q.dx);
  const double b = q.tau / (q.t_gap * q.dx * q.rho_e);
  return {1.0 - a * (1.0 + b), a * (1.0 + 2.0 * b), -a * b, 0.0};
}

inline LinearizationCoeffs coeffs_for(const StabilityQuery& q) {
  switch (q.scheme) {
    case StabilityScheme::godunov_euler: return coeffs_f1(q);
    case StabilityScheme::godunov_godunov:
    case StabilityScheme::godunov_exact: return coeffs_f23(q);
    default: throw std::invalid_argument("coefficients exist only for the discrete Eulerian schemes");
  }
}

/// f(x) = (ab + a xi + b g - 3 g xi) x + 2(a g + b xi) x^2 + 4 g xi x^3, so that
/// |lambda|^2 = a^2 + b^2 + g^2 + xi^2 - 2 a g - 2 b xi + 2 f(cos theta).
inline double symbol_polynomial(const LinearizationCoeffs& c, double x) {
  const double lin = c.alpha * c.beta + c.alpha * c.xi + c.beta * c.gamma - 3.0 * c.gamma * c.xi;
  const double quad = 2.0 * (c.alpha * c.gamma + c.beta * c.xi);
  const double cub = 4.0 * c.gamma * c.xi;
  return ((cub * x + quad) * x + lin) * x;
}

inline double eigen_modulus_sq(const LinearizationCoeffs& c, std::size_t l, std::size_t n) {
  const double cl = std::cos(2.0 * std::numbers::pi * static_cast<double>(l) / static_cast<double>(n));
  const double base = c.alpha * c.alpha + c.beta * c.beta + c.gamma * c.gamma + c.xi * c.xi -
                      2.0 * c.alpha * c.gamma - 2.0 * c.beta * c.xi;
  return base + 2.0 * symbol_polynomial(c, cl);
}

inline Verdict classify_modulus(double max_modulus_sq) {
  if (max_modulus_sq < 1.0 - kStabilityMargin) return Verdict::stable;
  if (max_modulus_sq > 1.0 + kStabilityMargin) return Verdict::unstable;
  return Verdict::marginal;
}

struct StabilityReport {
  Verdict eigen_verdict = Verdict::marginal;
  double max_modulus_sq = 0.0;
  std::size_t argmax_mode = 1;
  WaveKind wave = WaveKind::none;
  bool feasible = true;
  Verdict closed_form_verdict = Verdict::marginal;
  std::string branch;
  std::string notes;
};

// ---------------------------------------------------------------------------
// Closed form

struct ClosedForm {
  Verdict verdict = Verdict::marginal;
  Verdict condition_verdict = Verdict::marginal;  // textbook dt sub-conditions, as if every mode were present
  std::string branch;
  double binding_dt = std::numeric_limits<double>::quiet_NaN();
  double x0 = std::numeric_limits<double>::quiet_NaN();  // vertex of the symbol polynomial
  WaveKind wave = WaveKind::none;
  std::string notes;
};

namespace detail {

// Sign analysis of the quadratic symbol f(x) = a1 x + a2 x^2 over the mode set
// {cos(2 pi l/N), l = 1..N-1}. With g(c) = f(c) - f(1) = (c - 1)(a1 + a2 (1 + c)),
// mode c is stable iff a1 + a2 (1 + c) > 0. For a concave f the critical mode
// is the longest wave c_1; for a convex f the extreme modes c_1 and c_min.
inline void quadratic_symbol_verdict(double a1, double a2, std::size_t n, ClosedForm& out) {
  const double c1 = std::cos(2.0 * std::numbers::pi / static_cast<double>(n));
  const double cmin = std::cos(2.0 * std::numbers::pi * static_cast<double>(n / 2) / static_cast<double>(n));
  const double h_long = a1 + a2 * (1.0 + c1);
  const double h_short = a1 + a2 * (1.0 + cmin);
  out.x0 = a2 != 0.0 ? -a1 / (2.0 * a2) : std::numeric_limits<double>::quiet_NaN();
  if (a2 < 0.0) {
    if (h_long > 0.0) {
      out.verdict = Verdict::stable;
      out.wave = WaveKind::none;
    } else {
      out.verdict = h_long < 0.0 ? Verdict::unstable : Verdict::marginal;
      out.wave = out.x0 < 0.0 ? WaveKind::short_wave : WaveKind::long_wave;
    }
    return;
  }
  if (h_long > 0.0 && h_short > 0.0) {
    out.verdict = Verdict::stable;
    out.wave = WaveKind::none;
  } else if (h_short < 0.0) {
    out.verdict = Verdict::unstable;
    out.wave = WaveKind::short_wave;
  } else if (h_long < 0.0) {
    out.verdict = Verdict::unstable;
    out.wave = WaveKind::long_wave;
  } else {
    out.verdict = Verdict::marginal;
  }
}

inline Verdict strict(bool stable) { return stable ? Verdict::stable : Verdict::unstable; }

}  // namespace detail

/// Godunov/Euler scheme. Bands in tau (K = T ell dx rho_e^2):
///   tau < 0        stable iff dt < T dx / (ell - 2 tau/(T dx rho_e^2))      (alpha > 0)
///   0 <= tau < K/2 stable iff dt < T dx/ell - 2 tau/(ell rho_e)^2            (x0 > 1)
///   K/2 <= tau < K unstable, shortest wavelength
///   tau >= K       unstable for all dt
inline ClosedForm closed_form_f1(const StabilityQuery& q) {
  q.validate();
  const auto c = coeffs_f1(q);
  ClosedForm out;
  detail::quadratic_symbol_verdict(c.alpha * (1.0 - c.alpha), 2.0 * c.beta * c.xi, q.n_cells, out);
  const double k = q.t_gap * q.ell * q.dx * q.rho_e * q.rho_e;
  if (q.tau < 0.0) {
    out.branch = "tau<0";
    const double d = q.ell - 2.0 * q.tau / (q.t_gap * q.dx * q.rho_e * q.rho_e);
    out.binding_dt = q.t_gap * q.dx / d;
    out.condition_verdict = detail::strict(q.dt < out.binding_dt);
  } else if (q.tau < 0.5 * k) {
    out.branch = q.tau == 0.0 ? "tau=0" : "0<tau<K/2";
    out.binding_dt = q.t_gap * q.dx / q.ell - 2.0 * q.tau / (q.ell * q.rho_e * q.ell * q.rho_e);
    out.condition_verdict = detail::strict(q.dt < out.binding_dt);
  } else if (q.tau < k) {
    out.branch = "K/2<=tau<K";
    out.condition_verdict = Verdict::unstable;
    const double s = 2.0 * q.tau / (q.t_gap * q.dx * q.rho_e);
    const double dt_short = (q.tau - 0.5 * k) / (s * s);
    out.notes = "instability at the shortest wavelength while dt < " + csv::num(dt_short);
  } else {
    out.branch = "tau>=K";
    out.condition_verdict = Verdict::unstable;
  }
  return out;
}

/// Godunov/Godunov and exact Godunov schemes. Bands in tau (K = T dx rho_e):
///   tau <= -K/2    unstable, shortest wavelength
///   -K/2 < tau < 0 stable for dt below T dx/(ell + ell tau/(T dx rho_e))    (alpha > 0)
///   0 <= tau < K/2 stable iff dt < T dx/ell - 2 tau/(ell rho_e)             (x0 > 1)
///   tau >= K/2     unstable at the long wave cos^-1(x0), if the ring resolves it
/// The exact scheme additionally needs tau < dx/V0.
inline ClosedForm closed_form_f23(const StabilityQuery& q) {
  q.validate();
  const auto c = coeffs_f23(q);
  ClosedForm out;
  if (q.scheme == StabilityScheme::godunov_exact && !(q.tau < q.dx / q.v0)) {
    out.verdict = out.condition_verdict = Verdict::infeasible;
    out.branch = "tau>=dx/V0";
    out.binding_dt = std::numeric_limits<double>::quiet_NaN();
    out.notes = "effective density undefined: tau >= dx/V0";
    return out;
  }
  detail::quadratic_symbol_verdict(c.beta * (1.0 - c.beta), 2.0 * c.alpha * c.gamma, q.n_cells, out);
  const double k = q.t_gap * q.dx * q.rho_e;
  if (q.tau <= -0.5 * k) {
    out.branch = "tau<=-K/2";
    out.condition_verdict = Verdict::unstable;
  } else if (q.tau < 0.0) {
    out.branch = "-K/2<tau<0";
    const double pal = q.t_gap * q.dx / (q.ell + q.ell * q.tau / k);
    const double shortest = q.t_gap * q.dx / (q.ell + 2.0 * q.ell * q.tau / k);
    out.binding_dt = std::min(pal, shortest);
    out.condition_verdict = detail::strict(q.dt < out.binding_dt);
  } else if (q.tau < 0.5 * k) {
    out.branch = q.tau == 0.0 ? "tau=0" : "0<tau<K/2";
    out.binding_dt = q.t_gap * q.dx / q.ell - 2.0 * q.tau / (q.ell * q.rho_e);
    out.condition_verdict = detail::strict(q.dt < out.binding_dt);
  } else {
    out.branch = "tau>=K/2";
    const double x0 = out.x0;
    const bool reachable = !(x0 >= 1.0) && (x0 <= -1.0 || static_cast<double>(q.n_cells) > 2.0 * std::numbers::pi / std::acos(x0));
    out.condition_verdict = (reachable || !(c.alpha > 0.0)) ? Verdict::unstable : Verdict::stable;
    out.notes = "unstable frequency cos^-1(x0), x0 = " + csv::num(x0);
  }
  return out;
}

inline ClosedForm closed_form(const StabilityQuery& q) {
  return q.scheme == StabilityScheme::godunov_euler ? closed_form_f1(q) : closed_form_f23(q);
}

/// Exhaustive scan of the modes l = 1..N-1.
inline StabilityReport scan_stability(const StabilityQuery& q) {
  if (q.scheme == StabilityScheme::micro || q.scheme == StabilityScheme::continuous)
    throw std::invalid_argument("scan_stability: needs a discrete Eulerian scheme");
  q.validate();
  const auto c = coeffs_for(q);
  StabilityReport r;
  r.max_modulus_sq = -1.0;
  for (std::size_t l = 1; l < q.n_cells; ++l) {
    const double m = eigen_modulus_sq(c, l, q.n_cells);
    if (m > r.max_modulus_sq) {
      r.max_modulus_sq = m;
      r.argmax_mode = l;
    }
  }
  r.eigen_verdict = classify_modulus(r.max_modulus_sq);
  if (r.eigen_verdict == Verdict::unstable) {
    const double cl = std::cos(2.0 * std::numbers::pi * static_cast<double>(r.argmax_mode) / static_cast<double>(q.n_cells));
    r.wave = cl < 0.0 ? WaveKind::short_wave : WaveKind::long_wave;
  }
  r.feasible = !(q.scheme == StabilityScheme::godunov_exact && !(q.tau < q.dx / q.v0));
  const auto cf = closed_form(q);
  r.closed_form_verdict = cf.verdict;
  r.branch = cf.branch;
  r.notes = cf.notes;
  if (!r.feasible) r.eigen_verdict = Verdict::infeasible;
  return r;
}

// ---------------------------------------------------------------------------
// Continuous model and micro model

struct ContinuousStability {
  Verdict verdict = Verdict::marginal;
  double tau = 0.0;
  double rho_e = 0.0;
  double speed = 0.0;        // V(rho_e)
  double speed_prime = 0.0;  // V'(rho_e)
  std::string notes;

  // Growth rate of wavenumber l: tau (l rho_e V')^2 + i l (V + rho_e V').
  std::complex<double> root(double l) const {
    const double d = l * rho_e * speed_prime;
    return {tau * d * d, l * (speed + rho_e * speed_prime)};
  }
};

template <FundamentalDiagram FD>
ContinuousStability continuous_stability(const FD& ov, double rho_e, double tau) {
  ContinuousStability s{Verdict::marginal, tau, rho_e, ov.v(rho_e), ov.v_prime(rho_e), {}};
  if (s.speed_prime == 0.0) {
    s.notes = "V'(rho_e) = 0: perturbations neither grow nor decay at linear order";
    return s;
  }
  s.verdict = tau < 0.0 ? Verdict::stable : (tau > 0.0 ? Verdict::unstable : Verdict::marginal);
  return s;
}

// Micro criterion |tau| W' < 1/2 evaluated on the rising branch (W' = 1/T).
inline Verdict micro_verdict(double tau, double t_gap) {
  const double lhs = std::abs(tau) / t_gap;
  return lhs < 0.5 ? Verdict::stable : (lhs > 0.5 ? Verdict::unstable : Verdict::marginal);
}

/// Dispatches any scheme to its verdict. The micro and continuous schemes have
/// no mode scan; their closed-form verdict is copied into eigen_verdict.
inline StabilityReport analyze(const StabilityQuery& q) {
  if (q.scheme == StabilityScheme::micro) {
    StabilityReport r;
    r.eigen_verdict = r.closed_form_verdict = micro_verdict(q.tau, q.t_gap);
    r.branch = "|tau| W' < 1/2";
    return r;
  }
  if (q.scheme == StabilityScheme::continuous) {
    const auto c = continuous_stability(AffineOV(q.ell, q.t_gap), q.rho_e, q.tau);
    StabilityReport r;
    r.eigen_verdict = r.closed_form_verdict = c.verdict;
    r.branch = "tau < 0";
    r.notes = c.notes;
    return r;
  }
  return scan_stability(q);
}

// ---------------------------------------------------------------------------
// Region maps

enum class MapAxis { dt, rho_e };

struct MapSpec {
  StabilityQuery base;
  MapAxis axis = MapAxis::dt;
  double tau_min = -1.0, tau_max = 2.0;
  std::size_t tau_n = 200;
  double y_min = 0.01, y_max = 3.0;
  std::size_t y_n = 200;
  unsigned threads = 1;
};

struct MapCell {
  double tau = 0.0;
  double y = 0.0;
  Verdict eigen = Verdict::marginal;
  Verdict closed = Verdict::marginal;
  double max_modulus_sq = 0.0;
  std::size_t argmax_mode = 0;
  WaveKind wave = WaveKind::none;
  bool disagree = false;
};

struct StabilityMap {
  MapSpec spec;
  std::vector<MapCell> cells;  // row-major: y outer, tau inner

  const MapCell& at(std::size_t i_tau, std::size_t i_y) const { return cells[i_y * spec.tau_n + i_tau]; }
};

namespace detail {

inline double axis_value(double lo, double hi, std::size_t n, std::size_t k) {
  return n <= 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
}

}  // namespace detail

inline StabilityQuery map_query(const MapSpec& spec, double tau, double y) {
  StabilityQuery q = spec.base;
  q.tau = tau;
  if (spec.axis == MapAxis::dt) q.dt = y; else q.rho_e = y;
  return q;
}

inline MapCell evaluate_cell(const MapSpec& spec, double tau, double y) {
  const auto q = map_query(spec, tau, y);
  const auto r = scan_stability(q);
  MapCell c{tau, y, r.eigen_verdict, r.closed_form_verdict, r.max_modulus_sq, r.argmax_mode, r.wave, false};
  c.disagree = c.eigen != c.closed;
  return c;
}

inline StabilityMap stability_map(const MapSpec& spec) {
  if (spec.tau_n == 0 || spec.y_n == 0) throw std::invalid_argument("stability_map: resolution must be >= 1");
  if (!std::isfinite(spec.tau_min) || !std::isfinite(spec.tau_max) || !std::isfinite(spec.y_min) || !std::isfinite(spec.y_max))
    throw std::invalid_argument("stability_map: ranges must be finite");
  if (spec.base.scheme == StabilityScheme::micro || spec.base.scheme == StabilityScheme::continuous)
    throw std::invalid_argument("stability_map: needs a discrete Eulerian scheme");
  StabilityMap m{spec, std::vector<MapCell>(spec.tau_n * spec.y_n)};
  auto fill_rows = [&](std::size_t from, std::size_t to) {
    for (std::size_t iy = from; iy < to; ++iy) {
      const double y = detail::axis_value(spec.y_min, spec.y_max, spec.y_n, iy);
      for (std::size_t it = 0; it < spec.tau_n; ++it)
        m.cells[iy * spec.tau_n + it] = evaluate_cell(spec, detail::axis_value(spec.tau_min, spec.tau_max, spec.tau_n, it), y);
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(spec.threads, 1, spec.y_n);
  if (workers == 1) {
    fill_rows(0, spec.y_n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (spec.y_n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t from = w * chunk, to = std::min(spec.y_n, from + chunk);
      if (from < to) pool.emplace_back(fill_rows, from, to);
    }
  }
  return m;
}

inline void write_map_csv(std::ostream& os, const StabilityMap& m) {
  os << "tau," << (m.spec.axis == MapAxis::dt ? "dt" : "rho_e")
     << ",eigen_verdict,closed_form_verdict,max_modulus_sq,argmax_mode\n";
  csv::RowWriter w(os);
  for (const auto& c : m.cells)
    w.row(c.tau, c.y, verdict_name(c.eigen), verdict_name(c.closed), c.max_modulus_sq, c.argmax_mode);
}

}  // namespace delayflow
