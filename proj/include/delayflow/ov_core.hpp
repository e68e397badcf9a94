#pragma once

// Fundamental-diagram primitives: optimal-velocity functions in spacing and
// density form, flow, demand/supply, the Godunov flux, the modified diagram
// with constant inhomogeneity and the hysteresis bounds V+ / V-.
//
// Conventions used throughout the library:
//   * V(rho) := W(1/rho) for every rho != 0 and V(0) := V0. Negative or
//     infinite arguments therefore map to W(s <= 0) = 0, which makes the
//     delayed speed profile total (a non-positive denominator means the
//     follower is still stopped).
//   * W'(s) is 1/T on the open rising branch ell < s < ell + V0 T and 0
//     elsewhere, kinks included.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>

namespace delayflow {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

template <class FD>
concept FundamentalDiagram = requires(const FD& fd, double r) {
  { fd.v(r) } -> std::convertible_to<double>;
  { fd.v_prime(r) } -> std::convertible_to<double>;
  { fd.flow(r) } -> std::convertible_to<double>;
  { fd.demand(r) } -> std::convertible_to<double>;
  { fd.supply(r) } -> std::convertible_to<double>;
  { fd.jam_density() } -> std::convertible_to<double>;
  { fd.max_speed() } -> std::convertible_to<double>;
};

/// Three-parameter triangular diagram W(s) = max{0, min{(s - ell)/T, V0}}.
class TriangularOV {
 public:
  TriangularOV(double v0, double ell, double t_gap) : v0_(v0), ell_(ell), t_gap_(t_gap) {
    if (!(v0 > 0.0) || !std::isfinite(v0)) throw std::invalid_argument("TriangularOV: v0 must be > 0");
    if (!(ell >= 0.0) || !std::isfinite(ell)) throw std::invalid_argument("TriangularOV: ell must be >= 0");
    if (!(t_gap > 0.0) || !std::isfinite(t_gap)) throw std::invalid_argument("TriangularOV: t_gap must be > 0");
  }

  double v0() const noexcept { return v0_; }
  double ell() const noexcept { return ell_; }
  double t_gap() const noexcept { return t_gap_; }

  double w(double s) const noexcept { return std::max(0.0, std::min((s - ell_) / t_gap_, v0_)); }

  double w_prime(double s) const noexcept {
    return (s > ell_ && s < ell_ + v0_ * t_gap_) ? 1.0 / t_gap_ : 0.0;
  }

  double v(double rho) const noexcept { return rho == 0.0 ? v0_ : w(1.0 / rho); }

  // d/drho W(1/rho) = -W'(1/rho) / rho^2
  double v_prime(double rho) const noexcept {
    if (rho <= 0.0) return 0.0;
    return -w_prime(1.0 / rho) / (rho * rho);
  }

  double flow(double rho) const noexcept { return rho * v(rho); }

  double critical_density() const noexcept { return 1.0 / (ell_ + v0_ * t_gap_); }
  double jam_density() const noexcept { return ell_ > 0.0 ? 1.0 / ell_ : kInf; }
  double max_speed() const noexcept { return v0_; }
  double capacity() const noexcept { return flow(critical_density()); }

  double demand(double rho) const noexcept {
    return rho <= critical_density() ? flow(rho) : capacity();
  }
  double supply(double rho) const noexcept {
    return rho >= critical_density() ? flow(rho) : capacity();
  }

  friend bool operator==(const TriangularOV&, const TriangularOV&) = default;

 private:
  double v0_;
  double ell_;
  double t_gap_;
};

/// Unbounded affine speed V(rho) = (1/rho - ell)/T, the linear model behind
/// the closed-form stability conditions. Its flow (1 - rho ell)/T is decreasing, so G(x, y) = (1 - y ell)/T.
/// V0 = sup V is infinite: the exact-scheme bound tau < dx/V0 does not apply.
class AffineOV {
 public:
  AffineOV(double ell, double t_gap) : ell_(ell), t_gap_(t_gap) {
    if (!(ell >= 0.0)) throw std::invalid_argument("AffineOV: ell must be >= 0");
    if (!(t_gap > 0.0)) throw std::invalid_argument("AffineOV: t_gap must be > 0");
  }

  double ell() const noexcept { return ell_; }
  double t_gap() const noexcept { return t_gap_; }

  double w(double s) const noexcept { return (s - ell_) / t_gap_; }
  double w_prime(double) const noexcept { return 1.0 / t_gap_; }
  double v(double rho) const noexcept { return (1.0 / rho - ell_) / t_gap_; }
  double v_prime(double rho) const noexcept { return -1.0 / (t_gap_ * rho * rho); }
  double flow(double rho) const noexcept { return (1.0 - rho * ell_) / t_gap_; }
  double demand(double) const noexcept { return 1.0 / t_gap_; }
  double supply(double rho) const noexcept { return flow(rho); }
  double jam_density() const noexcept { return ell_ > 0.0 ? 1.0 / ell_ : kInf; }
  double max_speed() const noexcept { return kInf; }

 private:
  double ell_;
  double t_gap_;
};

/// Generic diagram from an arbitrary non-increasing speed function. The crest
/// of the (assumed unimodal) flow is located once at construction by a dense
/// scan refined with golden-section search.
class NumericFD {
 public:
  NumericFD(std::function<double(double)> speed, double jam_density, double v0)
      : speed_(std::move(speed)), jam_(jam_density), v0_(v0) {
    if (!(jam_density > 0.0) || !std::isfinite(jam_density))
      throw std::invalid_argument("NumericFD: jam density must be finite and > 0");
    locate_crest();
  }

  double v(double rho) const { return rho == 0.0 ? v0_ : speed_(rho); }
  double v_prime(double rho) const {
    const double h = 1e-6 * std::max(rho, 1e-3);
    return (v(rho + h) - v(std::max(rho - h, 0.0))) / (rho + h - std::max(rho - h, 0.0));
  }
  double flow(double rho) const { return rho * v(rho); }
  double demand(double rho) const { return rho <= crest_ ? flow(rho) : capacity_; }
  double supply(double rho) const { return rho >= crest_ ? flow(rho) : capacity_; }
  double jam_density() const noexcept { return jam_; }
  double max_speed() const noexcept { return v0_; }
  double critical_density() const noexcept { return crest_; }
  double capacity() const noexcept { return capacity_; }

 private:
  void locate_crest() {
    constexpr int kScan = 4096;
    int best = 0;
    double best_f = -kInf;
    for (int k = 0; k <= kScan; ++k) {
      const double f = flow(jam_ * k / kScan);
      if (f > best_f) {
        best_f = f;
        best = k;
      }
    }
    double lo = jam_ * std::max(best - 1, 0) / kScan;
    double hi = jam_ * std::min(best + 1, kScan) / kScan;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * jam_; ++it) {
      const double a = hi - g * (hi - lo);
      const double b = lo + g * (hi - lo);
      if (flow(a) < flow(b)) lo = a; else hi = b;
    }
    crest_ = 0.5 * (lo + hi);
    capacity_ = std::max(flow(crest_), best_f);
  }

  std::function<double(double)> speed_;
  double jam_;
  double v0_;
  double crest_ = 0.0;
  double capacity_ = 0.0;
};

// ---------------------------------------------------------------------------
// Composite operations

template <FundamentalDiagram FD>
double godunov_flux(const FD& fd, double x, double y) {
  return std::min(fd.demand(x), fd.supply(y));
}

/// Speed of an agent (or cell) at density k_self whose predecessor sits at
/// density k_pred: V(k / (1 - k tau [V(k_pred) - V(k)])).
template <FundamentalDiagram FD>
double delayed_speed(const FD& fd, double tau, double k_pred, double k_self) {
  const double denom = 1.0 - k_self * tau * (fd.v(k_pred) - fd.v(k_self));
  return fd.v(k_self / denom);
}

/// Speed-density relation with constant inhomogeneity I: V(rho / (1 - I)).
template <FundamentalDiagram FD>
double modified_fd(const FD& fd, double rho, double inhom) {
  if (!(inhom < 1.0)) throw std::domain_error("modified_fd: inhomogeneity must be < 1");
  return fd.v(rho / (1.0 - inhom));
}

/// Upper hysteresis bound V+(rho) = V(rho / (1 + tau rho V(rho))): a vehicle at
/// maximal speed behind a stopped one.
template <FundamentalDiagram FD>
double bound_upper(const FD& fd, double tau, double rho) {
  const double denom = 1.0 + tau * rho * fd.v(rho);
  if (denom <= 0.0) return 0.0;
  return fd.v(rho / denom);
}

/// Lower hysteresis bound V-(rho) = V(rho / (1 - tau rho (V0 - V(rho)))): a
/// stopped vehicle behind one at maximal speed. A non-positive denominator
/// means the follower has not started yet and yields 0.
template <FundamentalDiagram FD>
double bound_lower(const FD& fd, double tau, double rho) {
  const double denom = 1.0 - tau * rho * (fd.max_speed() - fd.v(rho));
  if (denom <= 0.0) return 0.0;
  return fd.v(rho / denom);
}

}  // namespace delayflow
