#pragma once

// Follow-the-leader dynamics on a periodic ring.
//
//   first order with reaction time:  x_i' = W(dx_i - tau [W(dx_{i+1}) - W(dx_i)])
//   delayed reference model:          x_i'(t) = W(dx_i(t - tau))
//   spacing (Lagrangian) form:        d/dt (1/rho_i) = Vt(rho_{i+2}, rho_{i+1}) - Vt(rho_{i+1}, rho_i)
//
// All integrators are explicit Euler with a synchronous update: every speed of
// a step is computed from the pre-step state.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "delayflow/csv.hpp"
#include "delayflow/errors.hpp"
#include "delayflow/ov_core.hpp"
#include "delayflow/rng.hpp"

namespace delayflow {

enum class InitKind { homogeneous, jam, random, perturbed };
enum class MicroModel { first_order, newell_delayed };
enum class CollisionPolicy { abort, clamp };

struct RingConfig {
  double ring_length = 101.0;
  std::size_t n_agents = 50;
  double tau = 1.0;  // reaction time (> 0) or anticipation time (< 0)
  double dt = 0.01;
  TriangularOV ov{2.0, 1.0, 1.0};
  std::uint64_t seed = 1;
  double jam_gap = 0.05;      // packed-block spacing is ell + jam_gap
  double perturbation = 0.1;  // backward displacement of agent 1
  MicroModel model = MicroModel::first_order;
  CollisionPolicy collision = CollisionPolicy::abort;
  std::size_t record_stride = 100;

  double mean_spacing() const { return ring_length / static_cast<double>(n_agents); }

  void validate() const {
    if (n_agents < 2) throw ConfigError("ring: need at least 2 agents");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("ring: dt must be > 0");
    if (!std::isfinite(tau)) throw ConfigError("ring: tau must be finite");
    if (!(ring_length > 0.0) || !std::isfinite(ring_length)) throw ConfigError("ring: L must be > 0");
    if (ov.ell() > 0.0 && !(ring_length > static_cast<double>(n_agents) * ov.ell()))
      throw ConfigError("ring: L must exceed N * ell");
    if (record_stride == 0) throw ConfigError("ring: record_stride must be >= 1");
    if (jam_gap < 0.0) throw ConfigError("ring: jam_gap must be >= 0");
  }
};

struct MicroState {
  double t = 0.0;
  std::int64_t step = 0;
  double ring_length = 0.0;
  std::vector<double> x;  // cyclically ordered, each in [0, L)
  std::size_t clamped = 0;

  std::size_t size() const noexcept { return x.size(); }

  // Distance from agent i to its predecessor i+1 (mod N) along the ring.
  double spacing(std::size_t i) const {
    const std::size_t j = (i + 1) % x.size();
    double d = x[j] - x[i];
    if (d < 0.0) d += ring_length;
    return d;
  }

  std::vector<double> spacings() const {
    std::vector<double> s(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) s[i] = spacing(i);
    return s;
  }
};

namespace detail {

inline double wrap(double x, double length) {
  if (x >= length) x -= length;
  if (x >= length || x < 0.0) x -= length * std::floor(x / length);
  if (x >= length) x = 0.0;
  return x;
}

inline MicroState from_spacings(std::span<const double> s, double length) {
  MicroState st;
  st.ring_length = length;
  st.x.resize(s.size());
  double pos = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    st.x[i] = pos;
    pos += s[i];
  }
  return st;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Initial conditions

inline MicroState init_homogeneous(const RingConfig& cfg) {
  cfg.validate();
  std::vector<double> s(cfg.n_agents, cfg.mean_spacing());
  MicroState st;
  st.ring_length = cfg.ring_length;
  st.x.resize(cfg.n_agents);
  for (std::size_t i = 0; i < cfg.n_agents; ++i)
    st.x[i] = static_cast<double>(i) * cfg.ring_length / static_cast<double>(cfg.n_agents);
  return st;
}

// Packed block at spacing ell + jam_gap; the residual gap lies ahead of the
// block head (agent N-1).
inline MicroState init_jam(const RingConfig& cfg) {
  cfg.validate();
  const double packed = cfg.ov.ell() + cfg.jam_gap;
  const double residual = cfg.ring_length - static_cast<double>(cfg.n_agents - 1) * packed;
  if (residual < cfg.ov.ell())
    throw ConfigError("jam: residual gap " + std::to_string(residual) + " is below ell");
  MicroState st;
  st.ring_length = cfg.ring_length;
  st.x.resize(cfg.n_agents);
  for (std::size_t i = 0; i < cfg.n_agents; ++i) st.x[i] = static_cast<double>(i) * packed;
  return st;
}

// Spacings i.i.d. uniform on [ell, 2L/N - ell], rescaled to sum L, clipped at
// ell; the mass added by clipping is taken from the largest gap.
inline MicroState init_random(const RingConfig& cfg) {
  cfg.validate();
  const double ell = cfg.ov.ell();
  const std::size_t n = cfg.n_agents;
  SplitMix64 rng(cfg.seed);
  std::vector<double> s(n);
  const double hi = 2.0 * cfg.mean_spacing() - ell;
  for (auto& v : s) v = rng.uniform(ell, hi);
  double total = 0.0;
  for (double v : s) total += v;
  const double scale = cfg.ring_length / total;
  double excess = 0.0;
  for (auto& v : s) {
    v *= scale;
    if (v < ell) {
      excess += ell - v;
      v = ell;
    }
  }
  if (excess > 0.0) {
    auto largest = std::max_element(s.begin(), s.end());
    if (*largest - excess < ell) throw ConfigError("random: cannot clip spacings at ell and keep the ring length");
    *largest -= excess;
  }
  // Close the ring exactly: the last spacing absorbs the rounding residue.
  double partial = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) partial += s[i];
  s[n - 1] = cfg.ring_length - partial;
  return detail::from_spacings(s, cfg.ring_length);
}

// Homogeneous configuration with agent 1 displaced backward by `perturbation`.
inline MicroState init_perturbed(const RingConfig& cfg) {
  MicroState st = init_homogeneous(cfg);
  const double d = cfg.mean_spacing();
  if (cfg.perturbation >= d - cfg.ov.ell() || cfg.perturbation <= -(d - cfg.ov.ell()))
    throw ConfigError("perturbed: displacement would violate the minimum spacing");
  st.x[1] -= cfg.perturbation;
  return st;
}

inline MicroState init_state(const RingConfig& cfg, InitKind kind) {
  switch (kind) {
    case InitKind::homogeneous: return init_homogeneous(cfg);
    case InitKind::jam: return init_jam(cfg);
    case InitKind::random: return init_random(cfg);
    case InitKind::perturbed: return init_perturbed(cfg);
  }
  throw ConfigError("unknown initial condition");
}

// ---------------------------------------------------------------------------
// First-order model with reaction time

inline std::vector<double> speeds(const MicroState& st, const RingConfig& cfg) {
  const std::size_t n = st.size();
  const auto s = st.spacings();
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = cfg.ov.w(s[i]);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = cfg.ov.w(s[i] - cfg.tau * (w[(i + 1) % n] - w[i]));
  return v;
}

namespace detail {

inline MicroState advance(const MicroState& st, std::span<const double> v, const RingConfig& cfg) {
  MicroState next;
  next.ring_length = st.ring_length;
  next.step = st.step + 1;
  next.t = static_cast<double>(next.step) * cfg.dt;
  next.clamped = st.clamped;
  next.x.resize(st.size());
  for (std::size_t i = 0; i < st.size(); ++i) next.x[i] = wrap(st.x[i] + cfg.dt * v[i], st.ring_length);

  const double ell = cfg.ov.ell();
  for (std::size_t i = 0; i < next.size(); ++i) {
    const double s = next.spacing(i);
    if (s >= ell) continue;
    if (cfg.collision == CollisionPolicy::abort) throw CollisionError(i, next.t, s);
    // Clamp: pull the follower back, then re-check upstream agents.
    std::size_t k = i;
    for (std::size_t guard = 0; guard < next.size() && next.spacing(k) < ell; ++guard) {
      const std::size_t lead = (k + 1) % next.size();
      next.x[k] = wrap(next.x[lead] - ell + next.ring_length, next.ring_length);
      ++next.clamped;
      k = (k + next.size() - 1) % next.size();
    }
  }
  return next;
}

}  // namespace detail

inline MicroState step_euler(const MicroState& st, const RingConfig& cfg) {
  const auto v = speeds(st, cfg);
  return detail::advance(st, v, cfg);
}

// ---------------------------------------------------------------------------
// Delayed reference model

/// Spacing snapshots covering at least [t - tau, t]. Lookups between
/// snapshots interpolate linearly in time.
class HistoryBuffer {
 public:
  explicit HistoryBuffer(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 2)) {}

  // History that has been at `st` for all times in [st.t - tau - dt, st.t].
  static HistoryBuffer constant_past(const MicroState& st, double tau, double dt, std::size_t extra = 0) {
    const auto k = static_cast<std::size_t>(std::ceil(std::max(tau, 0.0) / dt)) + 2;
    HistoryBuffer h(k + extra);
    const auto s = st.spacings();
    for (std::size_t j = k; j-- > 0;) h.push(st.t - static_cast<double>(j) * dt, s);
    return h;
  }

  void push(double t, std::vector<double> spacings) {
    if (!snaps_.empty() && !(t > snaps_.back().t)) throw HistoryError("history: snapshot times must increase");
    snaps_.push_back({t, std::move(spacings)});
    while (snaps_.size() > capacity_) snaps_.pop_front();
  }

  std::vector<double> spacings_at(double t) const {
    if (snaps_.empty()) throw HistoryError("history: empty buffer");
    const double tol = 1e-9 * std::max(1.0, std::abs(t));
    if (t < snaps_.front().t - tol || t > snaps_.back().t + tol)
      throw HistoryError("history: t=" + std::to_string(t) + " outside [" + std::to_string(snaps_.front().t) +
                         ", " + std::to_string(snaps_.back().t) + "]");
    auto it = std::lower_bound(snaps_.begin(), snaps_.end(), t,
                               [](const Snapshot& s, double q) { return s.t < q; });
    if (it != snaps_.end() && std::abs(it->t - t) <= tol) return it->spacings;
    if (it != snaps_.begin() && std::abs(std::prev(it)->t - t) <= tol) return std::prev(it)->spacings;
    if (it == snaps_.end()) return snaps_.back().spacings;
    if (it == snaps_.begin()) return it->spacings;
    const Snapshot& b = *it;
    const Snapshot& a = *std::prev(it);
    const double w = (t - a.t) / (b.t - a.t);
    std::vector<double> out(a.spacings.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - w) * a.spacings[i] + w * b.spacings[i];
    return out;
  }

  std::size_t size() const noexcept { return snaps_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  double front_time() const { return snaps_.front().t; }
  double back_time() const { return snaps_.back().t; }

 private:
  struct Snapshot {
    double t;
    std::vector<double> spacings;
  };
  std::deque<Snapshot> snaps_;
  std::size_t capacity_;
};

inline std::vector<double> newell_speeds(const MicroState& st, const HistoryBuffer& history, const RingConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw ConfigError("delayed model requires tau > 0");
  auto s = history.spacings_at(st.t - cfg.tau);
  if (s.size() != st.size()) throw HistoryError("history: agent count mismatch");
  for (auto& v : s) v = cfg.ov.w(v);
  return s;
}

inline MicroState step_newell_delayed(const MicroState& st, HistoryBuffer& history, const RingConfig& cfg) {
  const auto v = newell_speeds(st, history, cfg);
  MicroState next = detail::advance(st, v, cfg);
  history.push(next.t, next.spacings());
  return next;
}

// ---------------------------------------------------------------------------
// Spacing form

/// One explicit Euler step of the spacing dynamics, expressed on the agent
/// densities rho_i = 1/dx_i.
inline std::vector<double> step_lagrangian_spacing(std::span<const double> rho, const RingConfig& cfg) {
  const std::size_t n = rho.size();
  for (std::size_t i = 0; i < n; ++i)
    if (!(rho[i] > 0.0) || !std::isfinite(rho[i]))
      throw ModelError("lagrangian step: density of agent " + std::to_string(i) + " must be finite and > 0");
  std::vector<double> v(n);  // v[i] = Vt(rho_{i+1}, rho_i), the speed of agent i
  for (std::size_t i = 0; i < n; ++i) v[i] = delayed_speed(cfg.ov, cfg.tau, rho[(i + 1) % n], rho[i]);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 / rho[i] + cfg.dt * (v[(i + 1) % n] - v[i]));
  return out;
}

// |tau| W'(s) < 1/2
inline bool micro_stable(const RingConfig& cfg, double s) { return std::abs(cfg.tau) * cfg.ov.w_prime(s) < 0.5; }

inline double perturbation_energy(const MicroState& st) {
  const double mean = st.ring_length / static_cast<double>(st.size());
  double e = 0.0;
  for (std::size_t i = 0; i < st.size(); ++i) {
    const double d = st.spacing(i) - mean;
    e += d * d;
  }
  return e;
}

inline double spacing_variance(const MicroState& st) { return perturbation_energy(st) / static_cast<double>(st.size()); }

// ---------------------------------------------------------------------------
// Runs

struct TrajectorySample {
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> spacing;
  std::vector<double> speed;  // speed used by the step that starts at t
};

struct TrajectoryRecord {
  double ring_length = 0.0;
  double dt = 0.0;
  std::vector<TrajectorySample> samples;
};

namespace detail {

inline TrajectorySample make_sample(const MicroState& st, std::vector<double> v) {
  return {st.t, st.x, st.spacings(), std::move(v)};
}

}  // namespace detail

/// Integrates from `start` up to `t_end`, sampling every record_stride steps
/// (the final state is always recorded).
inline TrajectoryRecord run_from(const RingConfig& cfg, const MicroState& start, double t_end) {
  cfg.validate();
  if (t_end < 0.0) throw ConfigError("run: t_end must be >= 0");
  const auto n_steps = static_cast<std::int64_t>(std::llround(t_end / cfg.dt));
  TrajectoryRecord rec{cfg.ring_length, cfg.dt, {}};
  MicroState st = start;
  const bool delayed = cfg.model == MicroModel::newell_delayed;
  HistoryBuffer history = delayed ? HistoryBuffer::constant_past(st, cfg.tau, cfg.dt) : HistoryBuffer(2);
  const auto stride = static_cast<std::int64_t>(cfg.record_stride);
  for (std::int64_t k = 0;; ++k) {
    const auto v = delayed ? newell_speeds(st, history, cfg) : speeds(st, cfg);
    if (k % stride == 0 || k == n_steps) rec.samples.push_back(detail::make_sample(st, v));
    if (k == n_steps) break;
    st = detail::advance(st, v, cfg);
    if (delayed) history.push(st.t, st.spacings());
  }
  return rec;
}

inline TrajectoryRecord run(const RingConfig& cfg, InitKind init, double t_end) {
  return run_from(cfg, init_state(cfg, init), t_end);
}

/// Max-norm spacing difference between the first-order and the delayed model
/// started from the same state, sampled every record_stride steps.
inline std::vector<std::pair<double, double>> integrator_divergence(RingConfig cfg, InitKind init, double t_end) {
  cfg.model = MicroModel::first_order;
  const auto a = run(cfg, init, t_end);
  cfg.model = MicroModel::newell_delayed;
  const auto b = run(cfg, init, t_end);
  std::vector<std::pair<double, double>> out;
  for (std::size_t k = 0; k < std::min(a.samples.size(), b.samples.size()); ++k) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.samples[k].spacing.size(); ++i)
      m = std::max(m, std::abs(a.samples[k].spacing[i] - b.samples[k].spacing[i]));
    out.emplace_back(a.samples[k].t, m);
  }
  return out;
}

inline void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec) {
  os << "t,agent,x,spacing,speed\n";
  csv::RowWriter w(os);
  for (const auto& s : rec.samples)
    for (std::size_t i = 0; i < s.x.size(); ++i) w.row(s.t, i, s.x[i], s.spacing[i], s.speed[i]);
}

}  // namespace delayflow
