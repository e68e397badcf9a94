#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "delayflow/macro_sim.hpp"
#include "oracles.hpp"

using namespace delayflow;
using Catch::Approx;

namespace {

const TriangularOV ov(2.0, 1.0, 1.0);
const oracle::Tri ref{2.0, 1.0, 1.0};

std::vector<double> random_field(std::uint64_t seed, std::size_t n, double lo, double hi) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> r(n);
  for (auto& v : r) v = u(gen);
  return r;
}

}  // namespace

TEST_CASE("flux strategies against scalar evaluation") {
  SECTION("hand-evaluated Godunov/Euler flux on the affine diagram") {
    const auto g = make_grid(AffineOV(1.0, 1.0), {0.5, 0.4, 0.45}, 2.0, 1.0, 0.01, Scheme::godunov_euler);
    CHECK(flux_f1(g, 0) == Approx(0.4).epsilon(1e-14));
  }
  SECTION("hand-evaluated exact Godunov arguments") {
    const auto g = make_grid(ov, {0.5, 0.5, 0.4, 0.45}, 2.02, 1.0, 0.01, Scheme::godunov_exact);
    const double second = 0.5 / (1.0 - (1.0 / 2.02) * (1.5 - 1.0));
    CHECK(second == Approx(0.66447).epsilon(1e-4));
    CHECK(flux_f3(g, 0) == Approx(godunov_flux(ov, 0.5, second)).epsilon(1e-14));
  }
  SECTION("random grids") {
    const auto rho = random_field(5, 40, 0.05, 0.95);
    for (double tau : {-0.7, 0.0, 0.4, 1.0}) {
      for (auto sch : {Scheme::godunov_euler, Scheme::godunov_godunov, Scheme::godunov_exact}) {
        const auto g = make_grid(ov, rho, 2.02, tau, 0.01, sch);
        for (std::size_t i = 0; i < rho.size(); ++i) {
          const long k = static_cast<long>(i);
          double want = 0.0;
          if (sch == Scheme::godunov_euler) want = oracle::flux1(ref, rho, k, tau, 2.02);
          if (sch == Scheme::godunov_godunov) want = oracle::flux2(ref, rho, k, tau, 2.02);
          if (sch == Scheme::godunov_exact) want = oracle::flux3(ref, rho, k, tau, 2.02);
          REQUIRE(boundary_flux(g, i) == Approx(want).margin(1e-14));
        }
      }
    }
  }
}

TEST_CASE("homogeneous grids are fixed points") {
  for (double r : {0.1, 1.0 / 3.0, 0.495, 0.8}) {
    for (auto sch : {Scheme::godunov_euler, Scheme::godunov_godunov, Scheme::godunov_exact}) {
      auto g = make_grid(ov, std::vector<double>(20, r), 2.02, 1.0, 0.01, sch);
      for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(boundary_flux(g, i) == ov.flow(r));
      for (int k = 0; k < 100; ++k) g = step(g);
      for (double v : g.rho) REQUIRE(v == r);
      CHECK(g.t == Approx(1.0));
    }
  }
}

TEST_CASE("tau = 0 reduces every scheme to plain Godunov") {
  const auto rho = random_field(9, 50, 0.0, 1.0);
  for (auto sch : {Scheme::godunov_euler, Scheme::godunov_godunov, Scheme::godunov_exact}) {
    const auto g = make_grid(ov, rho, 2.02, 0.0, 0.01, sch);
    for (std::size_t i = 0; i < rho.size(); ++i) REQUIRE(boundary_flux(g, i) == godunov_flux(ov, rho[i], rho[(i + 1) % 50]));
    const auto want = oracle::lwr_step(ref, rho, 2.02, 0.01);
    const auto got = step(g);
    for (std::size_t i = 0; i < rho.size(); ++i) REQUIRE(std::abs(got.rho[i] - want[i]) < 1e-12);
  }
}

TEST_CASE("mass is conserved by every scheme") {
  const auto rho = random_field(13, 50, 0.2, 0.8);
  for (auto sch : {Scheme::godunov_euler, Scheme::godunov_godunov, Scheme::godunov_exact}) {
    auto g = make_grid(ov, rho, 2.02, 0.3, 0.01, sch, BoundsPolicy::flag_only);
    const double m0 = g.mass();
    for (int k = 0; k < 10000; ++k) g = step(g);
    INFO(scheme_name(sch));
    CHECK(std::abs(g.mass() - m0) < 1e-12 * m0);
  }
}

TEST_CASE("one scheme step equals the expanded single-cell maps") {
  const AffineOV aff(1.0, 1.0);
  const double dx = 2.02, dt = 0.01, tau = 0.3;
  const oracle::Affine F{1.0, 1.0, dx, dt, tau};
  const auto rho = random_field(21, 30, 0.4, 0.6);
  auto at = [&](long i) { return oracle::at(rho, i); };
  for (auto sch : {Scheme::godunov_euler, Scheme::godunov_godunov, Scheme::godunov_exact}) {
    const auto next = step(make_grid(aff, rho, dx, tau, dt, sch));
    for (long i = 0; i < 30; ++i) {
      double want = 0.0;
      if (sch == Scheme::godunov_euler) want = F.F1(at(i), at(i + 1), at(i + 2), at(i - 1));
      if (sch == Scheme::godunov_godunov) want = F.F2(at(i), at(i + 1), at(i + 2), at(i - 1));
      if (sch == Scheme::godunov_exact) want = F.F3(at(i), at(i + 1), at(i + 2), at(i - 1));
      REQUIRE(std::abs(next.rho[static_cast<std::size_t>(i)] - want) < 1e-12);
    }
  }
}

TEST_CASE("Riemann problem travels at the Rankine-Hugoniot speed") {
  // free flow behind a congested plateau: a shock moving backward
  const double rl = 0.2, rr = 0.8, dx = 0.5, dt = 0.05;
  const double speed = (ov.flow(rr) - ov.flow(rl)) / (rr - rl);
  std::vector<double> rho(400, rl);
  for (std::size_t i = 200; i < 400; ++i) rho[i] = rr;
  auto g = make_grid(ov, rho, dx, 0.0, dt, Scheme::godunov_exact);
  auto front = [](const MacroGrid<TriangularOV>& gr) {
    // interface of the shock near the middle: first cell above the mid value
    for (std::size_t i = 100; i < 300; ++i)
      if (gr.rho[i] > 0.5) return static_cast<double>(i) * gr.dx;
    return 0.0;
  };
  const double x0 = front(g);
  for (int block = 1; block <= 8; ++block) {
    for (int k = 0; k < 50; ++k) g = step(g);
    const double predicted = x0 + speed * g.t;
    REQUIRE(std::abs(front(g) - predicted) <= dx * block);
  }
  CHECK(std::abs(front(g) - (x0 + speed * g.t)) <= 2 * dx);
}

TEST_CASE("exact Godunov keeps densities bounded under its CFL condition") {
  auto rho = random_field(17, 50, 0.0, 1.0);
  auto g = make_grid(ov, rho, 2.02, 1.0, 0.01, Scheme::godunov_exact);
  for (int k = 0; k < 20000; ++k) {
    g = step(g);
    for (double v : g.rho) REQUIRE((v >= 0.0 && v <= 1.0));
  }
}

TEST_CASE("bounds violations and CFL failures") {
  SECTION("Godunov/Euler with tau > 0 leaves [0, 1/ell]") {
    std::vector<double> rho(50, 0.1);
    for (std::size_t i = 20; i < 30; ++i) rho[i] = 0.98;
    auto g = make_grid(ov, rho, 2.02, 1.0, 0.01, Scheme::godunov_euler);
    bool thrown = false;
    try {
      for (int k = 0; k < 2000; ++k) g = step(g);
    } catch (const BoundsViolation& e) {
      thrown = true;
      CHECK(e.cell() < 50);
    }
    CHECK(thrown);
    auto h = make_grid(ov, rho, 2.02, 1.0, 0.01, Scheme::godunov_euler, BoundsPolicy::clamp_and_flag);
    for (int k = 0; k < 2000; ++k) h = step(h);
    CHECK(h.bound_flags > 0);
    for (double v : h.rho) CHECK((v >= 0.0 && v <= 1.0));
  }
  SECTION("exact Godunov beyond dx/V0 hits a singular denominator") {
    std::vector<double> rho(10, 0.9);
    rho[5] = 0.0;
    const auto g = make_grid(ov, rho, 1.0, 0.8, 0.01, Scheme::godunov_exact);
    CHECK_THROWS_AS(step(g), CflViolation);
    try {
      step(g);
    } catch (const CflViolation& e) {
      CHECK(e.cell() == 4);
    }
  }
  SECTION("grid validation") {
    CHECK_THROWS_AS(make_grid(ov, {0.1, 0.2}, 1.0, 0.0, 0.01, Scheme::godunov_exact), ConfigError);
    CHECK_THROWS_AS(make_grid(ov, {0.1, -0.2, 0.3}, 1.0, 0.0, 0.01, Scheme::godunov_exact), ConfigError);
    CHECK_THROWS_AS(make_grid(ov, {0.1, 0.2, 0.3}, 0.0, 0.0, 0.01, Scheme::godunov_exact), ConfigError);
  }
}

TEST_CASE("boundedness verdicts") {
  CHECK_FALSE(check_bounds_map(Scheme::godunov_euler, ov, 1.0, 2.02, 0.495).guaranteed);
  CHECK(check_bounds_map(Scheme::godunov_euler, ov, -0.5, 2.02, 0.495).guaranteed);
  CHECK(check_bounds_map(Scheme::godunov_exact, ov, 1.0, 2.02, 0.495).guaranteed);
  CHECK_FALSE(check_bounds_map(Scheme::godunov_exact, ov, 1.01, 2.02, 0.495).guaranteed);
  for (auto sch : {Scheme::godunov_euler, Scheme::godunov_godunov, Scheme::godunov_exact})
    CHECK(check_bounds_map(sch, ov, 0.0, 2.02, 0.495).guaranteed);
  // W'(1/rho_e) = 1/T on the rising branch: bound -dx rho_e T
  CHECK(check_bounds_map(Scheme::godunov_godunov, ov, -0.99, 2.02, 0.495).guaranteed);
  CHECK_FALSE(check_bounds_map(Scheme::godunov_godunov, ov, -1.01, 2.02, 0.495).guaranteed);
}

TEST_CASE("density records") {
  auto g = make_grid(ov, random_field(1, 10, 0.2, 0.6), 1.0, 0.5, 0.01, Scheme::godunov_exact);
  const auto rec = run_macro(g, 1.0, 20);
  CHECK(rec.times.size() == 6);
  CHECK(rec.times.back() == Approx(1.0));
  std::ostringstream os;
  write_density_csv(os, rec, ov, 0.5);
  CHECK(os.str().rfind("t,cell,rho,speed,flow\n", 0) == 0);
  std::ostringstream hm;
  write_heatmap_csv(hm, rec);
  const auto text = hm.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);
  CHECK(std::count(text.begin(), text.begin() + static_cast<long>(text.find('\n')), ',') == 9);
  CHECK(run_macro(g, 0.0, 5).times.size() == 1);
}
