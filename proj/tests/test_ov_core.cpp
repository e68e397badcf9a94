#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "delayflow/ov_core.hpp"
#include "oracles.hpp"

using namespace delayflow;
using Catch::Approx;

namespace {
const TriangularOV ov(2.0, 1.0, 1.0);
const oracle::Tri ref{2.0, 1.0, 1.0};
}  // namespace

TEST_CASE("optimal velocity on spacings") {
  CHECK(ov.w(1.0) == 0.0);
  CHECK(ov.w(0.5) == 0.0);
  CHECK(ov.w(2.0) == 1.0);
  CHECK(ov.w(10.0) == 2.0);
  CHECK(ov.w(0.0) == 0.0);
}

TEST_CASE("slope of W is 1/T on the rising branch only") {
  CHECK(ov.w_prime(1.5) == 1.0);
  CHECK(ov.w_prime(0.2) == 0.0);
  CHECK(ov.w_prime(3.0) == 0.0);
  CHECK(ov.w_prime(1.0) == 0.0);
  CHECK(TriangularOV(2.0, 1.0, 4.0).w_prime(2.0) == 0.25);
}

TEST_CASE("speed on densities") {
  CHECK(ov.v(1.0) == 0.0);
  CHECK(ov.v(1.0 / 3.0) == Approx(2.0).epsilon(1e-15));
  CHECK(ov.v(0.5) == 1.0);
  CHECK(ov.v(0.0) == 2.0);
  CHECK(ov.v(1.5) == 0.0);
}

TEST_CASE("flow and its crest") {
  CHECK(ov.flow(0.0) == 0.0);
  CHECK(ov.flow(1.0) == 0.0);
  // crest located by a dense scan of the reference flow
  double best = 0.0, arg = 0.0;
  for (int k = 0; k <= 1000000; ++k) {
    const double r = k * 1e-6;
    if (ref.Q(r) > best) {
      best = ref.Q(r);
      arg = r;
    }
  }
  CHECK(ov.capacity() == Approx(best).margin(1e-6));
  CHECK(ov.critical_density() == Approx(arg).margin(2e-6));
  CHECK(ov.flow(1.0 / 3.0) == Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("demand and supply against brute-force maxima") {
  CHECK(ov.demand(0.8) == Approx(oracle::brute_demand(ref, 0.8)).margin(1e-9));
  CHECK(ov.demand(0.8) == Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(ov.supply(0.8) == Approx(oracle::brute_supply(ref, 0.8)).margin(1e-9));
  CHECK(ov.supply(0.8) == Approx(0.2).epsilon(1e-14));
  const double rc = ov.critical_density();
  CHECK(ov.demand(rc) == Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(ov.supply(rc) == Approx(2.0 / 3.0).epsilon(1e-15));

  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double r = u(gen);
    REQUIRE(ov.demand(r) == Approx(oracle::brute_demand(ref, r, 2001)).margin(1e-9));
    REQUIRE(ov.supply(r) == Approx(oracle::brute_supply(ref, r, 2001)).margin(1e-9));
    REQUIRE(std::max(ov.demand(r), ov.supply(r)) >= ov.flow(r));
  }
}

TEST_CASE("monotonicity over sampled pairs") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0), s(0.0, 6.0);
  for (int k = 0; k < 10000; ++k) {
    double a = u(gen), b = u(gen);
    if (a > b) std::swap(a, b);
    REQUIRE(ov.v(a) >= ov.v(b));
    REQUIRE(ov.demand(a) <= ov.demand(b));
    REQUIRE(ov.supply(a) >= ov.supply(b));
    double p = s(gen), q = s(gen);
    if (p > q) std::swap(p, q);
    REQUIRE(ov.w(p) <= ov.w(q));
    REQUIRE(ov.w(q) - ov.w(p) <= (q - p) / ov.t_gap() + 1e-15);
  }
}

TEST_CASE("Godunov flux") {
  for (double r : {0.0, 1.0 / 3.0, 1.0}) CHECK(godunov_flux(ov, r, r) == ov.flow(r));
  CHECK(godunov_flux(ov, 1.0 / 3.0, 1.0) == 0.0);
  CHECK(godunov_flux(ov, 1.0 / 3.0, 1.0) == oracle::G(ref, 1.0 / 3.0, 1.0));

  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const double x = u(gen), y = u(gen);
    REQUIRE(godunov_flux(ov, x, x) == ov.flow(x));
    REQUIRE(godunov_flux(ov, x, y) == Approx(oracle::G(ref, x, y)).margin(1e-15));
  }

  const AffineOV aff(1.0, 1.0);
  CHECK(godunov_flux(aff, 0.3, 0.4) == Approx(0.6).epsilon(1e-15));
  CHECK(godunov_flux(aff, 0.9, 0.25) == Approx(0.75).epsilon(1e-15));
}

TEST_CASE("modified diagram with constant inhomogeneity") {
  CHECK(modified_fd(ov, 0.5, 0.0) == 1.0);
  CHECK(modified_fd(ov, 0.5, 0.3) == Approx(0.4).epsilon(1e-14));
  CHECK(modified_fd(ov, 0.5, -0.3) == Approx(1.6).epsilon(1e-14));
  CHECK(modified_fd(ov, 0.5, 0.3) == ov.v(0.5 / 0.7));
  CHECK_THROWS_AS(modified_fd(ov, 0.5, 1.0), std::domain_error);
  CHECK_THROWS_AS(modified_fd(ov, 0.5, 2.0), std::domain_error);
}

TEST_CASE("hysteresis bounds") {
  for (double r : {0.1, 0.4, 0.7, 1.0}) {
    CHECK(bound_upper(ov, 0.0, r) == ov.v(r));
    CHECK(bound_lower(ov, 0.0, r) == ov.v(r));
  }
  CHECK(bound_upper(ov, 1.0, 1.0) == 0.0);
  CHECK(bound_lower(ov, 1.0, 1.0) == 0.0);
  CHECK(bound_upper(ov, 1.0, 0.5) == Approx(2.0).epsilon(1e-14));
  CHECK(bound_upper(ov, 1.0, 0.5) == ov.v(0.5 / 1.5));

  for (int k = 1; k <= 10000; ++k) {
    const double r = k * 1e-4;
    REQUIRE(bound_lower(ov, 1.0, r) <= ov.v(r));
    REQUIRE(ov.v(r) <= bound_upper(ov, 1.0, r));
  }
}

TEST_CASE("delayed speed profile") {
  CHECK(delayed_speed(ov, 0.0, 0.2, 0.5) == ov.v(0.5));
  CHECK(delayed_speed(ov, 1.0, 0.5, 0.5) == ov.v(0.5));
  CHECK(delayed_speed(ov, 1.0, 1.0, 0.5) == bound_upper(ov, 1.0, 0.5));
  CHECK(delayed_speed(ov, 1.0, 0.0, 0.4) == bound_lower(ov, 1.0, 0.4));
  // delayed speed equals W of the anticipated spacing 1/k - tau (V(k1) - V(k))
  CHECK(delayed_speed(ov, 1.0, 0.4, 0.5) == Approx(ref.W(2.0 - (ref.V(0.4) - ref.V(0.5)))).epsilon(1e-14));
}

TEST_CASE("diagram validation") {
  CHECK_THROWS(TriangularOV(0.0, 1.0, 1.0));
  CHECK_THROWS(TriangularOV(2.0, -1.0, 1.0));
  CHECK_THROWS(TriangularOV(2.0, 1.0, 0.0));
  CHECK_NOTHROW(TriangularOV(2.0, 0.0, 1.0));
}

TEST_CASE("numeric diagram follows the triangular one") {
  const NumericFD num([](double r) { return std::max(0.0, std::min(2.0, 1.0 / r - 1.0)); }, 1.0, 2.0);
  CHECK(num.critical_density() == Approx(1.0 / 3.0).margin(1e-7));
  CHECK(num.capacity() == Approx(2.0 / 3.0).margin(1e-9));
  for (double r : {0.1, 0.3, 0.5, 0.9}) {
    CHECK(num.demand(r) == Approx(ov.demand(r)).margin(1e-8));
    CHECK(num.supply(r) == Approx(ov.supply(r)).margin(1e-8));
  }
  CHECK(num.v_prime(0.5) == Approx(ov.v_prime(0.5)).epsilon(1e-5));
}
