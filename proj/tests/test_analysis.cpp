#include <cmath>

#include "balance/analysis.hpp"
#include "doctest.h"

using namespace balance;

namespace {

BoundInputs reference() {
  BoundInputs in;
  in.rho = 0.12;
  in.total_power = 20e6;
  in.difficulty = 30e6;
  in.tau = 1180.0;
  in.k = 2;
  return in;
}

}  // namespace

TEST_CASE("expected class and attacker block counts") {
  Means m = expected_means(reference());
  CHECK(m.mu_c == doctest::Approx(346.1333333333333).epsilon(1e-12));
  CHECK(m.mu_m == doctest::Approx(94.4).epsilon(1e-12));

  BoundInputs k3 = reference();
  k3.k = 3;
  CHECK(expected_means(k3).mu_c == doctest::Approx(346.1333333333333 * 2.0 / 3.0).epsilon(1e-12));
  CHECK(expected_means(k3).mu_m == doctest::Approx(94.4).epsilon(1e-12));
}

TEST_CASE("input validation for the closed forms") {
  BoundInputs in = reference();
  in.rho = 1.0;
  CHECK_THROWS_AS(expected_means(in), InvalidConfig);
  in = reference();
  in.total_power = 0.0;
  CHECK_THROWS_AS(expected_means(in), InvalidConfig);
  in = reference();
  in.difficulty = 0.0;
  CHECK_THROWS_AS(expected_means(in), InvalidConfig);
  in = reference();
  in.tau = -1.0;
  CHECK_THROWS_AS(expected_means(in), InvalidConfig);
  in = reference();
  in.k = 1;
  CHECK_THROWS_AS(expected_means(in), WrongK);
  in = reference();
  in.k = 3;
  CHECK_THROWS_AS(ghost_success_bound(in), WrongK);
}

TEST_CASE("two-subgraph success bound") {
  CHECK(ghost_success_bound(reference()) ==
        doctest::Approx(0.9992500648491445).epsilon(1e-12));

  // Matches the closed form evaluated by hand.
  BoundInputs in = reference();
  double mu_c = 346.1333333333333;
  double expect = 1.0 - 4.0 * std::exp(-4.0 * 0.12 * 0.12 * mu_c / (3.0 * 0.88 * 0.88));
  CHECK(ghost_success_bound(in) == doctest::Approx(expect).epsilon(1e-12));

  // A short delay leaves the bound vacuous (raw value at or below zero).
  in.tau = 100.0;
  CHECK(ghost_success_bound(in) == doctest::Approx(-0.9329003248).epsilon(1e-8));
}

TEST_CASE("general concentration report with a derived margin") {
  BoundReport r = general_k_bounds(reference());
  CHECK(r.mu_c == doctest::Approx(346.1333333333333).epsilon(1e-12));
  CHECK(r.mu_m == doctest::Approx(94.4).epsilon(1e-12));
  CHECK(r.delta_derived);
  CHECK(r.delta == doctest::Approx(0.1349191063174114).epsilon(1e-12));
  CHECK(r.delta_threshold == doctest::Approx(93.4).epsilon(1e-12));
  CHECK(r.threshold_bound == doctest::Approx(0.510292200786644).epsilon(1e-10));
  REQUIRE(r.mu_m_bound.has_value());
  // With the derived margin the two bound forms coincide.
  CHECK(*r.mu_m_bound == doctest::Approx(r.threshold_bound).epsilon(1e-12));
}

TEST_CASE("general report with an explicit margin matches the two-class bound") {
  BoundInputs in = reference();
  in.delta = 2.0 * in.rho / (1.0 - in.rho);
  BoundReport r = general_k_bounds(in);
  CHECK_FALSE(r.delta_derived);
  CHECK(r.threshold_bound == doctest::Approx(ghost_success_bound(reference())).epsilon(1e-12));
}

TEST_CASE("general report covers k above two") {
  BoundInputs in = reference();
  in.k = 3;
  in.delta = 0.25;
  BoundReport r = general_k_bounds(in);
  double mu_c = 0.88 * 20e6 * 1180.0 / (3.0 * 30e6);
  CHECK(r.mu_c == doctest::Approx(mu_c).epsilon(1e-12));
  CHECK(r.threshold_bound ==
        doctest::Approx(1.0 - 6.0 * std::exp(-0.25 * 0.25 * mu_c / 3.0)).epsilon(1e-12));
  CHECK(r.delta_threshold == doctest::Approx(2.0 * 0.25 * mu_c).epsilon(1e-12));
}

TEST_CASE("the margin cannot be derived when the attacker mean is too small") {
  BoundInputs in = reference();
  in.tau = 0.1;  // expected attacker blocks fall below one
  CHECK_THROWS_AS(general_k_bounds(in), DegenerateAttacker);
  in.delta = 0.5;
  BoundReport r = general_k_bounds(in);
  CHECK_FALSE(r.mu_m_bound.has_value());
  in.delta = 0.0;
  CHECK_THROWS_AS(general_k_bounds(in), InvalidConfig);
}

TEST_CASE("longest-branch class mean") {
  BoundInputs in = reference();
  in.pi = 0.8;
  CHECK(bitcoin_mean(in) == doctest::Approx(432.6666666666667).epsilon(1e-12));
  in.pi.reset();
  CHECK_THROWS_AS(bitcoin_mean(in), MissingPi);
  in.pi = 1.5;
  CHECK_THROWS_AS(bitcoin_mean(in), InvalidConfig);
  in.pi = 0.8;
  in.k = 3;
  CHECK_THROWS_AS(bitcoin_mean(in), WrongK);
}

TEST_CASE("exact spread tail by convolution") {
  // Binomial(2, 1/2): P(X1 == X2) = 3/8, P(|X1 - X2| < 2) adds the four
  // one-apart pairs for 7/8.
  CHECK(exact_delta_tail(2, 0.5, 1.0) == doctest::Approx(0.375).epsilon(1e-12));
  CHECK(exact_delta_tail(2, 0.5, 2.0) == doctest::Approx(0.875).epsilon(1e-12));
  CHECK(exact_delta_tail(2, 0.5, 0.0) == doctest::Approx(0.0));
  CHECK(exact_delta_tail(2, 0.5, 3.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(exact_delta_tail(5, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));

  // Independent cross-check against the pmf of Binomial(4, 1/4).
  double p = 0.25, q = 0.75;
  double pmf[5];
  double coef[5] = {1, 4, 6, 4, 1};
  double same = 0.0;
  for (int i = 0; i <= 4; ++i) {
    pmf[i] = coef[i] * std::pow(p, i) * std::pow(q, 4 - i);
    same += pmf[i] * pmf[i];
  }
  CHECK(exact_delta_tail(4, 0.25, 1.0) == doctest::Approx(same).epsilon(1e-12));

  CHECK_THROWS_AS(exact_delta_tail(0, 0.5, 1.0), InvalidConfig);
  CHECK_THROWS_AS(exact_delta_tail(5001, 0.5, 1.0), TooLarge);
  CHECK_THROWS_AS(exact_delta_tail(5, 0.0, 1.0), InvalidConfig);
  CHECK_THROWS_AS(exact_delta_tail(5, 1.5, 1.0), InvalidConfig);
}

TEST_CASE("curve sweeps cover the axis inclusively and flag vacuous points") {
  BoundInputs base = reference();
  std::vector<SweepPoint> pts = curve_sweep(base, SweepAxis::tau, 100.0, 600.0, 100.0);
  REQUIRE(pts.size() == 6);
  CHECK(pts.front().x == doctest::Approx(100.0));
  CHECK(pts.back().x == doctest::Approx(600.0));
  CHECK(pts.front().vacuous);
  CHECK_FALSE(pts.back().vacuous);
  for (const SweepPoint& pt : pts) {
    BoundInputs probe = base;
    probe.tau = pt.x;
    CHECK(pt.bound == doctest::Approx(ghost_success_bound(probe)).epsilon(1e-12));
  }

  std::vector<SweepPoint> rho_pts = curve_sweep(base, SweepAxis::rho, 0.05, 0.25, 0.05);
  REQUIRE(rho_pts.size() == 5);
  for (const SweepPoint& pt : rho_pts) {
    BoundInputs probe = base;
    probe.rho = pt.x;
    CHECK(pt.bound == doctest::Approx(ghost_success_bound(probe)).epsilon(1e-12));
  }

  std::vector<SweepPoint> d_pts = curve_sweep(base, SweepAxis::d, 10e6, 30e6, 10e6);
  REQUIRE(d_pts.size() == 3);
  CHECK(d_pts.front().bound > d_pts.back().bound);

  std::vector<SweepPoint> single = curve_sweep(base, SweepAxis::tau, 1180.0, 1180.0, 5.0);
  REQUIRE(single.size() == 1);
  CHECK(single[0].bound == doctest::Approx(ghost_success_bound(base)).epsilon(1e-12));

  CHECK_THROWS_AS(curve_sweep(base, SweepAxis::tau, 100.0, 600.0, 0.0), InvalidConfig);
  CHECK_THROWS_AS(curve_sweep(base, SweepAxis::tau, 600.0, 100.0, 100.0), InvalidConfig);
}
