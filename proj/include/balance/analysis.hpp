#pragma once

#include <optional>
#include <string>
#include <vector>

#include "balance/errors.hpp"

namespace balance {

// Inputs to the closed-form attack analysis. Powers are hashes per second,
// difficulty is hashes per block, tau is seconds. rho is the attacker's
// fraction of the total mining power t; the k partition classes share the
// remaining (1-rho)t equally.
struct BoundInputs {
  double rho = 0.0;
  double total_power = 0.0;  // t
  double difficulty = 0.0;   // d
  double tau = 0.0;
  int k = 2;
  // Concentration parameter for the general-k bound; derived when absent.
  std::optional<double> delta;
  // Probability that a correct miner extends the current longest branch
  // (longest-branch variant only).
  std::optional<double> pi;
};

struct Means {
  double mu_c = 0.0;  // expected blocks per partition class over tau
  double mu_m = 0.0;  // expected attacker blocks over tau
};

// mu_c = (1-rho) t tau / (k d),  mu_m = rho t tau / d.
Means expected_means(const BoundInputs& in);

// Lower bound on the probability that the attacker outweighs the class
// imbalance under the heaviest-subtree rule, k = 2 only:
//   1 - 4 exp(-4 rho^2 mu_c / (3 (1-rho)^2)).
// Returned raw; values <= 0 mean the bound is vacuous. Display layers clamp.
double ghost_success_bound(const BoundInputs& in);

struct BoundReport {
  double mu_c = 0.0;
  double mu_m = 0.0;
  double delta = 0.0;            // supplied or derived (mu_m - 1) / (2 mu_c)
  bool delta_derived = false;
  double delta_threshold = 0.0;  // 2 delta mu_c
  // Pr[Delta < 2 delta mu_c] > 1 - 2k exp(-delta^2 mu_c / 3)
  double threshold_bound = 0.0;
  // Pr[Delta < mu_m] > 1 - 2k exp(-(mu_m - 1)^2 / (12 mu_c)); only defined
  // when mu_m > 1.
  std::optional<double> mu_m_bound;
  std::string formula_used;
};

// General-k concentration report. With k = 2 and delta = 2 rho / (1 - rho)
// the threshold bound coincides with ghost_success_bound exactly.
BoundReport general_k_bounds(const BoundInputs& in);

// Expected attacker-relevant class mean under the longest-branch variant:
// (1-rho) t tau / (2 d pi). Requires pi and k = 2.
double bitcoin_mean(const BoundInputs& in);

// Exact Pr[|X1 - X2| < threshold] for independent X1, X2 ~ Binomial(n, p),
// by direct convolution of the two pmfs. This is the independent oracle the
// Chernoff-style bounds are checked against. n is capped at 5000.
double exact_delta_tail(int n, double p, double threshold);

struct SweepPoint {
  double x = 0.0;
  double bound = 0.0;  // raw, may be <= 0
  bool vacuous = false;
};

enum class SweepAxis { tau, rho, d };

// ghost_success_bound as one input axis varies over [from, to] inclusive in
// steps of step; the other inputs come from base.
std::vector<SweepPoint> curve_sweep(const BoundInputs& base, SweepAxis axis, double from,
                                    double to, double step);

}  // namespace balance
