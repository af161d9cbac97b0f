#include "balance/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace balance {

namespace {

void check_common(const BoundInputs& in) {
  if (!(in.rho >= 0.0) || !(in.rho < 1.0)) throw InvalidConfig("rho must lie in [0, 1)");
  if (!(in.total_power > 0.0)) throw InvalidConfig("total power must be positive");
  if (!(in.difficulty > 0.0)) throw InvalidConfig("difficulty must be positive");
  if (!(in.tau >= 0.0)) throw InvalidConfig("tau must be non-negative");
  if (in.k < 2) throw WrongK("k must be at least 2");
}

}  // namespace

Means expected_means(const BoundInputs& in) {
  check_common(in);
  Means m;
  m.mu_c = (1.0 - in.rho) * in.total_power * in.tau / (in.k * in.difficulty);
  m.mu_m = in.rho * in.total_power * in.tau / in.difficulty;
  return m;
}

double ghost_success_bound(const BoundInputs& in) {
  check_common(in);
  if (in.k != 2) throw WrongK("the two-class bound requires k = 2");
  double mu_c = expected_means(in).mu_c;
  double q = 1.0 - in.rho;
  return 1.0 - 4.0 * std::exp(-4.0 * in.rho * in.rho * mu_c / (3.0 * q * q));
}

BoundReport general_k_bounds(const BoundInputs& in) {
  Means means = expected_means(in);
  BoundReport r;
  r.mu_c = means.mu_c;
  r.mu_m = means.mu_m;
  if (in.delta) {
    r.delta = *in.delta;
    if (!(r.delta > 0.0)) throw InvalidConfig("delta must be positive");
  } else {
    if (means.mu_m <= 1.0)
      throw DegenerateAttacker("cannot derive delta: expected attacker blocks do not exceed 1");
    r.delta = (means.mu_m - 1.0) / (2.0 * means.mu_c);
    r.delta_derived = true;
  }
  r.delta_threshold = 2.0 * r.delta * means.mu_c;
  r.threshold_bound = 1.0 - 2.0 * in.k * std::exp(-r.delta * r.delta * means.mu_c / 3.0);
  if (means.mu_m > 1.0) {
    double num = (means.mu_m - 1.0) * (means.mu_m - 1.0);
    r.mu_m_bound = 1.0 - 2.0 * in.k * std::exp(-num / (12.0 * means.mu_c));
  }
  r.formula_used = "1 - 2k exp(-delta^2 mu_c / 3)";
  return r;
}

double bitcoin_mean(const BoundInputs& in) {
  check_common(in);
  if (in.k != 2) throw WrongK("the longest-branch mean is defined for k = 2");
  if (!in.pi) throw MissingPi("pi (probability of extending the longest branch) is required");
  if (!(*in.pi > 0.0) || !(*in.pi <= 1.0)) throw InvalidConfig("pi must lie in (0, 1]");
  return (1.0 - in.rho) * in.total_power * in.tau / (2.0 * in.difficulty * *in.pi);
}

double exact_delta_tail(int n, double p, double threshold) {
  if (n < 1) throw InvalidConfig("n must be at least 1");
  if (n > 5000) throw TooLarge("n above 5000 is not supported by the exact oracle");
  if (!(p > 0.0) || p > 1.0) throw InvalidConfig("p must lie in (0, 1]");
  if (threshold <= 0.0) return 0.0;
  // |X1 - X2| takes integer values, so |X1 - X2| < threshold is equivalent
  // to |X1 - X2| <= ceil(threshold) - 1.
  long long spread = static_cast<long long>(std::ceil(threshold)) - 1;
  if (spread < 0) return 0.0;

  // log pmf of Binomial(n, p); shifted by its max before exponentiation so
  // tails far from the mode cannot underflow the normalized weights.
  std::vector<double> logpmf(static_cast<std::size_t>(n) + 1);
  double lp = std::log(p);
  double lq = p < 1.0 ? std::log1p(-p) : -std::numeric_limits<double>::infinity();
  double lgn = std::lgamma(n + 1.0);
  double lmax = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) {
    double v;
    if (p == 1.0)
      v = i == n ? 0.0 : -std::numeric_limits<double>::infinity();
    else
      v = lgn - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) + i * lp + (n - i) * lq;
    logpmf[i] = v;
    lmax = std::max(lmax, v);
  }
  std::vector<double> w(logpmf.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(logpmf[i] - lmax);

  // prefix[i] = sum of w[0..i-1]; the inner sum over |i - j| <= spread is a
  // prefix-sum difference, so the whole convolution is linear after the pmf.
  std::vector<double> prefix(w.size() + 1, 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) prefix[i + 1] = prefix[i] + w[i];
  double total = prefix.back();

  double acc = 0.0;
  for (long long i = 0; i <= n; ++i) {
    long long lo = std::max<long long>(0, i - spread);
    long long hi = std::min<long long>(n, i + spread);
    acc += w[i] * (prefix[hi + 1] - prefix[lo]);
  }
  return acc / (total * total);
}

std::vector<SweepPoint> curve_sweep(const BoundInputs& base, SweepAxis axis, double from,
                                    double to, double step) {
  if (!(step > 0.0)) throw InvalidConfig("sweep step must be positive");
  if (!(from <= to)) throw InvalidConfig("sweep range must satisfy from <= to");
  std::vector<SweepPoint> out;
  // Inclusive end with a half-step slack against float drift.
  for (double x = from; x <= to + step * 0.5; x += step) {
    BoundInputs in = base;
    switch (axis) {
      case SweepAxis::tau: in.tau = x; break;
      case SweepAxis::rho: in.rho = x; break;
      case SweepAxis::d: in.difficulty = x; break;
    }
    SweepPoint pt;
    pt.x = x;
    pt.bound = ghost_success_bound(in);
    pt.vacuous = pt.bound <= 0.0;
    out.push_back(pt);
  }
  return out;
}

}  // namespace balance
