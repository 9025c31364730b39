#pragma once

// One-dimensional empirical-CDF machinery: exact sup deviation, the DKW
// inequality in tail / epsilon / sample-size form, the Kolmogorov limit law and
// Monte Carlo checks of both.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "uniconv/error.hpp"
#include "uniconv/parallel.hpp"

namespace uniconv {

class EmpiricalCDF {
 public:
  explicit EmpiricalCDF(std::vector<double> samples) : sorted_(std::move(samples)) {
    require(!sorted_.empty(), "empty sample", ErrorKind::invalid_input);
    for (double v : sorted_) {
      require(std::isfinite(v), "non-finite sample", ErrorKind::invalid_input);
    }
    std::sort(sorted_.begin(), sorted_.end());
  }

  std::size_t size() const noexcept { return sorted_.size(); }
  std::span<const double> samples() const noexcept { return sorted_; }

  // Fraction of samples <= x (right-continuous).
  double operator()(double x) const {
    const auto k = std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin();
    return static_cast<double>(k) / static_cast<double>(sorted_.size());
  }

  // Fraction of samples < x, i.e. the left limit at x.
  double left_limit(double x) const {
    const auto k = std::lower_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin();
    return static_cast<double>(k) / static_cast<double>(sorted_.size());
  }

 private:
  std::vector<double> sorted_;
};

inline EmpiricalCDF ecdf_build(std::vector<double> samples) {
  return EmpiricalCDF(std::move(samples));
}

// A reference distribution. `left` is the left limit F(x-); when absent the
// CDF is treated as continuous.
struct DistributionOracle {
  std::function<double(double)> cdf;
  std::function<double(double)> left;

  double left_limit(double x) const { return left ? left(x) : cdf(x); }

  static DistributionOracle uniform01() {
    return {[](double x) { return std::clamp(x, 0.0, 1.0); }, {}};
  }

  static DistributionOracle from_ecdf(EmpiricalCDF ecdf) {
    auto shared = std::make_shared<const EmpiricalCDF>(std::move(ecdf));
    return {[shared](double x) { return (*shared)(x); },
            [shared](double x) { return shared->left_limit(x); }};
  }
};

namespace detail {
inline double checked_cdf(double v) {
  require(std::isfinite(v) && v >= 0.0 && v <= 1.0, "invalid CDF oracle",
          ErrorKind::invalid_input);
  return v;
}
}  // namespace detail

// Exact sup_x |F_n(x) - F(x)|. For monotone F the supremum is attained at a
// jump of F_n, approached either from the left or at the jump itself, so it
// suffices to compare both one-sided limits at each distinct sample value.
inline double sup_deviation(const EmpiricalCDF& ecdf, const DistributionOracle& truth) {
  const auto xs = ecdf.samples();
  const double n = static_cast<double>(xs.size());
  double sup = 0.0;
  std::size_t i = 0;
  while (i < xs.size()) {
    std::size_t j = i;
    while (j < xs.size() && xs[j] == xs[i]) ++j;
    const double below = static_cast<double>(i) / n;
    const double at = static_cast<double>(j) / n;
    const double f_left = detail::checked_cdf(truth.left_limit(xs[i]));
    const double f_at = detail::checked_cdf(truth.cdf(xs[i]));
    sup = std::max({sup, std::abs(f_left - below), std::abs(f_at - at)});
    i = j;
  }
  return sup;
}

// Uniform(0,1) fast path over an already sorted sample.
inline double sup_deviation_uniform_sorted(std::span<const double> sorted) {
  const double n = static_cast<double>(sorted.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double u = std::clamp(sorted[i], 0.0, 1.0);
    sup = std::max({sup, u - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - u});
  }
  return sup;
}

// --- DKW inequality ---------------------------------------------------------

// 2 exp(-2 n eps^2). Values >= 1 are vacuous but returned unchanged.
inline double dkw_tail(std::uint64_t n, double epsilon) {
  require(n >= 1, "n must be >= 1");
  require(epsilon > 0.0 && std::isfinite(epsilon), "epsilon must be > 0");
  return 2.0 * std::exp(-2.0 * static_cast<double>(n) * epsilon * epsilon);
}

inline bool dkw_tail_vacuous(double tail) { return tail >= 1.0; }

// Smallest epsilon with dkw_tail(n, epsilon) = delta. delta >= 2 yields 0.
inline double dkw_epsilon(std::uint64_t n, double delta) {
  require(n >= 1, "n must be >= 1");
  require(delta > 0.0 && std::isfinite(delta), "delta must be > 0");
  if (delta >= 2.0) return 0.0;
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n)));
}

// A confidence level 1 - delta <= 0 says nothing.
inline bool dkw_delta_vacuous(double delta) { return delta >= 1.0; }

// Minimal n with dkw_epsilon(n, delta) <= epsilon.
inline std::uint64_t dkw_sample_size(double epsilon, double delta) {
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0,1)");
  require(delta > 0.0 && delta <= 2.0, "delta must lie in (0,2]");
  const double raw = std::log(2.0 / delta) / (2.0 * epsilon * epsilon);
  require(raw < 1e18, "sample size overflows", ErrorKind::numerical);
  auto n = static_cast<std::uint64_t>(std::ceil(raw));
  if (n == 0) return 0;
  // Settle rounding at the boundary against the epsilon form itself.
  while (n > 1 && dkw_epsilon(n - 1, delta) <= epsilon) --n;
  while (dkw_epsilon(n, delta) > epsilon) ++n;
  return n;
}

// --- Kolmogorov limit law ---------------------------------------------------

// K(x) = P(sup |B(t)| <= x) for a Brownian bridge B. For x >= 1 the
// alternating series 1 - 2 sum (-1)^{k-1} exp(-2 k^2 x^2) is used; below that
// its Jacobi-theta dual sqrt(2 pi)/x sum exp(-(2k-1)^2 pi^2 / (8 x^2)), which
// has positive terms and no cancellation. Both stop once a term is < 1e-12.
inline double kolmogorov_cdf(double x) {
  constexpr double term_tol = 1e-12;
  if (!(x > 0.0)) return 0.0;
  if (x < 1.0) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double sum = 0.0;
    for (int k = 1; k < 1000; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(-odd * odd * pi2 / (8.0 * x * x));
      sum += term;
      if (term < term_tol * std::max(sum, 1e-300)) break;
    }
    return std::clamp(std::sqrt(2.0 * std::numbers::pi) / x * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k < 1000; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1) ? term : -term;
    if (term < term_tol) break;
  }
  return std::clamp(1.0 - 2.0 * sum, 0.0, 1.0);
}

// Inverse of kolmogorov_cdf by bisection.
inline double kolmogorov_quantile(double p) {
  require(p > 0.0 && p < 1.0, "probability must lie in (0,1)");
  double lo = 0.0, hi = 10.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kolmogorov_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// --- Monte Carlo checks -----------------------------------------------------

struct CoverageReport {
  std::uint64_t n = 0;
  double epsilon = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  std::uint64_t violations = 0;
  double violation_frequency = 0.0;
  double bound = 0.0;
  bool vacuous = false;
  double mean_deviation = 0.0;
  double max_deviation = 0.0;
  std::vector<double> deviations;  // per trial, index order
};

namespace detail {
// Sup deviations of `trials` Uniform(0,1) samples of size n; trial t draws
// from stream mix_seed(seed, t).
inline std::vector<double> uniform_sup_deviations(std::uint64_t n, std::uint64_t trials,
                                                  std::uint64_t seed, unsigned workers) {
  std::vector<double> out(trials);
  parallel_for(trials, workers, [&](std::size_t t) {
    Rng rng = make_stream(seed, t);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> xs(n);
    for (auto& x : xs) x = unif(rng);
    std::sort(xs.begin(), xs.end());
    out[t] = sup_deviation_uniform_sorted(xs);
  });
  return out;
}
}  // namespace detail

inline CoverageReport mc_dkw_coverage(std::uint64_t n, double epsilon, std::uint64_t trials,
                                      std::uint64_t seed, unsigned workers = 0) {
  require(n >= 1, "n must be >= 1");
  require(trials >= 100, "trials must be >= 100");
  CoverageReport r;
  r.n = n;
  r.epsilon = epsilon;
  r.trials = trials;
  r.seed = seed;
  r.bound = dkw_tail(n, epsilon);
  r.vacuous = dkw_tail_vacuous(r.bound);
  r.deviations = detail::uniform_sup_deviations(n, trials, seed, workers);
  double sum = 0.0;
  for (double dev : r.deviations) {
    if (dev > epsilon) ++r.violations;
    sum += dev;
    r.max_deviation = std::max(r.max_deviation, dev);
  }
  r.mean_deviation = sum / static_cast<double>(trials);
  r.violation_frequency = static_cast<double>(r.violations) / static_cast<double>(trials);
  return r;
}

// Linear interpolation between order statistics (Hyndman-Fan type 7).
inline double empirical_quantile(std::span<const double> sorted, double p) {
  require(!sorted.empty(), "empty sample", ErrorKind::invalid_input);
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct QuantileComparison {
  std::uint64_t n = 0;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  std::vector<double> probabilities;
  std::vector<double> empirical;    // quantiles of sqrt(n) * sup deviation
  std::vector<double> theoretical;  // Kolmogorov quantiles
  double max_discrepancy = 0.0;
  bool pre_asymptotic = false;
  std::vector<double> statistics;  // sorted sqrt(n) * D_n
};

inline constexpr double kPreAsymptoticDiscrepancy = 0.05;
inline constexpr std::uint64_t kAsymptoticMinN = 1000;

inline QuantileComparison mc_kolmogorov_fit(std::uint64_t n, std::uint64_t trials,
                                            std::uint64_t seed, unsigned workers = 0,
                                            std::vector<double> probabilities = {
                                                0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
  require(n >= 1, "n must be >= 1");
  require(trials >= 2, "trials must be >= 2");
  QuantileComparison q;
  q.n = n;
  q.trials = trials;
  q.seed = seed;
  q.statistics = detail::uniform_sup_deviations(n, trials, seed, workers);
  const double root_n = std::sqrt(static_cast<double>(n));
  for (auto& s : q.statistics) s *= root_n;
  std::sort(q.statistics.begin(), q.statistics.end());
  q.probabilities = std::move(probabilities);
  for (double p : q.probabilities) {
    const double emp = empirical_quantile(q.statistics, p);
    const double th = kolmogorov_quantile(p);
    q.empirical.push_back(emp);
    q.theoretical.push_back(th);
    q.max_discrepancy = std::max(q.max_discrepancy, std::abs(emp - th));
  }
  q.pre_asymptotic = n < kAsymptoticMinN || q.max_discrepancy > kPreAsymptoticDiscrepancy;
  return q;
}

}  // namespace uniconv
