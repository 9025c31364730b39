#pragma once

// Covering-number bounds (ball, product of prompt spheres, spectral
// ellipsoid) and a farthest-point greedy net to check them on point clouds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "uniconv/error.hpp"
#include "uniconv/matrix.hpp"
#include "uniconv/parallel.hpp"
#include "uniconv/spectrum.hpp"

namespace uniconv {

enum class CoverFamily { ball, prompt_product, ellipsoid, empirical };

inline const char* to_string(CoverFamily f) {
  switch (f) {
    case CoverFamily::ball: return "ball";
    case CoverFamily::prompt_product: return "prompt_product";
    case CoverFamily::ellipsoid: return "ellipsoid";
    case CoverFamily::empirical: return "empirical";
  }
  return "?";
}

struct CoveringSpec {
  double rho = 0.0;
  double log_cover = 0.0;  // upper bound on ln N(Theta, rho)
  double constant = 1.0;
  CoverFamily family = CoverFamily::ball;
  bool vacuous_radius = false;
};

// Volumetric bound for a radius-R ball in R^d: d ln(1 + 2R/rho), 0 once
// rho >= 2R.
inline double ball_covering_log(std::uint64_t dim, double radius, double rho) {
  require(dim >= 1, "dimension must be >= 1");
  require(radius > 0.0 && rho > 0.0, "radius and rho must be > 0");
  if (rho >= 2.0 * radius) return 0.0;
  return static_cast<double>(dim) * std::log1p(2.0 * radius / rho);
}

// c1 N d ln(1/rho) for N prompts with intrinsic dimension d.
inline CoveringSpec prompt_product_covering(std::uint64_t num_classes, std::uint64_t intrinsic_dim,
                                            double rho, double c1 = 1.0) {
  require(num_classes >= 1 && intrinsic_dim >= 1, "num_classes and intrinsic_dim must be >= 1");
  require(rho > 0.0, "rho must be > 0");
  require(c1 > 0.0, "c1 must be > 0");
  CoveringSpec spec{rho, 0.0, c1, CoverFamily::prompt_product, rho >= 1.0};
  if (!spec.vacuous_radius) {
    spec.log_cover = c1 * static_cast<double>(num_classes) *
                     static_cast<double>(intrinsic_dim) * std::log(1.0 / rho);
  }
  return spec;
}

inline double prompt_product_covering_log(std::uint64_t num_classes,
                                          std::uint64_t intrinsic_dim, double rho,
                                          double c1 = 1.0) {
  return prompt_product_covering(num_classes, intrinsic_dim, rho, c1).log_cover;
}

struct EllipsoidEntropy {
  double value = 0.0;
  std::size_t contributing = 0;  // #{i : sqrt(lambda_i) >= rho}
};

// c3 sum_i ln(sqrt(lambda_i)/rho)_+
inline EllipsoidEntropy ellipsoid_entropy(const Spectrum& spectrum, double rho, double c3 = 1.0) {
  require(rho > 0.0, "rho must be > 0");
  require(c3 > 0.0, "c3 must be > 0");
  EllipsoidEntropy e;
  double sum = 0.0;
  for (double l : spectrum.lambdas()) {
    const double r = std::sqrt(l);
    if (r >= rho) {
      ++e.contributing;
      sum += std::log(r / rho);
    }
  }
  e.value = c3 * sum;
  return e;
}

// --- greedy nets ------------------------------------------------------------

enum class NetMetric { euclidean, geodesic_sphere };

inline constexpr double kUnitNormTolerance = 1e-9;

inline double metric_distance(std::span<const double> a, std::span<const double> b,
                              NetMetric metric) {
  if (metric == NetMetric::euclidean) return distance(a, b);
  return std::acos(std::clamp(dot(a, b), -1.0, 1.0));
}

struct NetResult {
  std::vector<std::size_t> centers;  // row indices into the input
  double radius = 0.0;
  bool covered_certificate = false;
  double max_uncovered_distance = 0.0;  // max over points of distance to nearest center
};

// Farthest-point greedy: start at row 0, repeatedly add the point farthest from
// the current centers (lowest index on ties) until every point is within rho.
inline NetResult greedy_net(const Matrix& points, double rho,
                            NetMetric metric = NetMetric::euclidean) {
  require(points.rows() >= 1, "greedy_net needs at least one point", ErrorKind::invalid_input);
  require(rho > 0.0, "rho must be > 0");
  if (metric == NetMetric::geodesic_sphere) {
    for (std::size_t i = 0; i < points.rows(); ++i) {
      require(std::abs(norm(points.row(i)) - 1.0) <= kUnitNormTolerance,
              "geodesic metric needs unit-norm points (row " + std::to_string(i) + ")",
              ErrorKind::invalid_input);
    }
  }
  const std::size_t n = points.rows();
  NetResult net;
  net.radius = rho;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t next = 0;
  for (;;) {
    net.centers.push_back(next);
    const auto c = points.row(next);
    std::size_t far = 0;
    double far_dist = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], metric_distance(points.row(i), c, metric));
      if (nearest[i] > far_dist) {
        far_dist = nearest[i];
        far = i;
      }
    }
    if (far_dist <= rho) break;
    next = far;
  }

  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c : net.centers) best = std::min(best, metric_distance(points.row(i), points.row(c), metric));
    worst = std::max(worst, best);
  }
  net.max_uncovered_distance = worst;
  net.covered_certificate = worst <= rho;
  return net;
}

inline Matrix select_rows(const Matrix& points, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), points.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::copy(points.row(rows[k]).begin(), points.row(rows[k]).end(), out.row(k).begin());
  }
  return out;
}

struct ComparisonReport {
  std::size_t net_size = 0;
  double empirical_log = 0.0;
  double analytic_log = 0.0;
  double ratio = 0.0;  // empirical / analytic; +inf when analytic is 0 and empirical is not
  bool violation = false;
  CoveringSpec analytic;
  NetResult net;
};

inline ComparisonReport compare_analytic_empirical(const Matrix& points, double rho,
                                                   const CoveringSpec& analytic,
                                                   NetMetric metric = NetMetric::euclidean) {
  ComparisonReport r;
  r.net = greedy_net(points, rho, metric);
  r.analytic = analytic;
  r.net_size = r.net.centers.size();
  r.empirical_log = std::log(static_cast<double>(r.net_size));
  r.analytic_log = analytic.log_cover;
  if (r.analytic_log > 0.0) {
    r.ratio = r.empirical_log / r.analytic_log;
  } else {
    r.ratio = r.empirical_log > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  r.violation = r.empirical_log > r.analytic_log + 1e-12;
  return r;
}

}  // namespace uniconv
