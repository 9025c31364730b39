#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "uniconv/metric_entropy.hpp"
#include "uniconv/simulate.hpp"

using namespace uniconv;

namespace {

Matrix line_points(std::vector<double> xs) {
  std::vector<std::vector<double>> rows;
  for (double x : xs) rows.push_back({x});
  return Matrix::from_rows(rows);
}

Matrix random_points(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(n, dim);
  for (std::size_t i = 0; i < n; ++i)
    for (double& v : m.row(i)) v = u(rng);
  return m;
}

// Unit vectors in a random d-dim subspace of R^D.
Matrix subspace_points(std::size_t n, std::size_t d, std::size_t D, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix basis = detail::random_orthonormal_rows(d, D, rng);
  Matrix coeff(n, d);
  for (std::size_t i = 0; i < n; ++i) detail::random_unit(rng, coeff.row(i));
  return coeff * basis;
}

// Smallest subset of the points whose radius-r balls cover every point.
std::size_t minimal_cover(const Matrix& pts, double r) {
  const std::size_t n = pts.rows();
  std::size_t best = n;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    const auto size = static_cast<std::size_t>(std::popcount(mask));
    if (size >= best) continue;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      bool hit = false;
      for (std::size_t c = 0; c < n && !hit; ++c)
        hit = (mask >> c & 1u) && distance(pts.row(i), pts.row(c)) <= r;
      ok = hit;
    }
    if (ok) best = size;
  }
  return best;
}

}  // namespace

TEST(BallCovering, Examples) {
  EXPECT_NEAR(ball_covering_log(2, 1.0, 0.5), 2.0 * std::log(5.0), 1e-12);
  EXPECT_NEAR(ball_covering_log(2, 1.0, 0.5), 3.21888, 1e-5);
  EXPECT_EQ(ball_covering_log(5, 1.0, 1e9), 0.0);
  EXPECT_NEAR(ball_covering_log(1, 1.0, 1.0), std::log(3.0), 1e-12);
  EXPECT_EQ(ball_covering_log(3, 1.0, 2.0), 0.0);
  EXPECT_THROW(ball_covering_log(0, 1.0, 0.1), Error);
  EXPECT_THROW(ball_covering_log(1, 1.0, 0.0), Error);
}

TEST(BallCovering, ValidAgainstGreedyOnDisc) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<double>> rows;
  while (rows.size() < 2000) {
    const double x = u(rng), y = u(rng);
    if (x * x + y * y <= 1.0) rows.push_back({x, y});
  }
  const auto net = greedy_net(Matrix::from_rows(rows), 0.5);
  EXPECT_LE(std::log(static_cast<double>(net.centers.size())), ball_covering_log(2, 1.0, 0.5));
}

TEST(PromptProduct, Examples) {
  EXPECT_NEAR(prompt_product_covering_log(14, 20, 0.01), 280.0 * std::log(100.0), 1e-9);
  EXPECT_NEAR(prompt_product_covering_log(14, 20, 0.01), 1289.448, 1e-3);
  const auto vac = prompt_product_covering(1, 1, 1.0);
  EXPECT_EQ(vac.log_cover, 0.0);
  EXPECT_TRUE(vac.vacuous_radius);
  EXPECT_NEAR(prompt_product_covering_log(2, 3, 0.1, 2.0), 27.631, 1e-3);
  EXPECT_EQ(prompt_product_covering(2, 3, 0.1, 2.0).constant, 2.0);
  EXPECT_EQ(prompt_product_covering(2, 3, 0.1).family, CoverFamily::prompt_product);
}

TEST(PromptProduct, LinearInClassesAndDimension) {
  const double base = prompt_product_covering_log(1, 1, 0.03);
  for (std::uint64_t N = 1; N <= 6; ++N)
    for (std::uint64_t d = 1; d <= 6; ++d)
      EXPECT_NEAR(prompt_product_covering_log(N, d, 0.03), static_cast<double>(N * d) * base, 1e-12);
}

TEST(Ellipsoid, Examples) {
  const auto s = Spectrum::make({1.0, 0.25, 0.01}, SpectrumSource::explicit_values);
  const auto e = ellipsoid_entropy(s, 0.2);
  EXPECT_NEAR(e.value, 2.5257286443082554, 1e-12);
  EXPECT_EQ(e.contributing, 2u);
  EXPECT_EQ(ellipsoid_entropy(Spectrum::make({0.01, 0.001}, SpectrumSource::explicit_values), 0.2).value,
            0.0);
  EXPECT_NEAR(ellipsoid_entropy(Spectrum::make({1.0}, SpectrumSource::explicit_values), 0.1).value,
              std::log(10.0), 1e-12);
  EXPECT_NEAR(ellipsoid_entropy(s, 0.2, 3.0).value, 3.0 * e.value, 1e-12);
}

TEST(Ellipsoid, InvalidSpectrum) {
  try {
    ellipsoid_entropy(Spectrum::make({1.0, -0.5}, SpectrumSource::explicit_values), 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("invalid spectrum", 0), 0u);
  }
}

TEST(EllipsoidProperty, Monotone) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> lam(6);
    for (double& l : lam) l = u(rng);
    const auto s = Spectrum::make(lam, SpectrumSource::explicit_values);
    const double rho = 0.01 + 0.5 * u(rng);
    EXPECT_GE(ellipsoid_entropy(s, rho).value, ellipsoid_entropy(s, rho * 1.3).value);
    auto bigger = lam;
    bigger[rep % 6] += u(rng);
    EXPECT_GE(ellipsoid_entropy(Spectrum::make(bigger, SpectrumSource::explicit_values), rho).value,
              ellipsoid_entropy(s, rho).value - 1e-12);
  }
}

TEST(GreedyNet, LineExample) {
  std::vector<double> xs;
  for (int i = 0; i <= 10; ++i) xs.push_back(i / 10.0);
  const auto net = greedy_net(line_points(xs), 0.25);
  EXPECT_EQ(net.centers, (std::vector<std::size_t>{0, 10, 5}));
  EXPECT_TRUE(net.covered_certificate);
  EXPECT_LE(net.max_uncovered_distance, 0.25);
}

TEST(GreedyNet, SinglePoint) {
  const auto net = greedy_net(line_points({3.0}), 1e-6);
  EXPECT_EQ(net.centers.size(), 1u);
  EXPECT_EQ(net.max_uncovered_distance, 0.0);
}

TEST(GreedyNet, UnitCircle) {
  std::vector<std::vector<double>> rows;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  for (int i = 0; i < 200; ++i) {
    const double t = u(rng);
    rows.push_back({std::cos(t), std::sin(t)});
  }
  const auto net = greedy_net(Matrix::from_rows(rows), 0.5);
  EXPECT_GE(net.centers.size(), 6u);
  EXPECT_LE(net.centers.size(), 13u);
  EXPECT_TRUE(net.covered_certificate);
  const auto geo = greedy_net(Matrix::from_rows(rows), 0.5, NetMetric::geodesic_sphere);
  EXPECT_TRUE(geo.covered_certificate);
}

TEST(GreedyNet, Errors) {
  EXPECT_THROW(greedy_net(Matrix(0, 2), 0.1), Error);
  EXPECT_THROW(greedy_net(line_points({0.0}), 0.0), Error);
  EXPECT_THROW(greedy_net(line_points({0.5}), 0.1, NetMetric::geodesic_sphere), Error);
}

TEST(GreedyNet, GeodesicClampsAntipodes) {
  const auto pts = Matrix::from_rows({{1.0, 0.0}, {-1.0, 0.0}});
  EXPECT_NEAR(metric_distance(pts.row(0), pts.row(1), NetMetric::geodesic_sphere), std::numbers::pi,
              1e-12);
  EXPECT_EQ(metric_distance(pts.row(0), pts.row(0), NetMetric::geodesic_sphere), 0.0);
}

TEST(GreedyNetProperty, CertificateHolds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto pts = random_points(150, 3, seed);
    const double rho = 0.2 + 0.05 * static_cast<double>(seed % 5);
    const auto net = greedy_net(pts, rho);
    ASSERT_TRUE(net.covered_certificate);
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      double best = INFINITY;
      for (auto c : net.centers) best = std::min(best, distance(pts.row(i), pts.row(c)));
      EXPECT_LE(best, rho);
    }
  }
}

TEST(GreedyNetProperty, WithinPackingBoundOfMinimalCover) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t n = 6 + seed % 7;  // up to 12 points
    const auto pts = random_points(n, 2, 100 + seed);
    for (double rho : {0.3, 0.6, 1.0}) {
      const auto greedy = greedy_net(pts, rho).centers.size();
      EXPECT_LE(greedy, minimal_cover(pts, rho / 2.0)) << seed << " " << rho;
      EXPECT_GE(greedy, minimal_cover(pts, rho));
    }
  }
}

TEST(GreedyNetProperty, DoublingIndependentOfAmbientDimension) {
  for (std::size_t D : {8u, 64u, 512u}) {
    const auto pts = subspace_points(600, 3, D, 77);
    for (double rho : {0.15, 0.3}) {
      const double fine = std::log(static_cast<double>(greedy_net(pts, rho).centers.size()));
      const double coarse = std::log(static_cast<double>(greedy_net(pts, 2.0 * rho).centers.size()));
      EXPECT_LE(fine - coarse, 3.0 * std::log(2.0) + 1.0) << D << " " << rho;
    }
  }
}

TEST(Compare, UnitIntervalVsBall) {
  std::vector<double> xs;
  for (int i = 0; i <= 10; ++i) xs.push_back(i / 10.0);
  const CoveringSpec ball{0.25, ball_covering_log(1, 0.5, 0.25), 1.0, CoverFamily::ball, false};
  const auto r = compare_analytic_empirical(line_points(xs), 0.25, ball);
  EXPECT_EQ(r.net_size, 3u);
  EXPECT_NEAR(r.empirical_log, std::log(3.0), 1e-12);
  EXPECT_NEAR(r.analytic_log, std::log(5.0), 1e-12);
  EXPECT_FALSE(r.violation);
}

TEST(Compare, EmptyEllipsoidSinglePoint) {
  const auto s = Spectrum::make({0.001}, SpectrumSource::explicit_values);
  const auto e = ellipsoid_entropy(s, 0.5);
  const CoveringSpec spec{0.5, e.value, 1.0, CoverFamily::ellipsoid, false};
  const auto r = compare_analytic_empirical(line_points({0.0}), 0.5, spec);
  EXPECT_EQ(r.empirical_log, 0.0);
  EXPECT_EQ(r.analytic_log, 0.0);
  EXPECT_FALSE(r.violation);
}

TEST(Compare, SubspaceCloudWithinPromptProductBound) {
  const auto pts = subspace_points(500, 3, 512, 8);
  const auto spec = prompt_product_covering(1, 3, 0.3, 3.0);
  const auto r = compare_analytic_empirical(pts, 0.3, spec);
  EXPECT_FALSE(r.violation);
  EXPECT_LE(r.empirical_log, r.analytic_log);
}

TEST(Compare, FlagsViolation) {
  std::vector<double> xs;
  for (int i = 0; i < 50; ++i) xs.push_back(i);
  const CoveringSpec tiny{0.5, 0.1, 1.0, CoverFamily::empirical, false};
  EXPECT_TRUE(compare_analytic_empirical(line_points(xs), 0.5, tiny).violation);
}
