#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "uniconv/vlm_family.hpp"

using namespace uniconv;

namespace {

std::vector<PredictionRecord> repeated(double conf, std::size_t total, std::size_t correct) {
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < total; ++i)
    out.emplace_back(std::vector<double>{conf, 1.0 - conf}, i < correct ? 0u : 1u);
  return out;
}

std::vector<double> random_logits(std::mt19937_64& rng, std::size_t n, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> s(n);
  for (double& v : s) v = g(rng);
  return s;
}

}  // namespace

TEST(ClipLogits, Examples) {
  const ClipClassifier clf(Matrix::from_rows({{1, 0}, {0, 1}}), 100.0);
  const std::vector<double> e1{1, 0};
  EXPECT_EQ(clip_logits(e1, clf), (std::vector<double>{100, 0}));
  const double h = std::sqrt(2.0) / 2.0;
  const ClipClassifier one(Matrix::from_rows({{1, 0}}), 1.0);
  EXPECT_NEAR(clip_logits(std::vector<double>{h, h}, one)[0], 0.7071068, 1e-7);
  const std::vector<double> p{0.6, 0.8};
  const ClipClassifier self(Matrix::from_rows({p}), 7.5);
  EXPECT_NEAR(clip_logits(p, self)[0], 7.5, 1e-14);
}

TEST(ClipLogits, Errors) {
  const ClipClassifier clf(Matrix::from_rows({{1, 0}}), 1.0);
  try {
    clip_logits(std::vector<double>{1, 1}, clf);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "unnormalized image embedding");
  }
  EXPECT_THROW(ClipClassifier(Matrix::from_rows({{1, 1}}), 1.0), Error);
  EXPECT_THROW(ClipClassifier(Matrix::from_rows({{1, 0}}), 0.0), Error);
  // prompt outside the declared subspace
  EXPECT_THROW(ClipClassifier(Matrix::from_rows({{0, 1, 0}}), 1.0, Matrix::from_rows({{1, 0, 0}})), Error);
}

TEST(Softmax, Examples) {
  const auto half = softmax(std::vector<double>{0, 0});
  EXPECT_DOUBLE_EQ(half[0], 0.5);
  const auto thirds = softmax(std::vector<double>{std::log(2.0), 0});
  EXPECT_NEAR(thirds[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(thirds[1], 1.0 / 3.0, 1e-15);
  const auto big = softmax(std::vector<double>{1000, 0});
  EXPECT_NEAR(big[0], 1.0, 1e-12);
  EXPECT_NEAR(big[1], 0.0, 1e-12);
}

TEST(SoftmaxProperty, SumsToOneAtExtremeLogits) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto p = softmax(random_logits(rng, 1 + rep % 9, 5000.0));
    double s = 0.0;
    for (double v : p) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(SoftmaxProperty, HalfLipschitz) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int rep = 0; rep < 100000; ++rep) {
    const std::size_t n = 2 + rep % 6;
    auto s = random_logits(rng, n, 3.0);
    auto t = s;
    const double step = std::pow(10.0, -3.0 + 3.0 * (rep % 100) / 100.0);
    for (double& v : t) v += step * g(rng);
    const auto p = softmax(s), q = softmax(t);
    double dp = 0.0, ds = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      dp += (p[j] - q[j]) * (p[j] - q[j]);
      ds += (s[j] - t[j]) * (s[j] - t[j]);
    }
    if (ds > 0.0) worst = std::max(worst, std::sqrt(dp / ds));
  }
  EXPECT_LE(worst, 0.5);
}

TEST(Lipschitz, Examples) {
  EXPECT_DOUBLE_EQ(lipschitz_constant(EvaluationFunctional::logit(), 100).value, 100.0);
  EXPECT_NEAR(lipschitz_constant(EvaluationFunctional::brier(), 2).value, 2.0 * std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(lipschitz_constant(EvaluationFunctional::brier(), 2).value, 2.828427, 1e-6);
  EXPECT_NEAR(lipschitz_constant(EvaluationFunctional::cross_entropy(0.01), 1).value, 50.0, 1e-12);
  const auto sc = lipschitz_constant(EvaluationFunctional::smoothed_calibration(0.8, 0.1), 1);
  EXPECT_NEAR(sc.value, 0.5 * 11.0, 1e-12);
  EXPECT_FALSE(sc.piecewise);
  EXPECT_TRUE(lipschitz_constant(EvaluationFunctional::smoothed_calibration(0.6, 0.1), 1).piecewise);
  const auto d = lipschitz_constant(EvaluationFunctional::brier(), 3);
  ASSERT_EQ(d.factors.size(), 3u);
  EXPECT_EQ(d.factors[0].factor, 3.0);
  EXPECT_EQ(d.factors[1].factor, 0.5);
}

TEST(Lipschitz, ZeroOneRejected) {
  try {
    lipschitz_constant(EvaluationFunctional::zero_one(), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "non-Lipschitz functional; use smoothed surrogate");
  }
}

TEST(LipschitzProperty, LogitLiteral) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const double alpha = 20.0;
  double worst = 0.0;
  for (int rep = 0; rep < 100000; ++rep) {
    std::array<double, 4> z{}, p{}, q{};
    for (auto* v : {&z, &p, &q}) {
      double n = 0;
      for (double& x : *v) n += (x = g(rng)) * x;
      for (double& x : *v) x /= std::sqrt(n);
    }
    if (rep % 10 == 0) {
      // align z with p - q, where the bound is attained
      double n = 0;
      for (int i = 0; i < 4; ++i) n += (z[i] = p[i] - q[i]) * z[i];
      for (double& x : z) x /= std::sqrt(n);
    }
    double a = 0, b = 0, dist = 0;
    for (int i = 0; i < 4; ++i) {
      a += alpha * z[i] * p[i];
      b += alpha * z[i] * q[i];
      dist += (p[i] - q[i]) * (p[i] - q[i]);
    }
    worst = std::max(worst, std::abs(a - b) / std::sqrt(dist));
  }
  EXPECT_LE(worst, alpha * (1 + 1e-12));
  EXPECT_GE(worst, 0.99 * alpha);
}

TEST(EvalFunctional, Examples) {
  EXPECT_EQ(eval_functional(EvaluationFunctional::brier(), PredictionRecord({0, 1, 0}, 1)), 0.0);
  EXPECT_NEAR(eval_functional(EvaluationFunctional::cross_entropy(0.01), PredictionRecord({0.5, 0.5}, 0)),
              0.693147, 1e-6);
  EXPECT_EQ(eval_functional(EvaluationFunctional::zero_one(), PredictionRecord({0.6, 0.4}, 1)), 1.0);
  EXPECT_EQ(eval_functional(EvaluationFunctional::zero_one(), PredictionRecord({0.5, 0.5}, 0)), 0.0);
  EXPECT_NEAR(eval_functional(EvaluationFunctional::cross_entropy(0.01), PredictionRecord({1.0, 0.0}, 1)),
              std::log(100.0), 1e-12);
  EXPECT_NEAR(eval_functional(EvaluationFunctional::brier(), PredictionRecord({0.6, 0.4}, 1)), 0.72, 1e-15);
}

TEST(EvalFunctional, SmoothedGate) {
  EXPECT_EQ(calibration_gate(0.0), 1.0);
  EXPECT_EQ(calibration_gate(0.5), 1.0);
  EXPECT_EQ(calibration_gate(1.0), 0.5);
  EXPECT_EQ(calibration_gate(-2.0), 0.0);
  const auto f = EvaluationFunctional::smoothed_calibration(0.8, 0.1);
  EXPECT_NEAR(eval_functional(f, PredictionRecord({0.8, 0.2}, 0)), 0.2, 1e-15);
  EXPECT_NEAR(eval_functional(f, PredictionRecord({0.8, 0.2}, 1)), -0.8, 1e-15);
  EXPECT_EQ(eval_functional(f, PredictionRecord({0.55, 0.45}, 0)), 0.0);
}

TEST(EvalFunctional, RecordValidation) {
  EXPECT_THROW(PredictionRecord({0.5, 0.6}, 0), Error);
  EXPECT_THROW(PredictionRecord({1.0}, 1), Error);
  EXPECT_THROW(PredictionRecord({1.5, -0.5}, 0), Error);
  EXPECT_THROW(eval_functional(EvaluationFunctional::logit(), PredictionRecord({1.0}, 0)), Error);
}

TEST(EvalFunctionalProperty, ArgmaxInvariantUnderScaling) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> pick(0, 4);
  const auto f = EvaluationFunctional::zero_one();
  for (int rep = 0; rep < 2000; ++rep) {
    const auto s = random_logits(rng, 5, 1.0);
    const std::size_t label = pick(rng);
    const double base = eval_functional_logits(f, s, label);
    for (double a : {0.1, 3.0, 50.0}) {
      std::vector<double> scaled(s);
      for (double& v : scaled) v *= a;
      EXPECT_EQ(eval_functional_logits(f, scaled, label), base);
    }
  }
}

TEST(Ece, Examples) {
  EXPECT_NEAR(ece(repeated(0.8, 10, 8), 10), 0.0, 1e-15);
  EXPECT_NEAR(ece(repeated(0.8, 10, 6), 10), 0.2, 1e-15);
  EXPECT_NEAR(ece(repeated(0.5, 2, 1), 10), 0.0, 1e-15);
  EXPECT_THROW(ece(std::vector<PredictionRecord>{}, 10), Error);
  EXPECT_THROW(ece(repeated(0.8, 2, 1), 0), Error);
}

TEST(Ece, TopConfidenceLandsInLastBin) {
  const auto one = repeated(1.0, 4, 3);
  EXPECT_NEAR(ece(one, 10), 0.25, 1e-15);
}

TEST(EceProperty, SingleBinIsGlobalGap) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<PredictionRecord> recs;
    double conf = 0.0, acc = 0.0;
    for (int i = 0; i < 50; ++i) {
      const double c = 0.5 + 0.5 * u(rng);
      recs.emplace_back(std::vector<double>{c, 1.0 - c}, u(rng) < 0.7 ? 0u : 1u);
      conf += recs.back().confidence();
      acc += recs.back().correct() ? 1.0 : 0.0;
    }
    EXPECT_NEAR(ece(recs, 1), std::abs(acc - conf) / 50.0, 1e-14);
  }
}

TEST(WorstCase, Examples) {
  EXPECT_EQ(worst_case_calibration(repeated(0.5, 10, 5)), 0.0);
  EXPECT_NEAR(worst_case_calibration(repeated(0.8, 10, 6)), 0.2, 1e-15);
  EXPECT_THROW(worst_case_calibration(std::vector<PredictionRecord>{}), Error);
}

TEST(WorstCaseProperty, NonnegativeAndZeroWhenCumulativelyCalibrated) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<PredictionRecord> recs;
    for (int i = 0; i < 30; ++i) {
      const double c = 0.5 + 0.5 * u(rng);
      recs.emplace_back(std::vector<double>{c, 1.0 - c}, u(rng) < c ? 0u : 1u);
    }
    EXPECT_GE(worst_case_calibration(recs), 0.0);
  }
  // each confidence level has exactly its confidence rate of correct answers
  auto recs = repeated(0.5, 4, 2);
  for (auto& r : repeated(0.75, 4, 3)) recs.push_back(r);
  for (auto& r : repeated(1.0, 3, 3)) recs.push_back(r);
  EXPECT_NEAR(worst_case_calibration(recs), 0.0, 1e-15);
}

TEST(CalibrationCurve, Examples) {
  std::vector<PredictionRecord> onehot;
  for (int i = 0; i < 5; ++i) onehot.emplace_back(std::vector<double>{0, 1, 0}, 1);
  const auto flat = smoothed_calibration_curve(onehot, 0.1);
  ASSERT_EQ(flat.size(), 101u);
  for (const auto& p : flat) EXPECT_EQ(p.value, 0.0);
  EXPECT_DOUBLE_EQ(flat[37].t, 0.37);

  const std::vector<PredictionRecord> single{PredictionRecord({0.7, 0.3}, 1)};
  const auto curve = smoothed_calibration_curve(single, 0.1);
  EXPECT_NEAR(curve[70].value, 0.0 - 0.7, 1e-15);
  EXPECT_THROW(smoothed_calibration_curve(single, 0.0), Error);
}

TEST(CalibrationCurveProperty, LipschitzInT) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u;
  std::vector<PredictionRecord> recs;
  for (int i = 0; i < 500; ++i) {
    const double c = 0.5 + 0.5 * u(rng);
    recs.emplace_back(std::vector<double>{c, 1.0 - c}, u(rng) < 0.8 ? 0u : 1u);
  }
  for (double h : {0.02, 0.1, 0.3}) {
    const auto curve = smoothed_calibration_curve(recs, h);
    for (std::size_t k = 1; k < curve.size(); ++k)
      EXPECT_LE(std::abs(curve[k].value - curve[k - 1].value), (1.0 / h + 1.0) * 0.01 + 1e-12);
  }
}

TEST(RecordsCsv, ParseAndRoundTrip) {
  const auto recs = parse_records_csv("prob_0,prob_1,prob_2,label\n0.2,0.3,0.5,2\n0.1,0.8,0.1000004,1\n");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].label, 2u);
  double s = 0.0;
  for (double p : recs[1].probabilities) s += p;
  EXPECT_NEAR(s, 1.0, 1e-15);
  const auto back = parse_records_csv(records_to_csv(recs));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].probabilities, recs[0].probabilities);
  EXPECT_EQ(back[1].label, 1u);
}

TEST(RecordsCsv, Errors) {
  EXPECT_THROW(parse_records_csv("p0,p1,label\n0.5,0.5,0\n"), Error);
  EXPECT_THROW(parse_records_csv("prob_0,prob_1,label\n0.5,0.6,0\n"), Error);
  EXPECT_THROW(parse_records_csv("prob_0,prob_1,label\n0.5,0.5,2\n"), Error);
  EXPECT_THROW(parse_records_csv("prob_0,prob_1,label\n0.5,0.5\n"), Error);
  EXPECT_THROW(parse_records_csv(""), Error);
}
