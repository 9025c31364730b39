#pragma once

// CLIP-style prompt-induced classifiers: logits alpha <z, p_j>, softmax
// probabilities, evaluation functionals and their Lipschitz constants with
// respect to the prompt embeddings, plus calibration summaries.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uniconv/error.hpp"
#include "uniconv/matrix.hpp"
#include "uniconv/spectrum.hpp"

namespace uniconv {

inline constexpr double kUnitTolerance = 1e-9;
inline constexpr double kSubspaceTolerance = 1e-6;

class ClipClassifier {
 public:
  ClipClassifier(Matrix prompts, double alpha, std::optional<Matrix> intrinsic_basis = {})
      : prompts_(std::move(prompts)), alpha_(alpha), basis_(std::move(intrinsic_basis)) {
    require(prompts_.rows() >= 1 && prompts_.cols() >= 1, "classifier needs prompts");
    require(alpha_ > 0.0 && std::isfinite(alpha_), "alpha must be > 0");
    for (std::size_t j = 0; j < prompts_.rows(); ++j) {
      require(std::abs(norm(prompts_.row(j)) - 1.0) <= kUnitTolerance,
              "prompt " + std::to_string(j) + " is not unit-norm", ErrorKind::invalid_input);
    }
    if (basis_) {
      require(basis_->cols() == prompts_.cols(), "intrinsic basis has wrong ambient dimension");
      for (std::size_t j = 0; j < prompts_.rows(); ++j) {
        require(subspace_residual(prompts_.row(j)) <= kSubspaceTolerance,
                "prompt " + std::to_string(j) + " leaves the intrinsic subspace",
                ErrorKind::invalid_input);
      }
    }
  }

  const Matrix& prompts() const noexcept { return prompts_; }
  double alpha() const noexcept { return alpha_; }
  std::size_t num_classes() const noexcept { return prompts_.rows(); }
  std::size_t ambient_dim() const noexcept { return prompts_.cols(); }
  const std::optional<Matrix>& intrinsic_basis() const noexcept { return basis_; }

  // || v - B^T B v ||
  double subspace_residual(std::span<const double> v) const {
    if (!basis_) return 0.0;
    std::vector<double> proj(v.begin(), v.end());
    for (std::size_t k = 0; k < basis_->rows(); ++k) {
      const double c = dot(basis_->row(k), v);
      for (std::size_t i = 0; i < proj.size(); ++i) proj[i] -= c * (*basis_)(k, i);
    }
    return norm(proj);
  }

 private:
  Matrix prompts_;
  double alpha_;
  std::optional<Matrix> basis_;
};

inline std::vector<double> clip_logits(std::span<const double> z, const ClipClassifier& clf) {
  require(z.size() == clf.ambient_dim(), "image embedding has wrong dimension");
  require(std::abs(norm(z) - 1.0) <= kUnitTolerance, "unnormalized image embedding",
          ErrorKind::invalid_input);
  std::vector<double> s(clf.num_classes());
  for (std::size_t j = 0; j < s.size(); ++j) s[j] = clf.alpha() * dot(z, clf.prompts().row(j));
  return s;
}

// Max-subtracted softmax.
inline std::vector<double> softmax(std::span<const double> logits) {
  require(!logits.empty(), "softmax of an empty vector");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    p[j] = std::exp(logits[j] - top);
    sum += p[j];
  }
  for (double& v : p) v /= sum;
  return p;
}

// Lowest index wins ties.
inline std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// --- records ----------------------------------------------------------------

struct PredictionRecord {
  std::vector<double> probabilities;
  std::size_t label = 0;

  PredictionRecord() = default;
  PredictionRecord(std::vector<double> probs, std::size_t y)
      : probabilities(std::move(probs)), label(y) {
    validate();
  }

  void validate() const {
    require(!probabilities.empty(), "record has no probabilities", ErrorKind::invalid_input);
    require(label < probabilities.size(), "label out of range", ErrorKind::invalid_input);
    double sum = 0.0;
    for (double p : probabilities) {
      require(std::isfinite(p) && p >= 0.0, "probabilities must be nonnegative",
              ErrorKind::invalid_input);
      sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "probabilities must sum to 1", ErrorKind::invalid_input);
  }

  double confidence() const {
    return *std::max_element(probabilities.begin(), probabilities.end());
  }
  bool correct() const { return argmax(probabilities) == label; }
};

// --- evaluation functionals -------------------------------------------------

enum class FunctionalKind {
  logit,
  zero_one,
  cross_entropy_clamped,
  brier,
  smoothed_calibration,
  constant,
};

inline const char* to_string(FunctionalKind k) {
  switch (k) {
    case FunctionalKind::logit: return "logit";
    case FunctionalKind::zero_one: return "zero_one";
    case FunctionalKind::cross_entropy_clamped: return "cross_entropy";
    case FunctionalKind::brier: return "brier";
    case FunctionalKind::smoothed_calibration: return "smoothed_calibration";
    case FunctionalKind::constant: return "constant";
  }
  return "?";
}

struct EvaluationFunctional {
  FunctionalKind kind = FunctionalKind::brier;
  double p_min = 0.01;         // cross_entropy_clamped
  double t_center = 0.8;       // smoothed_calibration
  double bandwidth = 0.1;      // smoothed_calibration
  std::size_t class_index = 0; // logit
  double constant_value = 0.0; // constant

  static EvaluationFunctional logit(std::size_t cls = 0) {
    return {FunctionalKind::logit, 0.01, 0.8, 0.1, cls};
  }
  static EvaluationFunctional zero_one() { return {FunctionalKind::zero_one}; }
  static EvaluationFunctional cross_entropy(double p_min = 0.01) {
    require(p_min > 0.0 && p_min < 0.5, "p_min must lie in (0, 0.5)");
    return {FunctionalKind::cross_entropy_clamped, p_min};
  }
  static EvaluationFunctional brier() { return {FunctionalKind::brier}; }
  static EvaluationFunctional constant(double value) {
    EvaluationFunctional f{FunctionalKind::constant};
    f.constant_value = value;
    return f;
  }
  static EvaluationFunctional smoothed_calibration(double t_center, double bandwidth) {
    require(bandwidth > 0.0, "bandwidth must be > 0");
    return {FunctionalKind::smoothed_calibration, 0.01, t_center, bandwidth};
  }
};

// Trapezoidal gate: 1 on |u| <= 1/2, 0 beyond |u| >= 3/2, slope 1 between.
inline double calibration_gate(double u) { return std::clamp(1.5 - std::abs(u), 0.0, 1.0); }

struct LipschitzFactor {
  std::string stage;
  double factor;
};

struct LipschitzDerivation {
  double value = 1.0;
  std::vector<LipschitzFactor> factors;
  // The gate's support reaches top-class ties, where the correctness
  // indicator jumps; the constant then holds only away from those ties.
  bool piecewise = false;
};

// Product of stage constants: prompt -> logits (alpha, since ||z|| = 1),
// logits -> probabilities (1/2, the softmax Jacobian spectral norm bound),
// probabilities -> functional.
inline LipschitzDerivation lipschitz_constant(const EvaluationFunctional& f, double alpha) {
  require(alpha > 0.0, "alpha must be > 0");
  if (f.kind == FunctionalKind::zero_one) {
    throw Error(ErrorKind::invalid_argument, "non-Lipschitz functional; use smoothed surrogate");
  }
  LipschitzDerivation d;
  if (f.kind == FunctionalKind::constant) {
    d.value = 0.0;
    d.factors.push_back({"constant functional", 0.0});
    return d;
  }
  const auto push = [&d](std::string stage, double factor) {
    d.factors.push_back({std::move(stage), factor});
    d.value *= factor;
  };
  push("prompt->logit (alpha)", alpha);
  if (f.kind == FunctionalKind::logit) return d;
  push("logit->probability (softmax Jacobian)", 0.5);
  switch (f.kind) {
    case FunctionalKind::cross_entropy_clamped:
      push("probability->clamped cross-entropy (1/p_min)", 1.0 / f.p_min);
      break;
    case FunctionalKind::brier:
      push("probability->Brier (2 sqrt 2)", 2.0 * std::sqrt(2.0));
      break;
    case FunctionalKind::smoothed_calibration:
      push("probability->smoothed calibration (1 + 1/h)", 1.0 + 1.0 / f.bandwidth);
      // gate support is [t - 3h/2, t + 3h/2]; ties need top <= 1/2
      d.piecewise = f.t_center - 1.5 * f.bandwidth <= 0.5;
      break;
    default:
      break;
  }
  return d;
}

namespace detail {
inline double eval_probabilities(const EvaluationFunctional& f, std::span<const double> probs,
                                 std::size_t label) {
  switch (f.kind) {
    case FunctionalKind::zero_one:
      return argmax(probs) == label ? 0.0 : 1.0;
    case FunctionalKind::cross_entropy_clamped:
      return -std::log(std::max(probs[label], f.p_min));
    case FunctionalKind::brier: {
      double s = 0.0;
      for (std::size_t j = 0; j < probs.size(); ++j) {
        const double r = probs[j] - (j == label ? 1.0 : 0.0);
        s += r * r;
      }
      return s;
    }
    case FunctionalKind::smoothed_calibration: {
      const std::size_t top = argmax(probs);
      const double c = probs[top];
      const double y = top == label ? 1.0 : 0.0;
      return calibration_gate((c - f.t_center) / f.bandwidth) * (y - c);
    }
    case FunctionalKind::constant:
      return f.constant_value;
    case FunctionalKind::logit:
      break;
  }
  throw Error(ErrorKind::invalid_argument, "logit functional needs logits, not probabilities");
}
}  // namespace detail

inline double eval_functional(const EvaluationFunctional& f, const PredictionRecord& record) {
  record.validate();
  return detail::eval_probabilities(f, record.probabilities, record.label);
}

// Evaluates on raw logits; the only route for the logit functional.
inline double eval_functional_logits(const EvaluationFunctional& f,
                                     std::span<const double> logits, std::size_t label) {
  if (f.kind == FunctionalKind::logit) {
    require(f.class_index < logits.size(), "class index out of range");
    return logits[f.class_index];
  }
  const auto p = softmax(logits);
  return detail::eval_probabilities(f, p, label);
}

// --- calibration summaries --------------------------------------------------

// Equal-width bins on [0,1] over top-class confidence; right-open except the
// last bin.
inline double ece(std::span<const PredictionRecord> records, std::size_t num_bins) {
  require(!records.empty(), "ece of an empty record list", ErrorKind::invalid_input);
  require(num_bins >= 1, "num_bins must be >= 1");
  std::vector<double> conf(num_bins, 0.0), acc(num_bins, 0.0);
  std::vector<std::size_t> count(num_bins, 0);
  for (const auto& r : records) {
    const double c = r.confidence();
    const auto b = std::min(static_cast<std::size_t>(std::floor(c * static_cast<double>(num_bins))),
                            num_bins - 1);
    conf[b] += c;
    acc[b] += r.correct() ? 1.0 : 0.0;
    ++count[b];
  }
  double total = 0.0;
  for (std::size_t b = 0; b < num_bins; ++b) {
    if (count[b] == 0) continue;
    // (n_b / n) |acc_b - conf_b| with both averages over the bin
    total += std::abs(acc[b] - conf[b]);
  }
  return total / static_cast<double>(records.size());
}

// sup_t |(1/n) sum_i (y_i - c_i) 1{c_i <= t}| over thresholds t in {c_i}.
inline double worst_case_calibration(std::span<const PredictionRecord> records) {
  require(!records.empty(), "worst-case calibration of an empty record list",
          ErrorKind::invalid_input);
  std::vector<std::pair<double, double>> pts;  // (confidence, residual)
  pts.reserve(records.size());
  for (const auto& r : records) {
    const double c = r.confidence();
    pts.emplace_back(c, (r.correct() ? 1.0 : 0.0) - c);
  }
  std::sort(pts.begin(), pts.end());
  double cum = 0.0, sup = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    cum += pts[i].second;
    const bool last_of_tie = i + 1 == pts.size() || pts[i + 1].first != pts[i].first;
    if (last_of_tie) sup = std::max(sup, std::abs(cum));
  }
  return sup / static_cast<double>(records.size());
}

struct CurvePoint {
  double t;
  double value;
};

inline constexpr std::size_t kCalibrationGridPoints = 101;

inline std::vector<CurvePoint> smoothed_calibration_curve(std::span<const PredictionRecord> records,
                                                          double bandwidth) {
  require(bandwidth > 0.0, "bandwidth must be > 0");
  require(!records.empty(), "calibration curve of an empty record list", ErrorKind::invalid_input);
  std::vector<CurvePoint> curve;
  curve.reserve(kCalibrationGridPoints);
  for (std::size_t k = 0; k < kCalibrationGridPoints; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(kCalibrationGridPoints - 1);
    const auto f = EvaluationFunctional::smoothed_calibration(t, bandwidth);
    double sum = 0.0;
    for (const auto& r : records) sum += detail::eval_probabilities(f, r.probabilities, r.label);
    curve.push_back({t, sum / static_cast<double>(records.size())});
  }
  return curve;
}

// --- record CSV -------------------------------------------------------------

inline constexpr double kSimplexRenormTolerance = 1e-6;

// Header "prob_0,...,prob_{N-1},label". Rows within 1e-6 of the simplex are
// renormalised; anything further off is rejected.
inline std::vector<PredictionRecord> parse_records_csv(std::string_view text) {
  std::vector<PredictionRecord> out;
  std::size_t line_no = 0, start = 0, classes = 0;
  bool header_seen = false;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    const auto line = detail::trim(text.substr(
        start, end == std::string_view::npos ? std::string_view::npos : end - start));
    ++line_no;
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto fields = detail::split(line, ',');
    if (!header_seen) {
      require(fields.size() >= 2 && detail::trim(fields.back()) == "label",
              "record CSV header must end with 'label'", ErrorKind::parse_error);
      for (std::size_t j = 0; j + 1 < fields.size(); ++j) {
        require(detail::trim(fields[j]) == "prob_" + std::to_string(j),
                "record CSV header column " + std::to_string(j) + " must be prob_" +
                    std::to_string(j),
                ErrorKind::parse_error);
      }
      classes = fields.size() - 1;
      header_seen = true;
      continue;
    }
    if (fields.size() != classes + 1) {
      throw Error(ErrorKind::parse_error, "ragged row at line " + std::to_string(line_no));
    }
    std::vector<double> probs(classes);
    double sum = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      probs[j] = detail::parse_real(fields[j], line_no);
      if (probs[j] < -kSimplexRenormTolerance) {
        throw Error(ErrorKind::invalid_input, "negative probability at line " + std::to_string(line_no));
      }
      probs[j] = std::max(probs[j], 0.0);
      sum += probs[j];
    }
    if (std::abs(sum - 1.0) > kSimplexRenormTolerance) {
      throw Error(ErrorKind::invalid_input,
                  "probabilities off the simplex at line " + std::to_string(line_no));
    }
    for (double& p : probs) p /= sum;
    const double label = detail::parse_real(fields.back(), line_no);
    if (label < 0.0 || label != std::floor(label) || label >= static_cast<double>(classes)) {
      throw Error(ErrorKind::invalid_input, "bad label at line " + std::to_string(line_no));
    }
    out.emplace_back(std::move(probs), static_cast<std::size_t>(label));
  }
  require(header_seen, "record CSV has no header", ErrorKind::parse_error);
  return out;
}

inline std::string records_to_csv(std::span<const PredictionRecord> records) {
  require(!records.empty(), "no records to write");
  const std::size_t classes = records.front().probabilities.size();
  std::string out;
  for (std::size_t j = 0; j < classes; ++j) out += "prob_" + std::to_string(j) + ",";
  out += "label\n";
  char buf[32];
  for (const auto& r : records) {
    for (double p : r.probabilities) {
      const auto res = std::to_chars(buf, buf + sizeof buf, p);
      out.append(buf, res.ptr);
      out.push_back(',');
    }
    out += std::to_string(r.label);
    out.push_back('\n');
  }
  return out;
}

}  // namespace uniconv
