#pragma once

// Embedding / Jacobian spectra: matrix ingestion, covariance, a cyclic Jacobi
// symmetric eigensolver, singular values via the smaller Gram matrix,
// effective-dimension estimates and the spectrum-driven sample-size bounds.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "uniconv/error.hpp"
#include "uniconv/matrix.hpp"

namespace uniconv {

using DataMatrix = Matrix;

enum class SpectrumSource { covariance, singular_squared, explicit_values };

inline const char* to_string(SpectrumSource s) {
  switch (s) {
    case SpectrumSource::covariance: return "covariance";
    case SpectrumSource::singular_squared: return "singular_squared";
    case SpectrumSource::explicit_values: return "explicit";
  }
  return "?";
}

inline constexpr double kNegativeEigenTolerance = 1e-9;

// Descending, nonnegative spectrum. For singular_squared sources `values` holds
// the singular values and lambdas() their squares; otherwise both coincide.
class Spectrum {
 public:
  Spectrum() = default;

  static Spectrum make(std::vector<double> values, SpectrumSource source) {
    require(!values.empty(), "invalid spectrum: empty", ErrorKind::invalid_input);
    for (double v : values) {
      require(std::isfinite(v), "invalid spectrum: non-finite value", ErrorKind::invalid_input);
    }
    std::sort(values.begin(), values.end(), std::greater<>());
    const double top = std::max(values.front(), 0.0);
    for (double& v : values) {
      if (v < 0.0) {
        require(v >= -kNegativeEigenTolerance * top, "invalid spectrum: negative eigenvalue",
                ErrorKind::invalid_input);
        v = 0.0;
      }
    }
    Spectrum s;
    s.values_ = std::move(values);
    s.source_ = source;
    s.trace_ = 0.0;
    for (double l : s.lambdas()) s.trace_ += l;
    return s;
  }

  std::span<const double> values() const noexcept { return values_; }
  SpectrumSource source() const noexcept { return source_; }
  std::size_t size() const noexcept { return values_.size(); }
  // Sum of lambdas().
  double trace() const noexcept { return trace_; }

  std::vector<double> lambdas() const {
    if (source_ != SpectrumSource::singular_squared) return values_;
    std::vector<double> sq(values_.size());
    std::transform(values_.begin(), values_.end(), sq.begin(), [](double s) { return s * s; });
    return sq;
  }

 private:
  std::vector<double> values_;
  SpectrumSource source_ = SpectrumSource::explicit_values;
  double trace_ = 0.0;
};

// --- ingestion --------------------------------------------------------------

enum class MatrixFormat { csv, ucb1 };

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline double parse_real(std::string_view field, std::size_t line) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw Error(ErrorKind::parse_error,
                "cannot parse '" + std::string(field) + "' at line " + std::to_string(line));
  }
  if (!std::isfinite(v)) {
    throw Error(ErrorKind::parse_error, "non-finite entry at line " + std::to_string(line));
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                    : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

inline std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

inline void write_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace detail

inline DataMatrix parse_csv_matrix(std::string_view text) {
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    const auto raw = text.substr(start, end == std::string_view::npos ? std::string_view::npos
                                                                       : end - start);
    ++line_no;
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = detail::split(line, ',');
    if (rows == 0) {
      cols = fields.size();
    } else if (fields.size() != cols) {
      throw Error(ErrorKind::parse_error, "ragged row at line " + std::to_string(line_no));
    }
    for (auto f : fields) values.push_back(detail::parse_real(f, line_no));
    ++rows;
  }
  require(rows > 0, "no data rows", ErrorKind::parse_error);
  return DataMatrix(rows, cols, std::move(values));
}

inline DataMatrix parse_ucb1(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || bytes.substr(0, 4) != "UCB1") {
    throw Error(ErrorKind::parse_error, "bad UCB1 header at offset 0");
  }
  const std::uint32_t rows = detail::read_u32_le(p + 4);
  const std::uint32_t cols = detail::read_u32_le(p + 8);
  require(rows >= 1 && cols >= 1, "UCB1 dimensions must be positive", ErrorKind::parse_error);
  const std::uint64_t count = std::uint64_t{rows} * cols;
  if (bytes.size() != 12 + 8 * count) {
    throw Error(ErrorKind::parse_error, "UCB1 payload size mismatch at offset 12: expected " +
                                            std::to_string(8 * count) + " bytes, found " +
                                            std::to_string(bytes.size() - 12));
  }
  std::vector<double> values(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t{p[12 + 8 * i + b]} << (8 * b);
    std::memcpy(&values[i], &bits, sizeof bits);
    if (!std::isfinite(values[i])) {
      throw Error(ErrorKind::parse_error,
                  "non-finite entry at offset " + std::to_string(12 + 8 * i));
    }
  }
  return DataMatrix(rows, cols, std::move(values));
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::invalid_input, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline DataMatrix load_matrix(const std::string& path, MatrixFormat format) {
  const std::string bytes = read_file(path);
  return format == MatrixFormat::csv ? parse_csv_matrix(bytes) : parse_ucb1(bytes);
}

inline std::string to_csv(const DataMatrix& m) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out.push_back(',');
      const auto res = std::to_chars(buf, buf + sizeof buf, m(i, j));
      out.append(buf, res.ptr);
    }
    out.push_back('\n');
  }
  return out;
}

inline std::string to_ucb1(const DataMatrix& m) {
  std::string out = "UCB1";
  detail::write_u32_le(out, static_cast<std::uint32_t>(m.rows()));
  detail::write_u32_le(out, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.values()) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
  return out;
}

// index,eigenvalue rows (1-based index).
inline std::string spectrum_to_csv(const Spectrum& s) {
  std::string out = "# index,eigenvalue\n";
  char buf[32];
  const auto values = s.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += std::to_string(i + 1);
    out.push_back(',');
    const auto res = std::to_chars(buf, buf + sizeof buf, values[i]);
    out.append(buf, res.ptr);
    out.push_back('\n');
  }
  return out;
}

// Reads either an index,eigenvalue export or a single column of eigenvalues.
inline Spectrum parse_spectrum_csv(std::string_view text) {
  const DataMatrix m = parse_csv_matrix(text);
  require(m.cols() == 1 || m.cols() == 2, "spectrum CSV needs 1 or 2 columns",
          ErrorKind::parse_error);
  std::vector<double> values;
  for (std::size_t i = 0; i < m.rows(); ++i) values.push_back(m(i, m.cols() - 1));
  return Spectrum::make(std::move(values), SpectrumSource::explicit_values);
}

// --- covariance and eigensolver ---------------------------------------------

inline Matrix covariance(const DataMatrix& data, bool center) {
  const std::size_t n = data.rows(), dim = data.cols();
  require(!center || n >= 2, "centered covariance needs at least 2 rows");
  std::vector<double> mean(dim, 0.0);
  if (center) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < dim; ++j) mean[j] += data(i, j);
    for (double& m : mean) m /= static_cast<double>(n);
  }
  Matrix cov(dim, dim);
  std::vector<double> centered(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) centered[j] = data(i, j) - mean[j];
    for (std::size_t a = 0; a < dim; ++a) {
      const double ca = centered[a];
      for (std::size_t b = a; b < dim; ++b) cov(a, b) += ca * centered[b];
    }
  }
  const double divisor = center ? static_cast<double>(n - 1) : static_cast<double>(n);
  for (std::size_t a = 0; a < dim; ++a)
    for (std::size_t b = a; b < dim; ++b) {
      cov(a, b) /= divisor;
      cov(b, a) = cov(a, b);
    }
  return cov;
}

struct SymmetricEigen {
  std::vector<double> values;  // descending, unclamped
  Matrix vectors;              // column k pairs with values[k]
  int sweeps = 0;
  double off_norm = 0.0;
  double residual = 0.0;  // ||V diag(values) V^T - A||_F / ||A||_F

  Spectrum spectrum(SpectrumSource source) const { return Spectrum::make(values, source); }
};

inline constexpr int kDefaultJacobiSweeps = 100;

namespace detail {
inline double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}
}  // namespace detail

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops to
// tol * ||A||_F.
inline SymmetricEigen eig_sym(const Matrix& input, double tol = 1e-14,
                              int max_sweeps = kDefaultJacobiSweeps) {
  require(input.square() && input.rows() >= 1, "eig_sym needs a nonempty square matrix");
  const std::size_t n = input.rows();
  const double scale = input.frobenius();
  require(std::isfinite(scale), "matrix has non-finite entries", ErrorKind::invalid_input);
  double asym = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) asym += 2.0 * std::pow(input(i, j) - input(j, i), 2);
  require(std::sqrt(asym) <= 1e-8 * scale, "matrix is not symmetric", ErrorKind::invalid_input);

  Matrix a = input;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (input(i, j) + input(j, i));
  Matrix v = Matrix::identity(n);

  SymmetricEigen out;
  double off = detail::off_diagonal_norm(a);
  while (off > tol * scale && scale > 0.0) {
    if (out.sweeps >= max_sweeps) {
      throw Error(ErrorKind::numerical, "Jacobi eigensolver did not converge; off-diagonal residual " +
                                            std::to_string(off / scale));
    }
    ++out.sweeps;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    off = detail::off_diagonal_norm(a);
  }
  out.off_norm = off;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }

  Matrix recon(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += out.vectors(i, k) * out.values[k] * out.vectors(j, k);
      recon(i, j) = s;
    }
  out.residual = scale > 0.0 ? (recon - input).frobenius() / scale : 0.0;
  return out;
}

// Singular values from the eigenvalues of the smaller Gram matrix.
inline Spectrum singular_values(const DataMatrix& data) {
  const bool tall = data.rows() >= data.cols();
  const Matrix gram = tall ? data.transposed() * data : data * data.transposed();
  auto eig = eig_sym(gram);
  const double top = std::max(eig.values.front(), 0.0);
  std::vector<double> sv;
  sv.reserve(eig.values.size());
  for (double l : eig.values) {
    require(l >= -kNegativeEigenTolerance * top - 1e-300, "invalid spectrum: negative Gram eigenvalue",
            ErrorKind::numerical);
    sv.push_back(std::sqrt(std::max(l, 0.0)));
  }
  return Spectrum::make(std::move(sv), SpectrumSource::singular_squared);
}

// --- effective dimension ----------------------------------------------------

struct EffectiveDimensionReport {
  std::optional<std::size_t> threshold_dim;   // absent for a zero-trace spectrum
  std::optional<double> participation_ratio;  // absent for a zero-trace spectrum
  std::size_t scale_dim = 0;
  double tau = 0.0;
  double rho = 0.0;
  std::vector<std::string> warnings;
};

inline EffectiveDimensionReport effective_dimension(const Spectrum& spectrum, double tau,
                                                    double rho) {
  require(tau > 0.0 && tau <= 1.0, "tau must lie in (0,1]");
  require(rho > 0.0, "rho must be > 0");
  EffectiveDimensionReport r;
  r.tau = tau;
  r.rho = rho;
  const auto lambdas = spectrum.lambdas();
  for (double l : lambdas)
    if (std::sqrt(l) >= rho) ++r.scale_dim;

  const double total = spectrum.trace();
  if (!(total > 0.0)) {
    r.warnings.emplace_back("degenerate spectrum");
    return r;
  }
  double cum = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    cum += lambdas[k];
    sq += lambdas[k] * lambdas[k];
    // relative slack absorbs rounding in the running sum
    if (!r.threshold_dim && cum >= (tau - 1e-12) * total) r.threshold_dim = k + 1;
  }
  if (!r.threshold_dim) r.threshold_dim = lambdas.size();
  r.participation_ratio = total * total / sq;
  return r;
}

// --- sample-size bounds -----------------------------------------------------

struct SpectralSampleComplexity {
  std::uint64_t n = 0;
  std::vector<double> terms;  // max(ln(L sqrt(lambda_i)/eps), 0) per eigenvalue
  double spectral_sum = 0.0;  // num_classes * sum(terms)
  double confidence_term = 0.0;
  std::size_t contributing = 0;
};

namespace detail {
inline std::uint64_t checked_ceil(double x) {
  require(std::isfinite(x) && x < 1e18, "sample size overflows", ErrorKind::numerical);
  return static_cast<std::uint64_t>(std::ceil(std::max(x, 0.0)));
}
}  // namespace detail

// n >= c4 / eps^2 * (N * sum_i ln(L sqrt(lambda_i) / eps)_+ + ln(1/delta)).
// Only the spectral sum scales with the number of class prototypes N.
inline SpectralSampleComplexity spectral_sample_complexity(const Spectrum& spectrum,
                                                           double lipschitz, double epsilon,
                                                           double delta,
                                                           std::uint64_t num_classes,
                                                           double c4 = 1.0) {
  require(lipschitz > 0.0, "lipschitz constant must be > 0");
  require(epsilon > 0.0, "epsilon must be > 0");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0,1)");
  require(num_classes >= 1, "num_classes must be >= 1");
  require(c4 > 0.0, "c4 must be > 0");
  SpectralSampleComplexity r;
  double sum = 0.0;
  for (double l : spectrum.lambdas()) {
    const double term = std::max(std::log(lipschitz * std::sqrt(l) / epsilon), 0.0);
    if (term > 0.0) ++r.contributing;
    r.terms.push_back(term);
    sum += term;
  }
  r.spectral_sum = static_cast<double>(num_classes) * sum;
  r.confidence_term = std::log(1.0 / delta);
  r.n = detail::checked_ceil(c4 / (epsilon * epsilon) * (r.spectral_sum + r.confidence_term));
  return r;
}

// n >= c / eps^2 * (log N(Theta, rho) + ln(1/delta)); the caller evaluates the
// covering bound at rho = eps / L.
inline std::uint64_t lemma1_sample_complexity(double log_cover, double epsilon, double delta,
                                              double c = 1.0) {
  require(log_cover >= 0.0, "log_cover must be >= 0");
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0,1)");
  require(delta > 0.0 && delta <= 1.0, "delta must lie in (0,1)");
  require(c > 0.0, "c must be > 0");
  return detail::checked_ceil(c / (epsilon * epsilon) * (log_cover + std::log(1.0 / delta)));
}

}  // namespace uniconv
