#pragma once

// Monte Carlo harness for uniform convergence over prompt-induced classifier
// families: synthetic low-intrinsic-dimension worlds, population oracles,
// sup-deviation over prompt nets, scaling-law fits, the ECE-vs-worst-case
// construction and Lipschitz probes.
//
// All sampling is blockwise: block b of a dataset drawn with seed s uses the
// stream make_stream(s, b), and per-block partial sums are reduced in block
// order, so results do not depend on the worker count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "uniconv/error.hpp"
#include "uniconv/matrix.hpp"
#include "uniconv/metric_entropy.hpp"
#include "uniconv/parallel.hpp"
#include "uniconv/spectrum.hpp"
#include "uniconv/vlm_family.hpp"

namespace uniconv {

inline constexpr std::size_t kSampleBlock = 4096;

// Stream tags keep world construction, candidate sampling and probes on
// disjoint seeds.
enum class StreamTag : std::uint64_t {
  basis = 1,
  prompts = 2,
  candidates = 3,
  probe = 4,
  demo = 5,
};

inline std::uint64_t tagged_seed(std::uint64_t seed, StreamTag tag) {
  return mix_seed(seed, 0xA5A5000000000000ULL | static_cast<std::uint64_t>(tag));
}

namespace detail {
inline void random_unit(Rng& rng, std::span<double> out) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& v : out) {
      v = gauss(rng);
      n2 += v * v;
    }
  } while (n2 == 0.0);
  const double inv = 1.0 / std::sqrt(n2);
  for (double& v : out) v *= inv;
}

// Rows orthonormalised by modified Gram-Schmidt.
inline Matrix random_orthonormal_rows(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (;;) {
      auto r = m.row(i);
      for (double& v : r) v = gauss(rng);
      for (std::size_t k = 0; k < i; ++k) {
        const double c = dot(m.row(k), r);
        for (std::size_t j = 0; j < cols; ++j) r[j] -= c * m(k, j);
      }
      const double nr = norm(r);
      if (nr > 1e-6) {
        for (double& v : r) v /= nr;
        break;
      }
    }
  }
  return m;
}
}  // namespace detail

// --- synthetic world --------------------------------------------------------

class SyntheticWorld {
 public:
  SyntheticWorld(std::size_t intrinsic_d, std::size_t ambient_D, std::size_t num_classes,
                 double alpha, std::uint64_t seed)
      : d_(intrinsic_d), D_(ambient_D), N_(num_classes), alpha_(alpha), seed_(seed) {
    require(d_ >= 1 && d_ <= D_, "need 1 <= intrinsic_d <= ambient_D");
    require(N_ >= 1, "need at least one class");
    require(alpha_ > 0.0 && std::isfinite(alpha_), "alpha must be > 0");
    Rng basis_rng = make_stream(tagged_seed(seed_, StreamTag::basis), D_);
    basis_ = detail::random_orthonormal_rows(d_, D_, basis_rng);
    // Intrinsic prompt coordinates come from a stream that does not involve D,
    // so worlds differing only in ambient dimension share them.
    Rng prompt_rng = make_stream(tagged_seed(seed_, StreamTag::prompts), d_);
    prompts_ = Matrix(N_, d_);
    for (std::size_t j = 0; j < N_; ++j) detail::random_unit(prompt_rng, prompts_.row(j));
  }

  std::size_t intrinsic_dim() const noexcept { return d_; }
  std::size_t ambient_dim() const noexcept { return D_; }
  std::size_t num_classes() const noexcept { return N_; }
  double alpha() const noexcept { return alpha_; }
  std::uint64_t seed() const noexcept { return seed_; }

  const Matrix& basis() const noexcept { return basis_; }             // d x D
  const Matrix& true_prompts_intrinsic() const noexcept { return prompts_; }  // N x d

  Matrix embed(const Matrix& intrinsic) const { return intrinsic * basis_; }

  ClipClassifier true_classifier() const {
    return ClipClassifier(embed(prompts_), alpha_, basis_);
  }

  SyntheticWorld with_alpha(double alpha) const {
    return SyntheticWorld(d_, D_, N_, alpha, seed_);
  }

 private:
  std::size_t d_, D_, N_;
  double alpha_;
  std::uint64_t seed_;
  Matrix basis_;
  Matrix prompts_;
};

struct Dataset {
  Matrix intrinsic;  // n x d unit rows
  Matrix ambient;    // n x D unit rows in the span of the basis
  std::vector<std::size_t> labels;
};

namespace detail {
// Samples [begin, begin + count) of block `block`: latent gaussian in R^d,
// normalised, label drawn from the true softmax.
inline void draw_block(const SyntheticWorld& world, std::uint64_t seed, std::size_t block,
                       std::size_t count, std::span<double> latent,
                       std::span<std::size_t> labels) {
  Rng rng = make_stream(seed, block);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t d = world.intrinsic_dim(), N = world.num_classes();
  const Matrix& q = world.true_prompts_intrinsic();
  std::vector<double> logits(N), probs(N);
  for (std::size_t i = 0; i < count; ++i) {
    auto w = latent.subspan(i * d, d);
    random_unit(rng, w);
    for (std::size_t j = 0; j < N; ++j) logits[j] = world.alpha() * dot(w, q.row(j));
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < N; ++j) sum += probs[j] = std::exp(logits[j] - top);
    const double u = unif(rng) * sum;
    double cum = 0.0;
    std::size_t y = N - 1;
    for (std::size_t j = 0; j < N; ++j) {
      cum += probs[j];
      if (u < cum) {
        y = j;
        break;
      }
    }
    labels[i] = y;
  }
}

inline std::size_t block_count(std::size_t n) { return (n + kSampleBlock - 1) / kSampleBlock; }
}  // namespace detail

inline Dataset gen_synthetic(const SyntheticWorld& world, std::size_t n,
                             std::optional<std::uint64_t> data_seed = {},
                             bool with_ambient = true, unsigned workers = 0) {
  require(n >= 1, "n must be >= 1");
  const std::uint64_t seed = data_seed.value_or(world.seed());
  const std::size_t d = world.intrinsic_dim();
  std::vector<double> latent(n * d);
  std::vector<std::size_t> labels(n);
  parallel_for(detail::block_count(n), workers, [&](std::size_t b) {
    const std::size_t begin = b * kSampleBlock;
    const std::size_t count = std::min(kSampleBlock, n - begin);
    detail::draw_block(world, seed, b, count, std::span(latent).subspan(begin * d, count * d),
                       std::span(labels).subspan(begin, count));
  });
  Dataset ds;
  ds.intrinsic = Matrix(n, d, std::move(latent));
  if (with_ambient) ds.ambient = world.embed(ds.intrinsic);
  ds.labels = std::move(labels);
  return ds;
}

// --- prompt families --------------------------------------------------------

// Single-prompt perturbation family: class `varied_class` takes each row of
// `configs` (intrinsic unit vectors) while the other prompts stay at truth.
struct PromptFamily {
  std::size_t varied_class = 0;
  Matrix configs;  // K x d

  std::size_t size() const noexcept { return configs.rows(); }
};

// Candidate configurations: row 0 is the true prompt, the rest uniform on the
// intrinsic sphere.
inline PromptFamily sample_prompt_configurations(const SyntheticWorld& world, std::size_t count,
                                                 std::uint64_t seed, std::size_t varied_class = 0) {
  require(count >= 1, "need at least one configuration");
  require(varied_class < world.num_classes(), "varied class out of range");
  PromptFamily fam;
  fam.varied_class = varied_class;
  fam.configs = Matrix(count, world.intrinsic_dim());
  const auto truth = world.true_prompts_intrinsic().row(varied_class);
  std::copy(truth.begin(), truth.end(), fam.configs.row(0).begin());
  Rng rng = make_stream(tagged_seed(seed, StreamTag::candidates), world.intrinsic_dim());
  for (std::size_t k = 1; k < count; ++k) detail::random_unit(rng, fam.configs.row(k));
  return fam;
}

// Greedy rho-net of the candidate configurations (euclidean chord metric,
// identical in intrinsic and ambient coordinates).
inline PromptFamily prompt_net(const PromptFamily& candidates, double rho) {
  const NetResult net = greedy_net(candidates.configs, rho, NetMetric::euclidean);
  return {candidates.varied_class, select_rows(candidates.configs, net.centers)};
}

// --- functional evaluation over a family ------------------------------------

namespace detail {

// Evaluates a functional when one class logit is swapped out per
// configuration. Per-sample statistics of the untouched logits are
// precomputed so each (sample, configuration) pair costs one exp.
class ReplaceOneEvaluator {
 public:
  ReplaceOneEvaluator(const SyntheticWorld& world, const EvaluationFunctional& f,
                      const PromptFamily& family)
      : world_(world), f_(f), fam_(family) {}

  void set_sample(std::span<const double> w, std::size_t label) {
    w_ = w;
    label_ = label;
    const std::size_t N = world_.num_classes(), v = fam_.varied_class;
    const Matrix& q = world_.true_prompts_intrinsic();
    rest_max_ = -std::numeric_limits<double>::infinity();
    rest_arg_ = N;
    logits_.assign(N, 0.0);
    for (std::size_t j = 0; j < N; ++j) {
      if (j == v) continue;
      logits_[j] = world_.alpha() * dot(w, q.row(j));
      if (logits_[j] > rest_max_) {
        rest_max_ = logits_[j];
        rest_arg_ = j;
      }
    }
    rest_sum_ = rest_sq_ = label_exp_ = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      if (j == v) continue;
      const double e = std::exp(logits_[j] - rest_max_);
      rest_sum_ += e;
      rest_sq_ += e * e;
      if (j == label) label_exp_ = e;
    }
  }

  double operator()(std::size_t k) const {
    const std::size_t v = fam_.varied_class;
    const double s_v = world_.alpha() * dot(w_, fam_.configs.row(k));
    switch (f_.kind) {
      case FunctionalKind::constant:
        return f_.constant_value;
      case FunctionalKind::logit:
        return f_.class_index == v ? s_v : logits_[f_.class_index];
      default:
        break;
    }
    if (rest_arg_ == world_.num_classes()) {
      // single class: probability 1 on v
      const std::vector<double> p{1.0};
      return eval_probabilities(f_, p, label_);
    }
    // Rescale to the overall max so no exponent is positive.
    const double top_logit = std::max(s_v, rest_max_);
    const double scale = s_v > rest_max_ ? std::exp(rest_max_ - s_v) : 1.0;
    const double e_v = std::exp(s_v - top_logit);
    const double total = rest_sum_ * scale + e_v;
    const double p_v = e_v / total;
    const double p_label = label_ == v ? p_v : label_exp_ * scale / total;
    const bool v_wins = s_v > rest_max_ || (s_v == rest_max_ && v < rest_arg_);
    const std::size_t top = v_wins ? v : rest_arg_;
    switch (f_.kind) {
      case FunctionalKind::zero_one:
        return top == label_ ? 0.0 : 1.0;
      case FunctionalKind::cross_entropy_clamped:
        return -std::log(std::max(p_label, f_.p_min));
      case FunctionalKind::brier:
        return rest_sq_ * (scale / total) * (scale / total) + p_v * p_v + 1.0 - 2.0 * p_label;
      case FunctionalKind::smoothed_calibration: {
        const double c = v_wins ? p_v : scale / total;
        const double y = top == label_ ? 1.0 : 0.0;
        return calibration_gate((c - f_.t_center) / f_.bandwidth) * (y - c);
      }
      default:
        break;
    }
    throw Error(ErrorKind::invalid_argument, "unsupported functional");
  }

 private:
  const SyntheticWorld& world_;
  const EvaluationFunctional& f_;
  const PromptFamily& fam_;
  std::span<const double> w_;
  std::size_t label_ = 0;
  std::vector<double> logits_;
  double rest_max_ = 0.0, rest_sum_ = 0.0, rest_sq_ = 0.0, label_exp_ = 0.0;
  std::size_t rest_arg_ = 0;
};

struct FamilySums {
  std::vector<double> sum;
  std::vector<double> sum_sq;
};

// Per-configuration sums of the functional over n samples drawn with `seed`.
inline FamilySums family_sums(const SyntheticWorld& world, const EvaluationFunctional& f,
                              const PromptFamily& family, std::size_t n, std::uint64_t seed,
                              unsigned workers) {
  const std::size_t K = family.size(), d = world.intrinsic_dim();
  const std::size_t blocks = block_count(n);
  std::vector<double> partial(blocks * K, 0.0), partial_sq(blocks * K, 0.0);
  parallel_for(blocks, workers, [&](std::size_t b) {
    const std::size_t begin = b * kSampleBlock;
    const std::size_t count = std::min(kSampleBlock, n - begin);
    std::vector<double> latent(count * d);
    std::vector<std::size_t> labels(count);
    draw_block(world, seed, b, count, latent, labels);
    ReplaceOneEvaluator eval(world, f, family);
    double* sums = partial.data() + b * K;
    double* sqs = partial_sq.data() + b * K;
    for (std::size_t i = 0; i < count; ++i) {
      eval.set_sample(std::span<const double>(latent).subspan(i * d, d), labels[i]);
      for (std::size_t k = 0; k < K; ++k) {
        const double v = eval(k);
        sums[k] += v;
        sqs[k] += v * v;
      }
    }
  });
  FamilySums out{std::vector<double>(K, 0.0), std::vector<double>(K, 0.0)};
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t k = 0; k < K; ++k) {
      out.sum[k] += partial[b * K + k];
      out.sum_sq[k] += partial_sq[b * K + k];
    }
  return out;
}

}  // namespace detail

// Slow reference path: full classifier, full softmax.
inline double evaluate_configuration(const SyntheticWorld& world, const EvaluationFunctional& f,
                                     const PromptFamily& family, std::size_t k,
                                     std::span<const double> w, std::size_t label) {
  Matrix prompts = world.true_prompts_intrinsic();
  const auto cfg = family.configs.row(k);
  std::copy(cfg.begin(), cfg.end(), prompts.row(family.varied_class).begin());
  std::vector<double> logits(world.num_classes());
  for (std::size_t j = 0; j < logits.size(); ++j) logits[j] = world.alpha() * dot(w, prompts.row(j));
  if (f.kind == FunctionalKind::constant) return f.constant_value;
  return eval_functional_logits(f, logits, label);
}

// --- population oracle ------------------------------------------------------

enum class PopulationEstimator { reference_sample, closed_form };

inline const char* to_string(PopulationEstimator e) {
  return e == PopulationEstimator::closed_form ? "closed_form" : "reference_sample";
}

inline constexpr std::size_t kDefaultOracleSamples = 1'000'000;

struct PopulationEstimate {
  std::vector<double> mean;
  std::vector<double> stderr_;  // sample std / sqrt(M); zero for closed forms
  std::size_t samples = 0;
  PopulationEstimator estimator = PopulationEstimator::reference_sample;
  std::uint64_t seed = 0;
};

// Closed forms exist for the constant functional and, because the latent
// distribution is isotropic on the intrinsic sphere, for logits (mean zero).
inline bool has_closed_form(const EvaluationFunctional& f) {
  return f.kind == FunctionalKind::constant || f.kind == FunctionalKind::logit;
}

inline PopulationEstimate population_oracle(const SyntheticWorld& world,
                                            const EvaluationFunctional& f,
                                            const PromptFamily& family,
                                            std::size_t samples = kDefaultOracleSamples,
                                            std::uint64_t seed = 0,
                                            std::optional<PopulationEstimator> estimator = {},
                                            unsigned workers = 0) {
  require(family.size() >= 1, "empty prompt family", ErrorKind::invalid_input);
  PopulationEstimate pop;
  pop.seed = seed;
  pop.estimator = estimator.value_or(has_closed_form(f) ? PopulationEstimator::closed_form
                                                        : PopulationEstimator::reference_sample);
  const std::size_t K = family.size();
  if (pop.estimator == PopulationEstimator::closed_form) {
    require(has_closed_form(f), "no closed form for this functional");
    const double value = f.kind == FunctionalKind::constant ? f.constant_value : 0.0;
    pop.mean.assign(K, value);
    pop.stderr_.assign(K, 0.0);
    return pop;
  }
  require(samples >= 2, "oracle needs at least 2 samples");
  pop.samples = samples;
  const auto sums = detail::family_sums(world, f, family, samples, seed, workers);
  const double m = static_cast<double>(samples);
  pop.mean.resize(K);
  pop.stderr_.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    pop.mean[k] = sums.sum[k] / m;
    const double var = std::max(sums.sum_sq[k] / m - pop.mean[k] * pop.mean[k], 0.0) * m / (m - 1.0);
    pop.stderr_[k] = std::sqrt(var / m);
  }
  return pop;
}

// --- sup deviation over a net -----------------------------------------------

struct SupDeviationReport {
  std::size_t net_size = 0;
  std::vector<double> per_point_gaps;
  std::vector<double> empirical_means;
  double sup_gap = 0.0;
  std::size_t argmax = 0;
  std::size_t n_train = 0;
  std::uint64_t seed = 0;
  PopulationEstimator population_estimator = PopulationEstimator::reference_sample;
};

// One training set of size n_train shared by every net point.
inline SupDeviationReport sup_deviation_over_net(const SyntheticWorld& world,
                                                 const EvaluationFunctional& f,
                                                 const PromptFamily& net,
                                                 const PopulationEstimate& population,
                                                 std::size_t n_train, std::uint64_t seed,
                                                 unsigned workers = 0) {
  require(net.size() >= 1, "net is empty", ErrorKind::invalid_input);
  require(population.mean.size() == net.size(), "population estimate does not match the net");
  require(n_train >= 1, "n_train must be >= 1");
  SupDeviationReport r;
  r.net_size = net.size();
  r.n_train = n_train;
  r.seed = seed;
  r.population_estimator = population.estimator;
  const auto sums = detail::family_sums(world, f, net, n_train, seed, workers);
  r.per_point_gaps.resize(net.size());
  r.empirical_means.resize(net.size());
  for (std::size_t k = 0; k < net.size(); ++k) {
    r.empirical_means[k] = sums.sum[k] / static_cast<double>(n_train);
    r.per_point_gaps[k] = std::abs(r.empirical_means[k] - population.mean[k]);
    if (r.per_point_gaps[k] > r.sup_gap) {
      r.sup_gap = r.per_point_gaps[k];
      r.argmax = k;
    }
  }
  return r;
}

inline SupDeviationReport sup_deviation_over_net(const SyntheticWorld& world,
                                                 const EvaluationFunctional& f,
                                                 const PromptFamily& net, std::size_t n_train,
                                                 std::uint64_t seed,
                                                 std::size_t oracle_samples = kDefaultOracleSamples,
                                                 std::uint64_t oracle_seed = 1,
                                                 unsigned workers = 0) {
  require(net.size() >= 1, "net is empty", ErrorKind::invalid_input);
  const auto pop = population_oracle(world, f, net, oracle_samples, oracle_seed, {}, workers);
  return sup_deviation_over_net(world, f, net, pop, n_train, seed, workers);
}

// --- single-prompt net pipeline -------------------------------------------

// Smallest epsilon (to 1e-12 relative) with
//   c / eps^2 * (log_cover(eps / L) + ln(1/delta)) <= n,
// where log_cover is c1 * varied_prompts * d * ln(L / eps).
inline double lemma1_epsilon(std::size_t n, double delta, double lipschitz,
                             std::size_t varied_prompts, std::size_t intrinsic_dim,
                             double c = 1.0, double c1 = 1.0) {
  require(n >= 1, "n must be >= 1");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0,1)");
  require(lipschitz > 0.0, "lipschitz constant must be > 0");
  const auto required = [&](double eps) {
    const double log_cover =
        prompt_product_covering_log(varied_prompts, intrinsic_dim, eps / lipschitz, c1);
    return c / (eps * eps) * (log_cover + std::log(1.0 / delta));
  };
  double lo = 1e-9, hi = 1.0;
  if (required(hi) > static_cast<double>(n)) return 1.0;  // vacuous at this n
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (required(mid) > static_cast<double>(n) ? lo : hi) = mid;
  }
  return hi;
}

struct Lemma1Config {
  std::size_t intrinsic_d = 3;
  std::size_t ambient_D = 256;
  std::size_t num_classes = 5;
  double alpha = 20.0;
  EvaluationFunctional functional = EvaluationFunctional::brier();
  std::size_t n_train = 4096;
  double delta = 0.05;
  double c = 1.0;
  double c1 = 1.0;
  std::size_t candidates = 1024;
  std::size_t replicates = 100;
  std::size_t oracle_samples = kDefaultOracleSamples;
  std::uint64_t seed = 0;
};

struct Lemma1Result {
  double lipschitz = 0.0;
  double epsilon = 0.0;
  double rho = 0.0;
  std::size_t net_size = 0;
  std::vector<double> sup_gaps;  // per replicate
  std::size_t within = 0;        // replicates with sup_gap <= epsilon
  double max_oracle_stderr = 0.0;
};

inline Lemma1Result lemma1_pipeline(const Lemma1Config& cfg, unsigned workers = 0) {
  const SyntheticWorld world(cfg.intrinsic_d, cfg.ambient_D, cfg.num_classes, cfg.alpha, cfg.seed);
  Lemma1Result r;
  r.lipschitz = lipschitz_constant(cfg.functional, cfg.alpha).value;
  r.epsilon = lemma1_epsilon(cfg.n_train, cfg.delta, r.lipschitz, 1, cfg.intrinsic_d, cfg.c, cfg.c1);
  r.rho = r.epsilon / r.lipschitz;
  const auto net = prompt_net(sample_prompt_configurations(world, cfg.candidates, cfg.seed), r.rho);
  r.net_size = net.size();
  const auto pop = population_oracle(world, cfg.functional, net, cfg.oracle_samples,
                                     mix_seed(cfg.seed, 0xC0FFEE), {}, workers);
  for (double s : pop.stderr_) r.max_oracle_stderr = std::max(r.max_oracle_stderr, s);
  for (std::size_t rep = 0; rep < cfg.replicates; ++rep) {
    const auto rpt = sup_deviation_over_net(world, cfg.functional, net, pop, cfg.n_train,
                                            mix_seed(cfg.seed, rep), workers);
    r.sup_gaps.push_back(rpt.sup_gap);
    if (rpt.sup_gap <= r.epsilon) ++r.within;
  }
  return r;
}

// --- scaling experiments ----------------------------------------------------

enum class ScalingAxis { n, d };

struct ScalingOptions {
  std::size_t n_fixed = 1 << 14;            // axis d
  std::size_t candidates = 512;
  double net_rho = 0.05;
  std::size_t oracle_samples = kDefaultOracleSamples;
  // Axis d: alpha = world.alpha * sqrt(d), i.e. the logit sensitivity to the
  // unnormalised latent gaussian stays fixed while d grows.
  bool hold_latent_lipschitz = true;
};

struct ScalingPoint {
  double x = 0.0;
  double mean_sup_gap = 0.0;
  double std_sup_gap = 0.0;
  std::size_t net_size = 0;
  std::vector<double> sup_gaps;
};

struct ScalingFit {
  ScalingAxis axis = ScalingAxis::n;
  std::vector<ScalingPoint> grid;
  double log_log_slope = 0.0;
  double slope_stderr = 0.0;
  double intercept = 0.0;
  bool degenerate_response = false;
  std::vector<std::string> warnings;
};

struct LineFit {
  double slope = 0.0, intercept = 0.0, slope_stderr = 0.0;
};

inline LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "line fit needs >= 2 points");
  const double k = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / k;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  require(sxx > 0.0, "degenerate grid");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (x.size() > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - (f.intercept + f.slope * x[i]);
      ssr += r * r;
    }
    f.slope_stderr = std::sqrt(ssr / (k - 2.0) / sxx);
  }
  return f;
}

inline ScalingPoint summarize_point(double x, std::vector<double> gaps, std::size_t net_size) {
  ScalingPoint p;
  p.x = x;
  p.net_size = net_size;
  const double k = static_cast<double>(gaps.size());
  p.mean_sup_gap = std::accumulate(gaps.begin(), gaps.end(), 0.0) / k;
  double ss = 0.0;
  for (double g : gaps) ss += (g - p.mean_sup_gap) * (g - p.mean_sup_gap);
  p.std_sup_gap = gaps.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
  p.sup_gaps = std::move(gaps);
  return p;
}

inline void fit_scaling(ScalingFit& fit) {
  std::vector<double> lx, ly;
  for (const auto& p : fit.grid) {
    if (!(p.mean_sup_gap > 0.0)) {
      fit.degenerate_response = true;
      fit.warnings.emplace_back("degenerate response");
      fit.log_log_slope = 0.0;
      fit.slope_stderr = 0.0;
      return;
    }
    lx.push_back(std::log(p.x));
    ly.push_back(std::log(p.mean_sup_gap));
  }
  const auto lf = least_squares(lx, ly);
  fit.log_log_slope = lf.slope;
  fit.slope_stderr = lf.slope_stderr;
  fit.intercept = lf.intercept;
}

inline void check_scaling_grid(std::span<const double> grid) {
  require(grid.size() >= 4, "degenerate grid: need at least 4 points");
  const auto [lo, hi] = std::minmax_element(grid.begin(), grid.end());
  require(*lo > 0.0 && *hi >= 8.0 * *lo, "degenerate grid: need an 8x range");
}

// Axis n sweeps the training size in `world`; axis d rebuilds the world at
// each intrinsic dimension (same seed, ambient D and class count).
inline ScalingFit scaling_experiment(const SyntheticWorld& world, const EvaluationFunctional& f,
                                     ScalingAxis axis, std::span<const double> grid,
                                     std::size_t reps, std::uint64_t seed,
                                     const ScalingOptions& opt = {}, unsigned workers = 0) {
  check_scaling_grid(grid);
  require(reps >= 1, "reps must be >= 1");
  ScalingFit fit;
  fit.axis = axis;
  if (axis == ScalingAxis::n) {
    const auto net = prompt_net(sample_prompt_configurations(world, opt.candidates, seed), opt.net_rho);
    const auto pop = population_oracle(world, f, net, opt.oracle_samples,
                                       mix_seed(seed, 0xC0FFEE), {}, workers);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto n = static_cast<std::size_t>(grid[g]);
      require(n >= 1 && static_cast<double>(n) == grid[g], "n grid must hold positive integers");
      std::vector<double> gaps;
      for (std::size_t r = 0; r < reps; ++r) {
        gaps.push_back(sup_deviation_over_net(world, f, net, pop, n,
                                              mix_seed(mix_seed(seed, g + 1), r), workers)
                           .sup_gap);
      }
      fit.grid.push_back(summarize_point(grid[g], std::move(gaps), net.size()));
    }
  } else {
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto d = static_cast<std::size_t>(grid[g]);
      require(d >= 1 && static_cast<double>(d) == grid[g], "d grid must hold positive integers");
      const double alpha =
          opt.hold_latent_lipschitz ? world.alpha() * std::sqrt(static_cast<double>(d)) : world.alpha();
      const SyntheticWorld wd(d, std::max(world.ambient_dim(), d), world.num_classes(), alpha,
                              world.seed());
      const auto net = prompt_net(sample_prompt_configurations(wd, opt.candidates, seed), opt.net_rho);
      const auto pop = population_oracle(wd, f, net, opt.oracle_samples,
                                         mix_seed(seed, 0xC0FFEE), {}, workers);
      std::vector<double> gaps;
      for (std::size_t r = 0; r < reps; ++r) {
        gaps.push_back(sup_deviation_over_net(wd, f, net, pop, opt.n_fixed,
                                              mix_seed(mix_seed(seed, g + 1), r), workers)
                           .sup_gap);
      }
      fit.grid.push_back(summarize_point(grid[g], std::move(gaps), net.size()));
    }
  }
  fit_scaling(fit);
  return fit;
}

// --- ECE vs worst-case calibration ------------------------------------------

struct EceDemo {
  std::vector<PredictionRecord> records;
  double gap = 0.0;
  double ece_coarse = 0.0;  // B = 10
  double ece_fine = 0.0;    // B = 100
  double worst_case = 0.0;
};

inline constexpr double kDemoLowConfidence = 0.91;
inline constexpr double kDemoHighConfidence = 0.99;

// Two confidence levels inside the ECE bin [0.9, 1.0): half the records at
// 0.91 are correct at rate 0.91 + gap, half at 0.99 at rate 0.99 - gap. The
// bin average is calibrated while the cumulative residual at t = 0.91 is
// gap / 2.
inline EceDemo ece_vs_worstcase_demo(double gap, std::size_t n, std::uint64_t seed) {
  require(n >= 1000 && n % 2 == 0, "n must be even and >= 1000");
  require(gap >= 0.0 && gap < 0.1, "gap must lie in [0, 0.1)");
  const double low_rate = kDemoLowConfidence + gap, high_rate = kDemoHighConfidence - gap;
  require(low_rate <= 1.0 && high_rate >= 0.0, "gap pushes a correctness rate outside [0,1]");
  EceDemo demo;
  demo.gap = gap;
  const std::size_t half = n / 2;
  const auto emit = [&](double conf, double rate) {
    const auto correct = static_cast<std::size_t>(std::llround(rate * static_cast<double>(half)));
    for (std::size_t i = 0; i < half; ++i) {
      demo.records.emplace_back(std::vector<double>{conf, 1.0 - conf}, i < correct ? 0u : 1u);
    }
  };
  emit(kDemoLowConfidence, low_rate);
  emit(kDemoHighConfidence, high_rate);
  Rng rng = make_stream(tagged_seed(seed, StreamTag::demo), n);
  std::shuffle(demo.records.begin(), demo.records.end(), rng);
  demo.ece_coarse = ece(demo.records, 10);
  demo.ece_fine = ece(demo.records, 100);
  demo.worst_case = worst_case_calibration(demo.records);
  return demo;
}

// --- Lipschitz probes -------------------------------------------------------

struct LipschitzProbeResult {
  double max_ratio = 0.0;
  double analytic = 0.0;
  bool piecewise = false;
  std::size_t trials = 0;
  std::size_t degenerate = 0;  // zero-length perturbations, excluded
  std::size_t exceed = 0;      // probes with ratio > analytic beyond roundoff
};

// Aligned logit probes attain the bound exactly, so the quotient can land a
// few ulps above it.
inline constexpr double kProbeRoundoff = 1e-12;

// Random (z, label, class, perturbation) probes within the classifier's
// intrinsic subspace. Every tenth probe aligns z with the perturbation, where
// the logit stage is tight.
inline LipschitzProbeResult lipschitz_probe(const ClipClassifier& clf,
                                            const EvaluationFunctional& f, std::size_t trials,
                                            std::uint64_t seed) {
  require(trials >= 1000, "trials must be >= 1000");
  const auto deriv = lipschitz_constant(f, clf.alpha());
  LipschitzProbeResult out;
  out.analytic = deriv.value;
  out.piecewise = deriv.piecewise;
  out.trials = trials;
  const std::size_t D = clf.ambient_dim(), N = clf.num_classes();
  const Matrix basis = clf.intrinsic_basis().value_or(Matrix::identity(D));
  const std::size_t d = basis.rows();
  Rng rng = make_stream(tagged_seed(seed, StreamTag::probe), 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> coeff(d), z(D), dir(D), moved(D), logits(N), logits2(N);
  const auto to_ambient = [&](std::span<const double> c, std::span<double> out_vec) {
    std::fill(out_vec.begin(), out_vec.end(), 0.0);
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t i = 0; i < D; ++i) out_vec[i] += c[k] * basis(k, i);
  };
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t j = static_cast<std::size_t>(unif(rng) * static_cast<double>(N)) % N;
    const std::size_t label = static_cast<std::size_t>(unif(rng) * static_cast<double>(N)) % N;
    const double step = std::pow(10.0, -3.0 + 3.0 * unif(rng));
    detail::random_unit(rng, coeff);
    to_ambient(coeff, dir);
    const auto p = clf.prompts().row(j);
    for (std::size_t i = 0; i < D; ++i) moved[i] = p[i] + step * dir[i];
    const double mn = norm(moved);
    for (double& v : moved) v /= mn;
    double dist = 0.0;
    for (std::size_t i = 0; i < D; ++i) dist += (moved[i] - p[i]) * (moved[i] - p[i]);
    dist = std::sqrt(dist);
    if (t % 10 == 9 && dist > 0.0) {
      for (std::size_t i = 0; i < D; ++i) z[i] = (moved[i] - p[i]) / dist;
      // renormalise away rounding
      const double zn = norm(z);
      for (double& v : z) v /= zn;
    } else {
      detail::random_unit(rng, coeff);
      to_ambient(coeff, z);
      const double zn = norm(z);
      for (double& v : z) v /= zn;
    }
    if (dist == 0.0) {
      ++out.degenerate;
      continue;
    }
    for (std::size_t c = 0; c < N; ++c) {
      logits[c] = clf.alpha() * dot(z, clf.prompts().row(c));
      logits2[c] = c == j ? clf.alpha() * dot(z, moved) : logits[c];
    }
    const double a = f.kind == FunctionalKind::constant ? f.constant_value
                                                        : eval_functional_logits(f, logits, label);
    const double b = f.kind == FunctionalKind::constant ? f.constant_value
                                                        : eval_functional_logits(f, logits2, label);
    const double ratio = std::abs(a - b) / dist;
    out.max_ratio = std::max(out.max_ratio, ratio);
    if (ratio > out.analytic * (1.0 + kProbeRoundoff)) ++out.exceed;
  }
  return out;
}

}  // namespace uniconv
