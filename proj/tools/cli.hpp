#pragma once

// uniconv command-line front end. run() is separate from main() so tests can
// drive the exact same code path.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uniconv/empirical_process.hpp"
#include "uniconv/metric_entropy.hpp"
#include "uniconv/simulate.hpp"
#include "uniconv/spectrum.hpp"
#include "uniconv/svg.hpp"
#include "uniconv/vlm_family.hpp"

namespace uniconv::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "1";

struct Shared {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  bool json = false, csv = false, svg = false;
  unsigned workers = 0;
  std::string config;
};

struct DkwArgs {
  std::uint64_t n = 0;
  double delta = 0.0, epsilon = 0.0;
  std::uint64_t trials = 0;
  bool kolmogorov = false;
};

struct PlanArgs {
  double epsilon = 0.0, delta = 0.0, lipschitz = 1.0, c4 = 1.0, c = 1.0, c1 = 1.0;
  std::string spectrum;
  std::uint64_t classes = 1, intrinsic_dim = 0;
};

struct SpectrumArgs {
  std::string input, format = "csv", mode = "covariance";
  bool center = false;
  double tau = 0.9, rho = 0.1;
};

struct CoverArgs {
  std::string points, metric = "euclidean", family = "ball", spectrum;
  double rho = 0.1, radius = 1.0, c1 = 1.0, c3 = 1.0;
  std::uint64_t dim = 0, classes = 1, intrinsic_dim = 1;
};

struct VlmArgs {
  std::string records, functional = "brier";
  std::uint64_t bins = 10;
  double bandwidth = 0.1, alpha = 1.0, p_min = 0.01, t_center = 0.8;
};

struct SimArgs {
  std::string experiment = "lemma1", axis = "n", functional = "brier", grid;
  std::uint64_t d = 3, D = 256, classes = 5, n = 4096, reps = 100, candidates = 1024,
                oracle_samples = kDefaultOracleSamples, probe_trials = 100000;
  double alpha = 20.0, delta = 0.05, c = 1.0, c1 = 1.0, net_rho = 0.05, p_min = 0.01,
         t_center = 0.8, bandwidth = 0.1;
  bool fixed_alpha = false;
};

struct DemoArgs {
  double gap = 0.08;
  std::uint64_t n = 10000;
};

// Report being assembled by one subcommand.
struct Report {
  json inputs = json::object();
  json results = json::object();
  std::vector<std::string> warnings;
  std::map<std::string, std::string> csv;  // file name -> contents
  std::map<std::string, std::string> svg;

  void warn(const std::string& w) {
    if (std::find(warnings.begin(), warnings.end(), w) == warnings.end()) warnings.push_back(w);
  }
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline EvaluationFunctional functional_from(const std::string& name, double p_min,
                                            double t_center, double bandwidth) {
  if (name == "brier") return EvaluationFunctional::brier();
  if (name == "cross_entropy") return EvaluationFunctional::cross_entropy(p_min);
  if (name == "smoothed_calibration") return EvaluationFunctional::smoothed_calibration(t_center, bandwidth);
  if (name == "logit") return EvaluationFunctional::logit(0);
  if (name == "zero_one") return EvaluationFunctional::zero_one();
  throw Error(ErrorKind::invalid_argument, "unknown functional '" + name + "'");
}

inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  for (auto field : uniconv::detail::split(text, ',')) {
    if (uniconv::detail::trim(field).empty()) continue;
    out.push_back(uniconv::detail::parse_real(field, 1));
  }
  return out;
}

inline json derivation_json(const LipschitzDerivation& d) {
  json factors = json::array();
  for (const auto& f : d.factors) factors.push_back({{"stage", f.stage}, {"factor", f.factor}});
  return {{"value", d.value}, {"factors", factors}, {"piecewise", d.piecewise}};
}

// Config file: key = value per line, '#' comments. Keys name long flags.
// Entries are appended only when the flag is absent from the command line, so
// flags win.
inline std::vector<std::string> merge_config(const std::vector<std::string>& args,
                                             const std::string& path) {
  std::vector<std::string> merged = args;
  std::istringstream in(uniconv::read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = std::string(uniconv::detail::trim(line));
    if (t.empty() || t.front() == '#' || t.front() == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::parse_error, "config line " + std::to_string(line_no) + " lacks '='");
    }
    std::string key(uniconv::detail::trim(std::string_view(t).substr(0, eq)));
    std::string value(uniconv::detail::trim(std::string_view(t).substr(eq + 1)));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (given) continue;
    if (value == "true") {
      merged.push_back(flag);
    } else if (value != "false") {
      merged.push_back(flag);
      merged.push_back(value);
    }
  }
  return merged;
}

}  // namespace detail

// --- command bodies ---------------------------------------------------------

inline void run_dkw(const DkwArgs& a, const Shared& s, Report& r) {
  using detail::fmt;
  r.inputs["n"] = a.n ? json(a.n) : json(nullptr);
  r.inputs["delta"] = a.delta > 0 ? json(a.delta) : json(nullptr);
  r.inputs["epsilon"] = a.epsilon > 0 ? json(a.epsilon) : json(nullptr);
  bool any = false;
  if (a.n && a.delta > 0) {
    r.results["epsilon"] = dkw_epsilon(a.n, a.delta);
    if (dkw_delta_vacuous(a.delta)) r.warn("vacuous bound");
    any = true;
  }
  if (a.n && a.epsilon > 0) {
    const double tail = dkw_tail(a.n, a.epsilon);
    r.results["tail_probability"] = tail;
    if (dkw_tail_vacuous(tail)) r.warn("vacuous bound");
    any = true;
  }
  if (a.epsilon > 0 && a.delta > 0) {
    r.results["sample_size"] = dkw_sample_size(a.epsilon, a.delta);
    if (dkw_delta_vacuous(a.delta)) r.warn("vacuous bound");
    any = true;
  }
  if (a.trials) {
    require(a.n && a.epsilon > 0, "--trials needs --n and --epsilon");
    r.inputs["trials"] = a.trials;
    const auto cov = mc_dkw_coverage(a.n, a.epsilon, a.trials, s.seed, s.workers);
    r.results["coverage"] = {{"violations", cov.violations},
                             {"violation_frequency", cov.violation_frequency},
                             {"bound", cov.bound},
                             {"within_bound", cov.violation_frequency <= cov.bound},
                             {"mean_deviation", cov.mean_deviation},
                             {"max_deviation", cov.max_deviation}};
    if (cov.vacuous) r.warn("vacuous bound");
    std::string csv = "# trial,sup_deviation\n";
    for (std::size_t t = 0; t < cov.deviations.size(); ++t)
      csv += std::to_string(t) + "," + fmt(cov.deviations[t]) + "\n";
    r.csv["coverage.csv"] = csv;
    any = true;
  }
  if (a.kolmogorov) {
    require(a.n, "--kolmogorov needs --n");
    const std::uint64_t trials = a.trials ? a.trials : 10000;
    r.inputs["kolmogorov_trials"] = trials;
    const auto q = mc_kolmogorov_fit(a.n, trials, s.seed, s.workers);
    r.results["kolmogorov"] = {{"probabilities", q.probabilities},
                               {"empirical", q.empirical},
                               {"theoretical", q.theoretical},
                               {"max_discrepancy", q.max_discrepancy},
                               {"pre_asymptotic", q.pre_asymptotic}};
    if (q.pre_asymptotic) r.warn("pre-asymptotic");
    std::string csv = "# probability,empirical,theoretical\n";
    svg::Plot plot{"sqrt(n) sup|F_n - F| quantiles", "probability", "quantile", svg::Style::line, {}, {}};
    svg::Series emp{"empirical", {}}, th{"Kolmogorov", {}};
    for (std::size_t i = 0; i < q.probabilities.size(); ++i) {
      csv += fmt(q.probabilities[i]) + "," + fmt(q.empirical[i]) + "," + fmt(q.theoretical[i]) + "\n";
      emp.points.emplace_back(q.probabilities[i], q.empirical[i]);
      th.points.emplace_back(q.probabilities[i], q.theoretical[i]);
    }
    plot.series = {emp, th};
    r.csv["kolmogorov.csv"] = csv;
    r.svg["kolmogorov.svg"] = svg::render(plot);
    any = true;
  }
  require(any, "dkw needs two of --n, --delta, --epsilon (or --kolmogorov with --n)");
}

inline void run_plan(const PlanArgs& a, const Shared&, Report& r) {
  using detail::fmt;
  r.inputs = {{"epsilon", a.epsilon}, {"delta", a.delta}, {"lipschitz", a.lipschitz},
              {"classes", a.classes}, {"c4", a.c4}, {"c", a.c}, {"c1", a.c1},
              {"spectrum", a.spectrum.empty() ? json(nullptr) : json(a.spectrum)},
              {"intrinsic_dim", a.intrinsic_dim ? json(a.intrinsic_dim) : json(nullptr)}};
  r.results["dkw_sample_size"] = dkw_sample_size(a.epsilon, a.delta);
  if (!a.spectrum.empty()) {
    const auto spec = parse_spectrum_csv(read_file(a.spectrum));
    const auto sc = spectral_sample_complexity(spec, a.lipschitz, a.epsilon, a.delta, a.classes, a.c4);
    r.results["spectral"] = {{"n", sc.n},
                             {"terms", sc.terms},
                             {"spectral_sum", sc.spectral_sum},
                             {"confidence_term", sc.confidence_term},
                             {"contributing_directions", sc.contributing}};
    std::string csv = "# index,lambda,term\n";
    const auto lambdas = spec.lambdas();
    for (std::size_t i = 0; i < lambdas.size(); ++i)
      csv += std::to_string(i + 1) + "," + fmt(lambdas[i]) + "," + fmt(sc.terms[i]) + "\n";
    r.csv["spectral_terms.csv"] = csv;
  }
  if (a.intrinsic_dim) {
    const double rho = a.epsilon / a.lipschitz;
    const auto cover = prompt_product_covering(a.classes, a.intrinsic_dim, rho, a.c1);
    if (cover.vacuous_radius) r.warn("vacuous radius");
    r.results["lemma1"] = {{"rho", rho},
                           {"log_cover", cover.log_cover},
                           {"n", lemma1_sample_complexity(cover.log_cover, a.epsilon, a.delta, a.c)}};
  }
}

inline void run_spectrum(const SpectrumArgs& a, const Shared&, Report& r) {
  r.inputs = {{"input", a.input}, {"format", a.format}, {"mode", a.mode},
              {"center", a.center}, {"tau", a.tau}, {"rho", a.rho}};
  const auto fmt_enum = a.format == "ucb1" ? MatrixFormat::ucb1 : MatrixFormat::csv;
  const DataMatrix data = load_matrix(a.input, fmt_enum);
  Spectrum spec;
  json solver = json::object();
  if (a.mode == "singular") {
    spec = singular_values(data);
  } else {
    const auto eig = eig_sym(covariance(data, a.center));
    solver = {{"sweeps", eig.sweeps}, {"reconstruction_residual", eig.residual}};
    spec = eig.spectrum(SpectrumSource::covariance);
  }
  const auto eff = effective_dimension(spec, a.tau, a.rho);
  for (const auto& w : eff.warnings) r.warn(w);
  r.results = {{"rows", data.rows()},
               {"cols", data.cols()},
               {"source", to_string(spec.source())},
               {"values", std::vector<double>(spec.values().begin(), spec.values().end())},
               {"trace", spec.trace()},
               {"solver", solver},
               {"threshold_dim", eff.threshold_dim ? json(*eff.threshold_dim) : json(nullptr)},
               {"participation_ratio",
                eff.participation_ratio ? json(*eff.participation_ratio) : json(nullptr)},
               {"scale_dim", eff.scale_dim}};
  r.csv["spectrum.csv"] = spectrum_to_csv(spec);
  svg::Series s{"eigenvalues", {}};
  const auto vals = spec.values();
  for (std::size_t i = 0; i < vals.size(); ++i)
    if (vals[i] > 0.0) s.points.emplace_back(static_cast<double>(i + 1), vals[i]);
  if (!s.points.empty()) {
    r.svg["spectrum.svg"] =
        svg::render({"spectrum", "index", "value", svg::Style::loglog, {s}, {}});
  }
}

inline void run_cover(const CoverArgs& a, const Shared&, Report& r) {
  r.inputs = {{"points", a.points}, {"rho", a.rho}, {"metric", a.metric}, {"family", a.family},
              {"radius", a.radius}, {"dim", a.dim}, {"classes", a.classes},
              {"intrinsic_dim", a.intrinsic_dim}, {"c1", a.c1}, {"c3", a.c3},
              {"spectrum", a.spectrum.empty() ? json(nullptr) : json(a.spectrum)}};
  const Matrix pts = load_matrix(a.points, MatrixFormat::csv);
  CoveringSpec analytic;
  if (a.family == "ball") {
    const std::uint64_t dim = a.dim ? a.dim : pts.cols();
    analytic = {a.rho, ball_covering_log(dim, a.radius, a.rho), 1.0, CoverFamily::ball, false};
  } else if (a.family == "prompt_product") {
    analytic = prompt_product_covering(a.classes, a.intrinsic_dim, a.rho, a.c1);
    if (analytic.vacuous_radius) r.warn("vacuous radius");
  } else if (a.family == "ellipsoid") {
    require(!a.spectrum.empty(), "ellipsoid family needs --spectrum");
    const auto e = ellipsoid_entropy(parse_spectrum_csv(read_file(a.spectrum)), a.rho, a.c3);
    analytic = {a.rho, e.value, a.c3, CoverFamily::ellipsoid, false};
    r.results["contributing_directions"] = e.contributing;
  } else {
    throw Error(ErrorKind::invalid_argument, "unknown family '" + a.family + "'");
  }
  const auto metric = a.metric == "geodesic" ? NetMetric::geodesic_sphere : NetMetric::euclidean;
  const auto cmp = compare_analytic_empirical(pts, a.rho, analytic, metric);
  r.results["net_size"] = cmp.net_size;
  r.results["centers"] = cmp.net.centers;
  r.results["covered_certificate"] = cmp.net.covered_certificate;
  r.results["max_uncovered_distance"] = cmp.net.max_uncovered_distance;
  r.results["empirical_log"] = cmp.empirical_log;
  r.results["analytic_log"] = cmp.analytic_log;
  r.results["constant"] = analytic.constant;
  r.results["family"] = to_string(analytic.family);
  r.results["ratio"] = std::isfinite(cmp.ratio) ? json(cmp.ratio) : json(nullptr);
  r.results["violation"] = cmp.violation;
  if (cmp.violation) r.warn("empirical net exceeds analytic bound");
  std::string csv = "# center_index\n";
  for (auto c : cmp.net.centers) csv += std::to_string(c) + "\n";
  r.csv["centers.csv"] = csv;
}

inline void run_vlm(const VlmArgs& a, const Shared&, Report& r) {
  using detail::fmt;
  r.inputs = {{"records", a.records.empty() ? json(nullptr) : json(a.records)},
              {"bins", a.bins}, {"bandwidth", a.bandwidth}, {"alpha", a.alpha},
              {"functional", a.functional}, {"p_min", a.p_min}, {"t_center", a.t_center}};
  const auto f = detail::functional_from(a.functional, a.p_min, a.t_center, a.bandwidth);
  if (f.kind == FunctionalKind::zero_one) {
    r.results["lipschitz"] = nullptr;
    r.warn("non-Lipschitz functional; use smoothed surrogate");
  } else {
    const auto d = lipschitz_constant(f, a.alpha);
    r.results["lipschitz"] = detail::derivation_json(d);
    if (d.piecewise) r.warn("piecewise-Lipschitz gate");
  }
  if (a.records.empty()) return;
  const auto records = parse_records_csv(read_file(a.records));
  r.results["count"] = records.size();
  r.results["ece"] = ece(records, a.bins);
  r.results["worst_case_calibration"] = worst_case_calibration(records);
  double mean_f = 0.0;
  for (const auto& rec : records) mean_f += eval_functional(f, rec);
  if (f.kind != FunctionalKind::logit) r.results["mean_functional"] = mean_f / records.size();
  const auto curve = smoothed_calibration_curve(records, a.bandwidth);
  std::string csv = "# t,value\n";
  svg::Series s{"smoothed calibration", {}};
  for (const auto& p : curve) {
    csv += fmt(p.t) + "," + fmt(p.value) + "\n";
    s.points.emplace_back(p.t, p.value);
  }
  r.csv["calibration_curve.csv"] = csv;
  r.svg["calibration_curve.svg"] =
      svg::render({"smoothed calibration residual", "confidence t", "value", svg::Style::line, {s}, {}});
}

inline void run_simulate(const SimArgs& a, const Shared& s, Report& r) {
  using detail::fmt;
  const auto f = detail::functional_from(a.functional, a.p_min, a.t_center, a.bandwidth);
  r.inputs = {{"experiment", a.experiment}, {"d", a.d}, {"D", a.D}, {"classes", a.classes},
              {"alpha", a.alpha}, {"functional", a.functional}};
  if (a.experiment == "lemma1") {
    Lemma1Config cfg;
    cfg.intrinsic_d = a.d;
    cfg.ambient_D = a.D;
    cfg.num_classes = a.classes;
    cfg.alpha = a.alpha;
    cfg.functional = f;
    cfg.n_train = a.n;
    cfg.delta = a.delta;
    cfg.c = a.c;
    cfg.c1 = a.c1;
    cfg.candidates = a.candidates;
    cfg.replicates = a.reps;
    cfg.oracle_samples = a.oracle_samples;
    cfg.seed = s.seed;
    r.inputs.update({{"n", a.n}, {"delta", a.delta}, {"c", a.c}, {"c1", a.c1},
                     {"candidates", a.candidates}, {"reps", a.reps},
                     {"oracle_samples", a.oracle_samples}});
    const auto res = lemma1_pipeline(cfg, s.workers);
    r.results = {{"lipschitz", res.lipschitz},  {"epsilon", res.epsilon},
                 {"rho", res.rho},              {"net_size", res.net_size},
                 {"within", res.within},        {"replicates", res.sup_gaps.size()},
                 {"fraction_within", static_cast<double>(res.within) / res.sup_gaps.size()},
                 {"max_oracle_stderr", res.max_oracle_stderr},
                 {"sup_gaps", res.sup_gaps}};
    std::string csv = "# replicate,sup_gap\n";
    for (std::size_t i = 0; i < res.sup_gaps.size(); ++i)
      csv += std::to_string(i) + "," + fmt(res.sup_gaps[i]) + "\n";
    r.csv["replicates.csv"] = csv;
  } else if (a.experiment == "scaling") {
    const auto axis = a.axis == "d" ? ScalingAxis::d : ScalingAxis::n;
    std::vector<double> grid = a.grid.empty()
        ? (axis == ScalingAxis::n ? std::vector<double>{128, 256, 512, 1024, 2048, 4096, 8192, 16384}
                                  : std::vector<double>{2, 4, 8, 16})
        : detail::parse_grid(a.grid);
    ScalingOptions opt;
    opt.n_fixed = a.n;
    opt.candidates = a.candidates;
    opt.net_rho = a.net_rho;
    opt.oracle_samples = a.oracle_samples;
    opt.hold_latent_lipschitz = !a.fixed_alpha;
    r.inputs.update({{"axis", a.axis}, {"grid", grid}, {"reps", a.reps}, {"n", a.n},
                     {"candidates", a.candidates}, {"net_rho", a.net_rho},
                     {"oracle_samples", a.oracle_samples}, {"fixed_alpha", a.fixed_alpha}});
    const SyntheticWorld world(a.d, a.D, a.classes, a.alpha, s.seed);
    const auto fit = scaling_experiment(world, f, axis, grid, a.reps, s.seed, opt, s.workers);
    for (const auto& w : fit.warnings) r.warn(w);
    json pts = json::array();
    std::string csv = "# x,mean_sup_gap,std_sup_gap,net_size\n";
    svg::Series series{"mean sup gap", {}};
    for (const auto& p : fit.grid) {
      pts.push_back({{"x", p.x}, {"mean_sup_gap", p.mean_sup_gap}, {"std_sup_gap", p.std_sup_gap},
                     {"net_size", p.net_size}});
      csv += fmt(p.x) + "," + fmt(p.mean_sup_gap) + "," + fmt(p.std_sup_gap) + "," +
             std::to_string(p.net_size) + "\n";
      series.points.emplace_back(p.x, p.mean_sup_gap);
    }
    r.results = {{"grid", pts},
                 {"log_log_slope", fit.log_log_slope},
                 {"slope_stderr", fit.slope_stderr},
                 {"degenerate_response", fit.degenerate_response}};
    r.csv["scaling.csv"] = csv;
    if (!fit.degenerate_response) {
      svg::Plot plot{"sup deviation scaling", a.axis, "mean sup gap", svg::Style::loglog, {series},
                     svg::FitLine{fit.log_log_slope, fit.intercept, "fit"}};
      r.svg["scaling.svg"] = svg::render(plot);
    }
  } else if (a.experiment == "probe") {
    const SyntheticWorld world(a.d, a.D, a.classes, a.alpha, s.seed);
    r.inputs.update({{"probe_trials", a.probe_trials}});
    const auto res = lipschitz_probe(world.true_classifier(), f, a.probe_trials, s.seed);
    r.results = {{"max_ratio", res.max_ratio}, {"analytic", res.analytic},
                 {"exceed", res.exceed},       {"degenerate", res.degenerate},
                 {"piecewise", res.piecewise}};
    if (res.piecewise) r.warn("piecewise-Lipschitz gate");
  } else {
    throw Error(ErrorKind::invalid_argument, "unknown experiment '" + a.experiment + "'");
  }
}

inline void run_demo(const DemoArgs& a, const Shared& s, Report& r) {
  r.inputs = {{"gap", a.gap}, {"n", a.n}};
  const auto demo = ece_vs_worstcase_demo(a.gap, a.n, s.seed);
  r.results = {{"ece_bins_10", demo.ece_coarse},
               {"ece_bins_100", demo.ece_fine},
               {"worst_case_calibration", demo.worst_case}};
  r.csv["records.csv"] = records_to_csv(demo.records);
  // cumulative residual as a step function of the confidence threshold
  std::vector<std::pair<double, double>> pts;
  for (const auto& rec : demo.records) pts.emplace_back(rec.confidence(), (rec.correct() ? 1.0 : 0.0) - rec.confidence());
  std::sort(pts.begin(), pts.end());
  svg::Series series{"cumulative residual", {}};
  double cum = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    cum += pts[i].second;
    if (i + 1 == pts.size() || pts[i + 1].first != pts[i].first)
      series.points.emplace_back(pts[i].first, cum / static_cast<double>(pts.size()));
  }
  r.svg["cumulative_residual.svg"] =
      svg::render({"cumulative calibration residual", "confidence threshold", "residual",
                   svg::Style::step, {series}, {}});
}

// --- driver -----------------------------------------------------------------

inline void write_file(const std::filesystem::path& p, const std::string& contents) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::invalid_input, "cannot write " + p.string());
  out << contents;
}

// Exit codes: 0 success, 1 domain error, 2 usage error.
inline int run(const std::vector<std::string>& argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Finite-sample uniform-convergence bounds and Monte Carlo checks", "uniconv"};
  app.require_subcommand(1);
  Shared s;
  DkwArgs dkw;
  PlanArgs plan;
  SpectrumArgs spec;
  CoverArgs cover;
  VlmArgs vlm;
  SimArgs sim;
  DemoArgs demo;

  const auto shared = [&](CLI::App* sub) {
    sub->option_defaults()->always_capture_default();
    sub->add_option("--seed", s.seed, "RNG seed");
    sub->add_option("--out", s.out_dir, "output directory");
    sub->add_flag("--json", s.json, "write report.json (default when no format is chosen)");
    sub->add_flag("--csv", s.csv, "write CSV artifacts");
    sub->add_flag("--svg", s.svg, "write SVG plots");
    sub->add_option("--workers", s.workers, "worker threads (0 = all cores)");
    sub->add_option("--config", s.config, "key = value configuration file");
  };

  auto* c_dkw = app.add_subcommand("dkw", "DKW tail / epsilon / sample size, Monte Carlo coverage");
  shared(c_dkw);
  c_dkw->add_option("--n", dkw.n)->check(CLI::PositiveNumber);
  c_dkw->add_option("--delta", dkw.delta)->check(CLI::PositiveNumber);
  c_dkw->add_option("--epsilon", dkw.epsilon)->check(CLI::PositiveNumber);
  c_dkw->add_option("--trials", dkw.trials, "Monte Carlo coverage trials");
  c_dkw->add_flag("--kolmogorov", dkw.kolmogorov, "compare sqrt(n) sup deviation to the Kolmogorov law");

  auto* c_plan = app.add_subcommand("plan", "sample-size planning");
  shared(c_plan);
  c_plan->add_option("--epsilon", plan.epsilon)->required()->check(CLI::PositiveNumber);
  c_plan->add_option("--delta", plan.delta)->required()->check(CLI::PositiveNumber);
  c_plan->add_option("--spectrum", plan.spectrum, "eigenvalue CSV")->check(CLI::ExistingFile);
  c_plan->add_option("--lipschitz", plan.lipschitz)->check(CLI::PositiveNumber);
  c_plan->add_option("--classes", plan.classes)->check(CLI::PositiveNumber);
  c_plan->add_option("--c4", plan.c4)->check(CLI::PositiveNumber);
  c_plan->add_option("--c", plan.c)->check(CLI::PositiveNumber);
  c_plan->add_option("--c1", plan.c1)->check(CLI::PositiveNumber);
  c_plan->add_option("--intrinsic-dim", plan.intrinsic_dim, "plan over a single-prompt product family");

  auto* c_spec = app.add_subcommand("spectrum", "covariance / singular spectra and effective dimension");
  shared(c_spec);
  c_spec->add_option("--input", spec.input)->required()->check(CLI::ExistingFile);
  c_spec->add_option("--format", spec.format)->check(CLI::IsMember({"csv", "ucb1"}));
  c_spec->add_option("--mode", spec.mode)->check(CLI::IsMember({"covariance", "singular"}));
  c_spec->add_flag("--center", spec.center);
  c_spec->add_option("--tau", spec.tau)->check(CLI::Range(1e-12, 1.0));
  c_spec->add_option("--rho", spec.rho)->check(CLI::PositiveNumber);

  auto* c_cover = app.add_subcommand("cover", "greedy nets vs analytic covering bounds");
  shared(c_cover);
  c_cover->add_option("--points", cover.points)->required()->check(CLI::ExistingFile);
  c_cover->add_option("--rho", cover.rho)->check(CLI::PositiveNumber);
  c_cover->add_option("--metric", cover.metric)->check(CLI::IsMember({"euclidean", "geodesic"}));
  c_cover->add_option("--family", cover.family)->check(CLI::IsMember({"ball", "prompt_product", "ellipsoid"}));
  c_cover->add_option("--radius", cover.radius)->check(CLI::PositiveNumber);
  c_cover->add_option("--dim", cover.dim);
  c_cover->add_option("--classes", cover.classes)->check(CLI::PositiveNumber);
  c_cover->add_option("--intrinsic-dim", cover.intrinsic_dim)->check(CLI::PositiveNumber);
  c_cover->add_option("--c1", cover.c1)->check(CLI::PositiveNumber);
  c_cover->add_option("--c3", cover.c3)->check(CLI::PositiveNumber);
  c_cover->add_option("--spectrum", cover.spectrum)->check(CLI::ExistingFile);

  auto* c_vlm = app.add_subcommand("vlm", "Lipschitz constants and calibration audit of prediction records");
  shared(c_vlm);
  c_vlm->add_option("--records", vlm.records)->check(CLI::ExistingFile);
  c_vlm->add_option("--bins", vlm.bins)->check(CLI::PositiveNumber);
  c_vlm->add_option("--bandwidth", vlm.bandwidth)->check(CLI::PositiveNumber);
  c_vlm->add_option("--alpha", vlm.alpha)->check(CLI::PositiveNumber);
  c_vlm->add_option("--functional", vlm.functional)
      ->check(CLI::IsMember({"brier", "cross_entropy", "smoothed_calibration", "logit", "zero_one"}));
  c_vlm->add_option("--p-min", vlm.p_min)->check(CLI::Range(1e-12, 0.5));
  c_vlm->add_option("--t-center", vlm.t_center);

  auto* c_sim = app.add_subcommand("simulate", "Monte Carlo uniform-convergence experiments");
  shared(c_sim);
  c_sim->add_option("--experiment", sim.experiment)->check(CLI::IsMember({"lemma1", "scaling", "probe"}));
  c_sim->add_option("--axis", sim.axis)->check(CLI::IsMember({"n", "d"}));
  c_sim->add_option("--functional", sim.functional)
      ->check(CLI::IsMember({"brier", "cross_entropy", "smoothed_calibration", "logit"}));
  c_sim->add_option("--grid", sim.grid, "comma-separated grid");
  c_sim->add_option("--d", sim.d)->check(CLI::PositiveNumber);
  c_sim->add_option("--D", sim.D)->check(CLI::PositiveNumber);
  c_sim->add_option("--classes", sim.classes)->check(CLI::PositiveNumber);
  c_sim->add_option("--alpha", sim.alpha)->check(CLI::PositiveNumber);
  c_sim->add_option("--n", sim.n)->check(CLI::PositiveNumber);
  c_sim->add_option("--delta", sim.delta)->check(CLI::Range(1e-12, 0.999999));
  c_sim->add_option("--c", sim.c)->check(CLI::PositiveNumber);
  c_sim->add_option("--c1", sim.c1)->check(CLI::PositiveNumber);
  c_sim->add_option("--reps", sim.reps)->check(CLI::PositiveNumber);
  c_sim->add_option("--candidates", sim.candidates)->check(CLI::PositiveNumber);
  c_sim->add_option("--oracle-samples", sim.oracle_samples)->check(CLI::Range(2ULL, 1ULL << 40));
  c_sim->add_option("--net-rho", sim.net_rho)->check(CLI::PositiveNumber);
  c_sim->add_option("--probe-trials", sim.probe_trials)->check(CLI::Range(1000ULL, 1ULL << 40));
  c_sim->add_option("--p-min", sim.p_min)->check(CLI::Range(1e-12, 0.5));
  c_sim->add_option("--t-center", sim.t_center);
  c_sim->add_option("--bandwidth", sim.bandwidth)->check(CLI::PositiveNumber);
  c_sim->add_flag("--fixed-alpha", sim.fixed_alpha, "axis d: keep alpha fixed instead of alpha*sqrt(d)");

  auto* c_demo = app.add_subcommand("demo-ece", "low ECE with large worst-case calibration deviation");
  shared(c_demo);
  c_demo->add_option("--gap", demo.gap)->check(CLI::Range(0.0, 0.0999999));
  c_demo->add_option("--n", demo.n)->check(CLI::PositiveNumber);

  std::vector<std::string> args(argv.begin(), argv.end());
  try {
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
      if (args[i] == "--config") {
        args = detail::merge_config(args, args[i + 1]);
        break;
      }
      if (args[i].rfind("--config=", 0) == 0) {
        args = detail::merge_config(args, args[i].substr(9));
        break;
      }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const Error& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  if (!s.json && !s.csv && !s.svg) s.json = true;
  const auto started = std::chrono::steady_clock::now();
  Report report;
  std::string command;
  try {
    default_workers() = s.workers;
    if (c_dkw->parsed()) { command = "dkw"; run_dkw(dkw, s, report); }
    else if (c_plan->parsed()) { command = "plan"; run_plan(plan, s, report); }
    else if (c_spec->parsed()) { command = "spectrum"; run_spectrum(spec, s, report); }
    else if (c_cover->parsed()) { command = "cover"; run_cover(cover, s, report); }
    else if (c_vlm->parsed()) { command = "vlm"; run_vlm(vlm, s, report); }
    else if (c_sim->parsed()) { command = "simulate"; run_simulate(sim, s, report); }
    else if (c_demo->parsed()) { command = "demo-ece"; run_demo(demo, s, report); }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["command"] = command;
  doc["seed"] = s.seed;
  doc["inputs"] = report.inputs;
  doc["results"] = report.results;
  doc["warnings"] = report.warnings;
  doc["timing"] = {{"elapsed_seconds", elapsed}, {"workers", resolve_workers(s.workers)}};

  try {
    const std::filesystem::path dir(s.out_dir);
    std::filesystem::create_directories(dir);
    if (s.json) write_file(dir / "report.json", doc.dump(2) + "\n");
    if (s.csv)
      for (const auto& [name, body] : report.csv) write_file(dir / name, body);
    if (s.svg)
      for (const auto& [name, body] : report.svg) write_file(dir / name, body);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  json summary = doc;
  summary.erase("timing");
  out << summary["results"].dump() << "\n";
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";
  return 0;
}

}  // namespace uniconv::cli
