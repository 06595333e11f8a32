#include "lyap/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "lyap/invariant.hpp"
#include "lyap/io.hpp"
#include "lyap/linalg.hpp"
#include "lyap/margulis.hpp"
#include "lyap/markov.hpp"
#include "lyap/measure.hpp"
#include "lyap/spectrum.hpp"
#include "lyap/stationary.hpp"

namespace lyap {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Shared runner plumbing
// ---------------------------------------------------------------------------

// Collects named pass/fail checks for the report; failed names propagate to
// ExperimentResult::failures and turn into exit code 2.
struct Checks {
  json list = json::array();
  std::vector<std::string> failures;

  void add(const std::string& name, bool passed, const std::string& detail) {
    list.push_back({{"name", name}, {"passed", passed}, {"detail", detail}});
    if (!passed) failures.push_back(name);
  }
};

std::string cell(double x) { return num_str(x); }
std::string cell(int x) { return std::to_string(x); }
std::string cell(std::uint64_t x) { return std::to_string(x); }

std::uint64_t resolve_seed(ConfigReader& cfg, const std::optional<std::uint64_t>& override_seed) {
  // The config must always carry a seed (reproducibility contract), even when
  // a CLI/environment override supersedes its value.
  const std::uint64_t from_config = cfg.require_u64("seed");
  return override_seed ? *override_seed : from_config;
}

// Exactly one measure source must be present in the config.
AtomicMatrixMeasure measure_from_config(ConfigReader& cfg) {
  std::optional<AtomicMatrixMeasure> m;
  int provided = 0;
  if (cfg.has("measure")) {
    m = matrix_measure_from_json(cfg.raw("measure"));
    ++provided;
  }
  if (cfg.has("measure_path")) {
    m = load_matrix_measure(cfg.require_str("measure_path"));
    ++provided;
  }
  if (cfg.has("example32")) {
    ConfigReader e(cfg.raw("example32"), "example32");
    const double sigma = e.number("sigma", 2.0);
    const double theta = e.number("theta", 0.1);
    e.done();
    m = example32_measure(sigma, theta);
    ++provided;
  }
  if (cfg.has("kifer_t")) {
    m = kifer_measure(cfg.require_number("kifer_t"));
    ++provided;
  }
  if (cfg.has("random_measure")) {
    ConfigReader r(cfg.raw("random_measure"), "random_measure");
    const int d = r.integer("d", 3);
    const int k = r.integer("k_atoms", 3);
    const double spread = r.number("spread", 1.0);
    const std::uint64_t s = r.u64("seed", 5);
    r.done();
    Rng rng(s, 0);
    m = random_invertible_measure(d, k, spread, rng);
    ++provided;
  }
  if (provided != 1)
    throw std::invalid_argument(
        "config: provide exactly one measure source "
        "(measure | measure_path | example32 | kifer_t | random_measure)");
  return *m;
}

SubspacePoint subspace_from_json(const json& j, int d, const std::string& context) {
  ConfigReader cfg(j, context);
  if (cfg.has("axes")) {
    std::vector<int> axes = cfg.integer_list("axes", {});
    cfg.done();
    return SubspacePoint::standard(d, axes);
  }
  const int r = cfg.integer("r", 1);
  const Matrix frame = matrix_from_json(cfg.raw("frame"), d, r, context + ".frame");
  cfg.done();
  return SubspacePoint::from_span(frame);
}

MargulisParams margulis_params_from_config(const json& j, int rank,
                                           const std::string& context) {
  MargulisParams p = MargulisParams::defaults(rank);
  if (j.is_null()) return p;
  ConfigReader cfg(j, context);
  p.gamma = cfg.number_list("gamma", p.gamma);
  p.beta = cfg.number_list("beta", p.beta);
  p.omega = cfg.number_list("omega", p.omega);
  p.Omega = cfg.number("Omega", p.Omega);
  p.eps_cut = cfg.number("eps_cut", p.eps_cut);
  p.B = cfg.number("B", p.B);
  cfg.done();
  return p;
}

json spectrum_to_json(const SpectrumEstimate& s) {
  return json{{"values", s.values},
              {"half_widths", s.half_widths},
              {"partial_sums", s.partial_sums},
              {"n_steps", s.n_steps},
              {"n_trials", s.n_trials},
              {"method", s.method},
              {"closed_form", s.closed_form},
              {"sum_estimate", s.sum_estimate},
              {"sum_exact", s.sum_exact},
              {"qr_det_residual", s.qr_det_residual}};
}

json top_to_json(const TopExponentEstimate& t) {
  return json{{"estimate", t.estimate},
              {"half_width", t.half_width},
              {"closed_form", t.closed_form},
              {"n_trials", t.per_trial.size()}};
}

json drift_report_to_json(const DriftReport& r) {
  return json{{"n", r.n},
              {"samples", r.samples},
              {"mean_drift", r.mean_drift},
              {"median_drift", r.median_drift},
              {"fraction_decreasing", r.fraction_decreasing},
              {"min_increment", r.min_increment},
              {"max_increment", r.max_increment},
              {"C_bound", r.C_bound},
              {"seed", r.seed}};
}

Vector vector_from_list(const std::vector<double>& v) {
  Vector out(long(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[long(i)] = v[i];
  return out;
}

std::vector<int> int_list_from_json(const json& j, const std::string& context) {
  if (!j.is_array()) throw std::invalid_argument(context + ": expected an array");
  std::vector<int> out;
  for (const auto& e : j) {
    if (!e.is_number_integer()) throw std::invalid_argument(context + ": expected integers");
    out.push_back(e.get<int>());
  }
  return out;
}

// ---------------------------------------------------------------------------
// spectrum
// ---------------------------------------------------------------------------

ExperimentResult run_spectrum(ConfigReader& cfg, std::uint64_t seed, int workers) {
  const AtomicMatrixMeasure nu = measure_from_config(cfg);
  const std::string method = cfg.str("method", "qr");
  const long long n_steps = cfg.integer("n_steps", 20000);
  const int n_trials = cfg.integer("n_trials", 16);
  const bool want_filtration = cfg.boolean("filtration", false);
  const long long filtration_steps = cfg.integer("filtration_steps", 2000);
  cfg.done();

  Checks checks;
  ExperimentResult out;
  out.report = json{{"experiment", "spectrum"}, {"seed", seed}, {"dim", nu.dim()}};

  CsvTable table;
  table.header = {"method", "l", "lambda", "half_width", "partial_sum"};
  auto add_rows = [&table](const SpectrumEstimate& s) {
    for (std::size_t l = 0; l < s.values.size(); ++l)
      table.rows.push_back({s.method, cell(int(l + 1)), cell(s.values[l]),
                            cell(s.half_widths[l]), cell(s.partial_sums[l])});
  };

  std::optional<SpectrumEstimate> qr, ext;
  if (method == "qr" || method == "both") {
    qr = full_spectrum_qr(nu, n_steps, n_trials, seed, workers);
    out.report["qr"] = spectrum_to_json(*qr);
    add_rows(*qr);
    checks.add("qr_sum_pinned", std::abs(qr->sum_estimate - qr->sum_exact) <= 1e-9,
               "|sum_estimate - sum_exact| = " +
                   num_str(std::abs(qr->sum_estimate - qr->sum_exact)));
  }
  if (method == "exterior" || method == "both") {
    ext = spectrum_via_exterior(nu, n_steps, n_trials, seed, workers);
    out.report["exterior"] = spectrum_to_json(*ext);
    add_rows(*ext);
  }
  if (method == "top") {
    const TopExponentEstimate top = top_exponent(nu, n_steps, n_trials, seed, workers);
    out.report["top"] = top_to_json(top);
    table.rows.push_back(
        {"top", "1", cell(top.estimate), cell(top.half_width), cell(top.estimate)});
  }
  if (method != "qr" && method != "exterior" && method != "both" && method != "top")
    throw std::invalid_argument("spectrum: method must be qr | exterior | both | top");

  if (qr && ext) {
    json agreement = json::array();
    for (std::size_t l = 0; l < qr->values.size(); ++l) {
      const double gap = std::abs(qr->values[l] - ext->values[l]);
      const double budget = qr->half_widths[l] + ext->half_widths[l];
      agreement.push_back(
          {{"l", l + 1}, {"gap", gap}, {"budget", budget}, {"within", gap <= budget}});
    }
    out.report["exterior_agreement"] = agreement;
  }

  if (want_filtration) {
    try {
      const FiltrationEstimate f = filtration_estimate(nu, seed, filtration_steps);
      json spaces = json::array();
      for (const auto& s : f.spaces) spaces.push_back(s.dim_sub());
      out.report["filtration"] = json{{"space_dims", spaces},
                                      {"exponents", f.exponents},
                                      {"verified_rates", f.verified_rates},
                                      {"word_seed", f.word_seed},
                                      {"n_steps", f.n_steps}};
      bool decreasing = true;
      for (std::size_t i = 1; i < f.exponents.size(); ++i)
        decreasing = decreasing && f.exponents[i] < f.exponents[i - 1];
      checks.add("filtration_exponents_decreasing", decreasing, "strict order of chi_i");
    } catch (const std::runtime_error& e) {
      checks.add("filtration_simple_spectrum", false, e.what());
    }
  }

  out.tables.emplace_back("spectrum", std::move(table));
  out.report["checks"] = checks.list;
  out.failures = checks.failures;
  return out;
}

// ---------------------------------------------------------------------------
// stationary
// ---------------------------------------------------------------------------

ExperimentResult run_stationary(ConfigReader& cfg, std::uint64_t seed, int workers) {
  const AtomicMatrixMeasure nu = measure_from_config(cfg);
  StationaryOptions opt;
  opt.seed = seed;
  opt.n_iters = cfg.integer("n_iters", int(opt.n_iters));
  opt.window = cfg.integer("window", opt.window);
  opt.start_atoms = cfg.integer("start_atoms", opt.start_atoms);
  opt.merge_radius = cfg.number("merge_radius", opt.merge_radius);
  opt.prune_floor = cfg.number("prune_floor", opt.prune_floor);
  opt.per_iter_max_atoms = cfg.integer("per_iter_max_atoms", opt.per_iter_max_atoms);
  opt.result_max_atoms = cfg.integer("result_max_atoms", opt.result_max_atoms);
  opt.diag_atoms = cfg.integer("diag_atoms", opt.diag_atoms);
  opt.converge_threshold = cfg.number("converge_threshold", opt.converge_threshold);
  const long long top_steps = cfg.integer("top_steps", 20000);
  const int top_trials = cfg.integer("top_trials", 16);
  const double integral_tol = cfg.number("integral_tol", 0.05);
  cfg.done();

  Checks checks;
  const StationaryResult res = stationary_estimate(nu, opt);

  // One extra exact pushforward measures how far the result is from fixed.
  const EmpiricalMeasure pushed = push_measure(nu, res.measure);
  const double residual =
      measure_w1_coarse(res.measure, pushed, opt.diag_atoms, opt.merge_radius);
  checks.add("residual_bounded_by_diagnostic", residual <= 2.0 * res.diagnostic + 1e-9,
             "W1(eta, push eta) = " + num_str(residual) + ", diagnostic = " +
                 num_str(res.diagnostic));
  checks.add("converged", res.converged,
             "diagnostic " + num_str(res.diagnostic) + " vs threshold " +
                 num_str(opt.converge_threshold));

  const double integral = furstenberg_integral(nu, res.measure);
  const TopExponentEstimate top = top_exponent(nu, top_steps, top_trials, seed, workers);
  checks.add("integral_matches_top_exponent",
             std::abs(integral - top.estimate) <= integral_tol,
             "integral = " + num_str(integral) + ", top = " + num_str(top.estimate));

  ExperimentResult out;
  out.report = json{{"experiment", "stationary"},
                    {"seed", seed},
                    {"dim", nu.dim()},
                    {"diagnostic", res.diagnostic},
                    {"prune_cost", res.prune_cost},
                    {"converged", res.converged},
                    {"n_iters", res.n_iters},
                    {"window", res.window},
                    {"n_atoms", res.measure.size()},
                    {"residual_w1", residual},
                    {"furstenberg_integral", integral},
                    {"top_exponent", top_to_json(top)}};

  CsvTable atoms;
  atoms.header = {"index", "w"};
  for (int i = 0; i < nu.dim(); ++i) atoms.header.push_back("x" + std::to_string(i));
  for (int i = 0; i < res.measure.size(); ++i) {
    const MeasureAtom& a = res.measure.atoms()[std::size_t(i)];
    std::vector<std::string> row = {cell(i), cell(a.w)};
    for (int r = 0; r < nu.dim(); ++r) row.push_back(cell(a.point(r, 0)));
    atoms.rows.push_back(std::move(row));
  }
  out.tables.emplace_back("stationary_atoms", std::move(atoms));
  out.extra_json.emplace_back("stationary_measure", empirical_measure_to_json(res.measure));
  out.report["checks"] = checks.list;
  out.failures = checks.failures;
  return out;
}

// ---------------------------------------------------------------------------
// kifer
// ---------------------------------------------------------------------------

ExperimentResult run_kifer(ConfigReader& cfg, std::uint64_t seed, int workers) {
  const std::vector<double> t_grid = cfg.number_list("t_grid", {0.0, 0.05});
  const long long n_steps = cfg.integer("n_steps", 1000000);
  const int n_trials = cfg.integer("n_trials", 8);
  const bool has_band = cfg.has("zero_band");
  const double zero_band = cfg.number("zero_band", 0.02);
  cfg.done();

  Checks checks;
  CsvTable table;
  table.header = {"t", "lambda_hat", "half_width", "closed_form"};
  json entries = json::array();

  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid[i];
    const AtomicMatrixMeasure nu = kifer_measure(t);
    const TopExponentEstimate est =
        top_exponent(nu, n_steps, n_trials, seed + i, workers);
    entries.push_back({{"t", t},
                       {"lambda_hat", est.estimate},
                       {"half_width", est.half_width},
                       {"closed_form", est.closed_form}});
    table.rows.push_back({cell(t), cell(est.estimate), cell(est.half_width),
                          est.closed_form ? "1" : "0"});
    if (t == 0.0)
      checks.add("t0_exact_log2", est.estimate == std::log(2.0) && est.closed_form,
                 "lambda_hat(0) = " + num_str(est.estimate));
    else if (has_band)
      checks.add("zero_band_t_" + num_str(t), std::abs(est.estimate) <= zero_band,
                 "lambda_hat = " + num_str(est.estimate) + ", band = " + num_str(zero_band));
  }

  ExperimentResult out;
  out.report = json{{"experiment", "kifer"},
                    {"seed", seed},
                    {"n_steps", n_steps},
                    {"n_trials", n_trials},
                    {"points", entries}};
  out.tables.emplace_back("kifer", std::move(table));
  out.report["checks"] = checks.list;
  out.failures = checks.failures;
  return out;
}

// ---------------------------------------------------------------------------
// ltheta
// ---------------------------------------------------------------------------

ExperimentResult run_ltheta(ConfigReader& cfg, std::uint64_t seed, int workers) {
  (void)workers;
  const double theta = cfg.require_number("theta");
  const int K = cfg.integer("K", 40);
  const long long n_steps = cfg.integer("n_steps", 1000000);
  const double match_tol = cfg.number("match_tol", 0.01);
  cfg.done();

  Checks checks;
  const LThetaSeries series = ltheta_series(theta, K);

  Rng rng(seed, 0);
  bool hit_zero = false;
  const double rate = ltheta_chain_rate(theta, n_steps, rng, &hit_zero);

  ExperimentResult out;
  out.report = json{{"experiment", "ltheta"},
                    {"seed", seed},
                    {"theta", theta},
                    {"K", K},
                    {"n_steps", n_steps},
                    {"series_minus_infinity", series.minus_infinity},
                    {"series_zero_k", series.zero_k},
                    {"series_tail_estimate", series.tail_estimate},
                    {"simulation_rate", rate},
                    {"simulation_hit_zero", hit_zero}};
  if (!series.minus_infinity) out.report["series_value"] = series.value;

  if (series.minus_infinity) {
    // The degenerate product projection * rotation^zero_k * projection must
    // vanish entrywise exactly when the rotation entries are snapped.
    Matrix proj = Matrix::Zero(2, 2);
    proj(0, 0) = 1.0;
    const Matrix rot = snapped_rotation(theta);
    Matrix power = Matrix::Identity(2, 2);
    for (int k = 0; k < series.zero_k; ++k) power = rot * power;
    const Matrix prod = proj * power * proj;
    const bool exact_zero = prod(0, 0) == 0.0 && prod(0, 1) == 0.0 &&
                            prod(1, 0) == 0.0 && prod(1, 1) == 0.0;
    checks.add("degenerate_product_exactly_zero", exact_zero,
               "zero_k = " + std::to_string(series.zero_k) +
                   ", |prod|_max = " + num_str(prod.cwiseAbs().maxCoeff()));
    checks.add("simulation_hit_zero", hit_zero, "simulation found the vanishing cosine");
  } else if (theta == 0.0) {
    checks.add("theta_zero_exact", series.value == 0.0 && rate == 0.0,
               "series = " + num_str(series.value) + ", rate = " + num_str(rate));
  } else {
    checks.add("series_matches_simulation", std::abs(series.value - rate) <= match_tol,
               "series = " + num_str(series.value) + ", simulation = " + num_str(rate) +
                   ", tol = " + num_str(match_tol));
  }

  CsvTable table;
  table.header = {"k", "weight", "log_abs_cos", "partial_sum"};
  double partial = 0.0;
  const int k_max = series.minus_infinity ? series.zero_k : K;
  for (int k = 0; k <= k_max; ++k) {
    const double w = std::ldexp(1.0, -(k + 2));
    double term;
    if (series.minus_infinity && k == series.zero_k) {
      term = -std::numeric_limits<double>::infinity();
      partial = term;
    } else {
      term = std::log(std::abs(std::cos(2.0 * M_PI * double(k) * theta)));
      partial += w * term;
    }
    table.rows.push_back({cell(k), cell(w), cell(term), cell(partial)});
  }
  ExperimentResult res = std::move(out);
  res.tables.emplace_back("ltheta_series", std::move(table));
  res.report["checks"] = checks.list;
  res.failures = checks.failures;
  return res;
}

// ---------------------------------------------------------------------------
// example32
// ---------------------------------------------------------------------------

ExperimentResult run_example32(ConfigReader& cfg, std::uint64_t seed, int workers) {
  const double sigma = cfg.number("sigma", 2.0);
  const double theta = cfg.number("theta", 0.1);
  const long long n_steps = cfg.integer("n_steps", 100000);
  const int n_trials = cfg.integer("n_trials", 64);
  const double tol_outer = cfg.number("tol_outer", 0.05);
  const double tol_middle = cfg.number("tol_middle", 0.02);
  const long long eq_steps = cfg.integer("eq_steps", 20000);
  const int eq_trials = cfg.integer("eq_trials", 16);
  cfg.done();

  const AtomicMatrixMeasure nu = example32_measure(sigma, theta);
  Checks checks;

  const SpectrumEstimate spec = full_spectrum_qr(nu, n_steps, n_trials, seed, workers);
  checks.add("spectrum_sum_pinned",
             std::abs(spec.sum_estimate - spec.sum_exact) <= 1e-9,
             "|sum - exact| = " + num_str(std::abs(spec.sum_estimate - spec.sum_exact)));
  const double ls = std::log(sigma);
  checks.add("lambda1_near_log_sigma", std::abs(spec.values[0] - ls) <= tol_outer,
             "lambda1 = " + num_str(spec.values[0]) + " vs " + num_str(ls));
  checks.add("lambda2_near_zero", std::abs(spec.values[1]) <= tol_middle,
             "lambda2 = " + num_str(spec.values[1]));
  checks.add("lambda3_near_minus_log_sigma", std::abs(spec.values[2] + ls) <= tol_outer,
             "lambda3 = " + num_str(spec.values[2]) + " vs " + num_str(-ls));

  const SubspacePoint e3 = SubspacePoint::standard(3, {2});
  const SubspacePoint e12 = SubspacePoint::standard(3, {0, 1});
  const auto lines = invariant_subspace_search(nu, 1);
  const auto planes = invariant_subspace_search(nu, 2);
  checks.add("one_invariant_line", lines.size() == 1,
             std::to_string(lines.size()) + " line(s) found");
  checks.add("one_invariant_plane", planes.size() == 1,
             std::to_string(planes.size()) + " plane(s) found");
  if (lines.size() == 1)
    checks.add("invariant_line_is_e3", subspace_distance(lines[0], e3) < 1e-6,
               "distance = " + num_str(subspace_distance(lines[0], e3)));
  if (planes.size() == 1)
    checks.add("invariant_plane_is_e1_e2", subspace_distance(planes[0], e12) < 1e-6,
               "distance = " + num_str(subspace_distance(planes[0], e12)));

  SpectrumBudget budget;
  budget.n_steps = eq_steps;
  budget.n_trials = eq_trials;
  budget.seed = seed;
  budget.workers = workers;
  const auto equator = equator_detect(nu, budget);
  checks.add("equator_found", equator.has_value(),
             equator ? "subspace of dimension " + std::to_string(equator->subspace.dim_sub())
                     : "no invariant subspace with smaller restricted exponent");

  ExperimentResult out;
  out.report = json{{"experiment", "example32"},
                    {"seed", seed},
                    {"sigma", sigma},
                    {"theta", theta},
                    {"spectrum", spectrum_to_json(spec)},
                    {"n_invariant_lines", lines.size()},
                    {"n_invariant_planes", planes.size()}};
  if (equator) {
    checks.add("equator_is_e3", subspace_distance(equator->subspace, e3) < 1e-6,
               "distance = " + num_str(subspace_distance(equator->subspace, e3)));
    checks.add("equator_restricted_rate_zero",
               std::abs(equator->lambda_restricted) <= 1e-9,
               "restricted rate = " + num_str(equator->lambda_restricted));
    out.report["equator"] =
        json{{"dim", equator->subspace.dim_sub()},
             {"lambda_restricted", equator->lambda_restricted},
             {"lambda_restricted_half_width", equator->lambda_restricted_half_width},
             {"lambda_full", equator->lambda_full},
             {"lambda_full_half_width", equator->lambda_full_half_width},
             {"distance_to_e3", subspace_distance(equator->subspace, e3)},
             {"n_ambiguous", equator->ambiguous_candidates.size()}};
  }

  CsvTable table;
  table.header = {"l", "lambda", "half_width", "partial_sum"};
  for (std::size_t l = 0; l < spec.values.size(); ++l)
    table.rows.push_back({cell(int(l + 1)), cell(spec.values[l]), cell(spec.half_widths[l]),
                          cell(spec.partial_sums[l])});
  out.tables.emplace_back("example32_spectrum", std::move(table));
  out.report["checks"] = checks.list;
  out.failures = checks.failures;
  return out;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

ExperimentResult run_sweep(ConfigReader& cfg, std::uint64_t seed, int workers) {
  const AtomicMatrixMeasure nu = measure_from_config(cfg);
  const std::vector<double> scales =
      cfg.number_list("conjugation_scales", {0.0, 0.25, 0.5, 0.75, 1.0});
  std::vector<double> h_list = cfg.number_list("perturbation_sizes", {0.1, 0.05, 0.025});
  const long long n_steps = cfg.integer("n_steps", 20000);
  const int n_trials = cfg.integer("n_trials", 16);
  const double monotone_slack = cfg.number("monotone_slack", 0.0);
  cfg.done();

  const int d = nu.dim();
  Checks checks;
  ExperimentResult out;
  out.report = json{{"experiment", "sweep"}, {"seed", seed}, {"dim", d}};

  const TopExponentEstimate base = top_exponent(nu, n_steps, n_trials, seed, workers);
  out.report["base"] = top_to_json(base);

  // Conjugation direction and entry perturbation are fixed across the grid,
  // and every grid point reuses the base word stream, so differences are due
  // to the transformation alone.
  Rng dir_rng(seed, 1000);
  Matrix M(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) M(i, j) = dir_rng.next_gaussian();
  M /= operator_norm(M);

  CsvTable conj;
  conj.header = {"scale", "lambda_hat", "half_width", "delta_vs_base"};
  json conj_entries = json::array();
  bool flat = true;
  for (const double c : scales) {
    const Matrix G = (c * M).exp();
    const Matrix Ginv = G.inverse();
    std::vector<Atom> atoms;
    for (const auto& a : nu.atoms()) atoms.push_back({a.p, G * a.A * Ginv});
    const AtomicMatrixMeasure conj_nu(atoms);
    const TopExponentEstimate est = top_exponent(conj_nu, n_steps, n_trials, seed, workers);
    const double delta = std::abs(est.estimate - base.estimate);
    const bool within = delta <= est.half_width + base.half_width + 1e-9;
    flat = flat && within;
    conj.rows.push_back({cell(c), cell(est.estimate), cell(est.half_width), cell(delta)});
    conj_entries.push_back({{"scale", c},
                            {"lambda_hat", est.estimate},
                            {"half_width", est.half_width},
                            {"delta_vs_base", delta},
                            {"within_half_widths", within}});
  }
  checks.add("conjugation_flat", flat,
             "every conjugated estimate within combined half-widths of the base");
  out.report["conjugation"] = conj_entries;
  out.tables.emplace_back("conjugation", std::move(conj));

  Rng pert_rng(seed, 2000);
  std::vector<Matrix> deltas;
  for (int a = 0; a < nu.size(); ++a) {
    Matrix D(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) D(i, j) = pert_rng.next_gaussian();
    deltas.push_back(D / operator_norm(D));
  }

  std::sort(h_list.begin(), h_list.end(), std::greater<double>());
  CsvTable pert;
  pert.header = {"h", "lambda_hat", "half_width", "modulus", "skipped"};
  json pert_entries = json::array();
  std::vector<double> moduli;
  for (const double h : h_list) {
    std::vector<Atom> atoms;
    for (int a = 0; a < nu.size(); ++a)
      atoms.push_back({nu.atom(a).p, nu.atom(a).A + h * deltas[std::size_t(a)]});
    std::optional<AtomicMatrixMeasure> pert_nu;
    try {
      pert_nu.emplace(std::move(atoms));
    } catch (const std::invalid_argument& e) {
      pert.rows.push_back({cell(h), "", "", "", "1"});
      pert_entries.push_back({{"h", h}, {"skipped", true}, {"reason", e.what()}});
      continue;
    }
    const TopExponentEstimate est = top_exponent(*pert_nu, n_steps, n_trials, seed, workers);
    const double modulus = std::abs(est.estimate - base.estimate);
    moduli.push_back(modulus);
    pert.rows.push_back(
        {cell(h), cell(est.estimate), cell(est.half_width), cell(modulus), "0"});
    pert_entries.push_back({{"h", h},
                            {"skipped", false},
                            {"lambda_hat", est.estimate},
                            {"half_width", est.half_width},
                            {"modulus", modulus}});
  }
  if (moduli.size() >= 2) {
    bool monotone = true;
    for (std::size_t i = 1; i < moduli.size(); ++i)
      monotone = monotone && moduli[i] <= moduli[i - 1] + monotone_slack;
    checks.add("perturbation_modulus_monotone", monotone,
               "modulus nonincreasing as h shrinks");
  } else {
    checks.add("perturbation_grid_usable", false,
               "fewer than two perturbation sizes kept the atoms invertible");
  }
  out.report["entry_perturbation"] = pert_entries;
  out.tables.emplace_back("entry_perturbation", std::move(pert));

  out.report["checks"] = checks.list;
  out.failures = checks.failures;
  return out;
}

// ---------------------------------------------------------------------------
// drift / repeller
// ---------------------------------------------------------------------------

ExperimentResult run_drift_like(ConfigReader& cfg, std::uint64_t seed, int workers,
                                bool repeller) {
  const AtomicMatrixMeasure nu = measure_from_config(cfg);
  json e_json = cfg.raw("subspace");
  if (e_json.is_null())
    throw std::invalid_argument("drift: config needs a \"subspace\" object");
  const SubspacePoint E = subspace_from_json(e_json, nu.dim(), "subspace");
  const int rank = repeller ? 1 : cfg.integer("rank", 1);
  const std::vector<double> band = cfg.number_list("band", {0.001, 0.01});
  if (band.size() != 2)
    throw std::invalid_argument("drift: band must be [lo, hi]");
  std::vector<int> n_list = cfg.integer_list("n_list", {10, 20, 40});
  const int n_samples = cfg.integer("n_samples", 200);
  const double r2_min = cfg.number("r2_min", 0.8);
  const MargulisParams params =
      margulis_params_from_config(cfg.raw("params"), rank, "params");
  cfg.done();

  std::sort(n_list.begin(), n_list.end());
  Checks checks;
  const std::string label = repeller ? "repeller" : "drift";

  CsvTable table;
  table.header = {"n", "samples", "mean_drift", "fraction_decreasing",
                  "min_inc", "max_inc", "C_bound", "seed"};
  json per_n = json::array();
  std::vector<double> xs, ys;
  for (const int n : n_list) {
    const DriftReport rep =
        repeller
            ? repeller_probe(nu, E, params, band[0], band[1], n, n_samples, seed, workers)
            : drift_probe(nu, E, params, rank, band[0], band[1], n, n_samples, seed,
                          workers);
    per_n.push_back(drift_report_to_json(rep));
    table.rows.push_back({cell(rep.n), cell(rep.samples), cell(rep.mean_drift),
                          cell(rep.fraction_decreasing), cell(rep.min_increment),
                          cell(rep.max_increment), cell(rep.C_bound), cell(rep.seed)});
    xs.push_back(double(n));
    ys.push_back(rep.mean_drift);
    const std::string tag = "_n" + std::to_string(n);
    checks.add("mean_negative" + tag, rep.mean_drift < 0.0,
               "mean = " + num_str(rep.mean_drift));
    checks.add("median_negative" + tag, rep.median_drift < 0.0,
               "median = " + num_str(rep.median_drift));
    checks.add("increments_within_ceiling" + tag,
               rep.max_increment <= rep.C_bound + 1e-12,
               "max = " + num_str(rep.max_increment) + ", ceiling = " + num_str(rep.C_bound));
  }

  const LinearFit fit = linear_fit(xs, ys);
  checks.add("mean_drift_slope_negative", fit.slope < 0.0, "slope = " + num_str(fit.slope));
  checks.add("mean_drift_linear_fit", fit.r_squared >= r2_min,
             "R^2 = " + num_str(fit.r_squared) + " vs " + num_str(r2_min));

  ExperimentResult out;
  out.report = json{{"experiment", label},
                    {"seed", seed},
                    {"dim", nu.dim()},
                    {"rank", rank},
                    {"band", band},
                    {"points", per_n},
                    {"fit", json{{"slope", fit.slope},
                                 {"intercept", fit.intercept},
                                 {"r_squared", fit.r_squared}}}};
  out.tables.emplace_back(label, std::move(table));
  out.report["checks"] = checks.list;
  out.failures = checks.failures;
  return out;
}

// ---------------------------------------------------------------------------
// margulis-check
// ---------------------------------------------------------------------------

json bound_report_to_json(const MargulisBoundReport& r) {
  return json{{"kappa_A", r.kappa_A},
              {"kappa_B", r.kappa_B},
              {"hypotheses_hold", r.hypotheses_hold},
              {"stationarity_residual", r.stationarity_residual},
              {"zeta_B", r.zeta_B},
              {"zeta_X", r.zeta_X},
              {"bound", r.bound},
              {"asserted", r.asserted},
              {"holds", r.holds}};
}

// Random chain with guaranteed downward drift on A: observable 5..6 on A and
// 0..1 elsewhere, while A-rows put at least 0.9 of their mass on the low set.
struct RandomDriftInstance {
  FiniteMarkovKernel kernel;
  Vector Psi;
  std::vector<int> A, B;
};

RandomDriftInstance random_drift_instance(int n_states, Rng& rng) {
  const int a_count = 1 + int(rng.next_u64() % std::uint64_t(std::max(1, n_states / 3)));
  std::vector<int> A, B;
  for (int i = 0; i < n_states; ++i) (i < a_count ? A : B).push_back(i);

  Matrix rows = Matrix::Zero(n_states, n_states);
  for (int i = 0; i < n_states; ++i) {
    Vector raw = Vector::Zero(n_states);
    if (i < a_count) {
      for (const int j : B) raw[j] = rng.next_uniform(0.1, 1.0);
    } else {
      for (int j = 0; j < n_states; ++j) raw[j] = rng.next_uniform(0.1, 1.0);
    }
    raw /= raw.sum();
    for (int j = 0; j < n_states; ++j)
      rows(i, j) = 0.9 * raw[j] + 0.1 / double(n_states);
  }

  Vector Psi(n_states);
  for (int i = 0; i < n_states; ++i)
    Psi[i] = i < a_count ? rng.next_uniform(5.0, 6.0) : rng.next_uniform(0.0, 1.0);
  return {FiniteMarkovKernel(rows), Psi, A, B};
}

ExperimentResult run_margulis_check(ConfigReader& cfg, std::uint64_t seed, int workers) {
  (void)workers;
  Checks checks;
  ExperimentResult out;
  out.report = json{{"experiment", "margulis-check"}, {"seed", seed}};

  CsvTable table;
  table.header = {"instance", "n_states", "kappa_A", "kappa_B", "bound", "zeta_B", "holds"};

  bool any_mode = false;
  if (cfg.has("kernel")) {
    any_mode = true;
    const FiniteMarkovKernel T = kernel_from_json(cfg.raw("kernel"));
    if (!cfg.has("Psi"))
      throw std::invalid_argument("margulis-check: explicit instance needs \"Psi\"");
    const Vector Psi = vector_from_list(cfg.number_list("Psi", {}));
    const std::vector<int> A = int_list_from_json(cfg.raw("A"), "A");
    const std::vector<int> B = int_list_from_json(cfg.raw("B"), "B");
    const Vector zeta = cfg.has("zeta")
                            ? vector_from_list(cfg.number_list("zeta", {}))
                            : T.stationary();
    const MargulisBoundReport rep = margulis_mass_bound_check(T, Psi, A, B, zeta);
    out.report["instance"] = bound_report_to_json(rep);
    checks.add("instance_asserted", rep.asserted,
               "kappa_A = " + num_str(rep.kappa_A) +
                   ", stationarity residual = " + num_str(rep.stationarity_residual));
    checks.add("instance_bound_holds", rep.holds,
               "zeta(B) = " + num_str(rep.zeta_B) + " vs bound " + num_str(rep.bound));
    table.rows.push_back({"explicit", cell(T.n_states()), cell(rep.kappa_A),
                          cell(rep.kappa_B), cell(rep.bound), cell(rep.zeta_B),
                          rep.holds ? "1" : "0"});

    if (cfg.has("localize_U")) {
      const std::vector<int> U = int_list_from_json(cfg.raw("localize_U"), "localize_U");
      const LocalizedKernel loc = localize_kernel(T, zeta / zeta.sum(), U);
      const Vector resid =
          loc.kernel.rows().transpose() * loc.eta_U - loc.eta_U;
      const double l1 = resid.cwiseAbs().sum();
      checks.add("localized_restriction_stationary", l1 <= 1e-10,
                 "|eta_U T_U - eta_U|_1 = " + num_str(l1));
      out.report["localized"] = json{{"states", loc.states},
                                     {"J_outflow", loc.J_outflow},
                                     {"J_inflow", loc.J_inflow},
                                     {"eta_U_residual_l1", l1}};
    }
  }

  if (cfg.has("random_batch")) {
    any_mode = true;
    ConfigReader batch(cfg.raw("random_batch"), "random_batch");
    const int count = batch.integer("count", 20);
    const int n_states = batch.integer("n_states", 8);
    batch.done();
    Rng rng(seed, 3000);
    int held = 0;
    json batch_entries = json::array();
    for (int i = 0; i < count; ++i) {
      const RandomDriftInstance inst = random_drift_instance(n_states, rng);
      const Vector zeta = inst.kernel.stationary();
      const MargulisBoundReport rep =
          margulis_mass_bound_check(inst.kernel, inst.Psi, inst.A, inst.B, zeta);
      if (rep.asserted && rep.holds) ++held;
      batch_entries.push_back(bound_report_to_json(rep));
      table.rows.push_back({cell(i), cell(n_states), cell(rep.kappa_A), cell(rep.kappa_B),
                            cell(rep.bound), cell(rep.zeta_B), rep.holds ? "1" : "0"});
    }
    checks.add("random_batch_all_hold", held == count,
               std::to_string(held) + "/" + std::to_string(count) + " instances held");
    out.report["random_batch"] = batch_entries;
  }

  cfg.done();
  if (!any_mode)
    throw std::invalid_argument(
        "margulis-check: config needs \"kernel\" and/or \"random_batch\"");

  out.tables.emplace_back("margulis_check", std::move(table));
  out.report["checks"] = checks.list;
  out.failures = checks.failures;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "spectrum", "stationary", "kifer",    "ltheta",        "example32",
      "sweep",    "drift",      "repeller", "margulis-check"};
  return names;
}

ExperimentResult run_experiment(const std::string& name, const nlohmann::json& config,
                                std::optional<std::uint64_t> seed_override, int workers) {
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  ConfigReader cfg(config, "config");
  const std::uint64_t seed = resolve_seed(cfg, seed_override);
  if (name == "spectrum") return run_spectrum(cfg, seed, workers);
  if (name == "stationary") return run_stationary(cfg, seed, workers);
  if (name == "kifer") return run_kifer(cfg, seed, workers);
  if (name == "ltheta") return run_ltheta(cfg, seed, workers);
  if (name == "example32") return run_example32(cfg, seed, workers);
  if (name == "sweep") return run_sweep(cfg, seed, workers);
  if (name == "drift") return run_drift_like(cfg, seed, workers, false);
  if (name == "repeller") return run_drift_like(cfg, seed, workers, true);
  if (name == "margulis-check") return run_margulis_check(cfg, seed, workers);
  throw std::invalid_argument("unknown experiment: " + name);
}

// ---------------------------------------------------------------------------
// Named measure families and small numerics
// ---------------------------------------------------------------------------

AtomicMatrixMeasure example32_measure(double sigma, double theta) {
  if (!(sigma > 1.0))
    throw std::invalid_argument("example32_measure: sigma must exceed 1");
  Matrix D = Matrix::Identity(3, 3);
  D(0, 0) = sigma;
  D(1, 1) = 1.0 / sigma;
  Matrix R = Matrix::Identity(3, 3);
  const double c = std::cos(theta), s = std::sin(theta);
  R(0, 0) = c;
  R(0, 1) = -s;
  R(1, 0) = s;
  R(1, 1) = c;
  return AtomicMatrixMeasure({{0.5, D}, {0.5, R * D}});
}

AtomicMatrixMeasure kifer_measure(double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("kifer_measure: t must lie in [0, 1]");
  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = 2.0;
  D(1, 1) = 0.5;
  Matrix S = Matrix::Zero(2, 2);
  S(0, 1) = 1.0;
  S(1, 0) = 1.0;
  if (t == 0.0) return AtomicMatrixMeasure({{1.0, D}});
  if (t == 1.0) return AtomicMatrixMeasure({{1.0, S}});
  return AtomicMatrixMeasure({{1.0 - t, D}, {t, S}});
}

Matrix snapped_rotation(double theta) {
  auto snap = [](double v) {
    for (const double target : {-1.0, 0.0, 1.0})
      if (std::abs(v - target) <= 1e-15) return target;
    return v;
  };
  Matrix R(2, 2);
  const double c = std::cos(2.0 * M_PI * theta), s = std::sin(2.0 * M_PI * theta);
  R(0, 0) = snap(c);
  R(0, 1) = snap(-s);
  R(1, 0) = snap(s);
  R(1, 1) = snap(c);
  return R;
}

namespace {

// cos(2 pi k theta) vanishes exactly iff 4 k theta is an odd integer.
bool cosine_vanishes(long long k, double theta) {
  const double q = 4.0 * double(k) * theta;
  const double rounded = std::round(q);
  return std::abs(q - rounded) <= 1e-9 && (std::llround(rounded) % 2 != 0);
}

}  // namespace

LThetaSeries ltheta_series(double theta, int K) {
  if (K < 0) throw std::invalid_argument("ltheta_series: K must be nonnegative");
  LThetaSeries out;
  for (int k = 0; k <= K; ++k) {
    if (cosine_vanishes(k, theta)) {
      out.minus_infinity = true;
      out.zero_k = k;
      out.value = -std::numeric_limits<double>::infinity();
      return out;
    }
    out.value +=
        std::ldexp(1.0, -(k + 2)) * std::log(std::abs(std::cos(2.0 * M_PI * double(k) * theta)));
  }
  for (int k = K + 1; k <= K + 60; ++k) {
    if (cosine_vanishes(k, theta)) {
      out.tail_estimate = std::numeric_limits<double>::infinity();
      break;
    }
    out.tail_estimate += std::ldexp(1.0, -(k + 2)) *
                         std::abs(std::log(std::abs(std::cos(2.0 * M_PI * double(k) * theta))));
  }
  return out;
}

double ltheta_series_raw(double theta, int K) {
  double s = 0.0;
  for (int k = 0; k <= K; ++k)
    s += std::ldexp(1.0, -(k + 2)) * std::log(std::abs(std::cos(2.0 * M_PI * double(k) * theta)));
  return s;
}

double ltheta_chain_rate(double theta, long long n_steps, Rng& rng, bool* hit_zero) {
  if (n_steps < 1) throw std::invalid_argument("ltheta_chain_rate: need steps");
  double acc = 0.0;
  long long run = -1;  // rotations since the last projection; -1 before the first
  bool zero = false;
  for (long long i = 0; i < n_steps; ++i) {
    const bool projection = (rng.next_u64() & 1ull) != 0;
    if (projection) {
      if (run >= 0) {
        if (cosine_vanishes(run, theta))
          zero = true;
        else
          acc += std::log(std::abs(std::cos(2.0 * M_PI * double(run) * theta)));
      }
      run = 0;
    } else if (run >= 0) {
      ++run;
    }
  }
  if (hit_zero) *hit_zero = zero;
  return acc / double(n_steps);
}

AtomicMatrixMeasure random_invertible_measure(int d, int k_atoms, double spread, Rng& rng) {
  if (d < 1 || k_atoms < 1 || !(spread > 0.0))
    throw std::invalid_argument("random_invertible_measure: bad parameters");
  const double det_floor = std::pow(0.25 * spread, d);
  std::vector<Atom> atoms;
  double total = 0.0;
  for (int a = 0; a < k_atoms; ++a) {
    Matrix A(d, d);
    for (int tries = 0;; ++tries) {
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) A(i, j) = spread * rng.next_gaussian();
      if (std::abs(A.determinant()) >= det_floor) break;
      if (tries > 10000)
        throw std::runtime_error("random_invertible_measure: no solid determinant found");
    }
    const double w = rng.next_uniform(0.2, 1.0);
    atoms.push_back({w, A});
    total += w;
  }
  for (auto& a : atoms) a.p /= total;
  return AtomicMatrixMeasure(std::move(atoms));
}

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("linear_fit: need matching samples, at least two");
  const double n = double(xs.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("linear_fit: degenerate x grid");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double pred = fit.intercept + fit.slope * xs[i];
    ss_res += (ys[i] - pred) * (ys[i] - pred);
    ss_tot += (ys[i] - my) * (ys[i] - my);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
  return fit;
}

}  // namespace lyap
