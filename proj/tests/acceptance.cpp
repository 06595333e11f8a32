// Acceptance gate: one line per shipped guarantee, every tolerance stated
// inline. The binary exits nonzero when any line fails, so CI treats the
// whole suite as a single gate. Checks 1-12 exercise the library in-process;
// check 13 drives the installed CLI end to end.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lyap/experiments.hpp"
#include "lyap/invariant.hpp"
#include "lyap/io.hpp"
#include "lyap/linalg.hpp"
#include "lyap/margulis.hpp"
#include "lyap/markov.hpp"
#include "lyap/measure.hpp"
#include "lyap/rng.hpp"
#include "lyap/spectrum.hpp"
#include "lyap/stationary.hpp"
#include "oracle_data.hpp"

using namespace lyap;
using nlohmann::json;

namespace {

using Verdict = std::pair<bool, std::string>;

std::string fmt(double x, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << x;
  return os.str();
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

StationaryOptions bundled_stationary_options() {
  StationaryOptions opt;
  opt.n_iters = 160;
  opt.window = 40;
  opt.start_atoms = 64;
  opt.merge_radius = 1e-9;
  opt.per_iter_max_atoms = 1024;
  opt.result_max_atoms = 1024;
  opt.diag_atoms = 96;
  opt.converge_threshold = 0.006;
  opt.seed = 1;
  return opt;
}

// ---- check 1: pinch-and-turn full spectrum --------------------------------

Verdict check_full_spectrum() {
  const auto t0 = std::chrono::steady_clock::now();
  const AtomicMatrixMeasure nu = example32_measure(2.0, 0.1);
  const SpectrumEstimate est = full_spectrum_qr(nu, 100000, 64, 1);
  const double elapsed = seconds_since(t0);
  const double l2 = std::log(2.0);
  const bool ok = std::abs(est.values[0] - l2) <= 0.05 &&
                  std::abs(est.values[1]) <= 0.02 &&
                  std::abs(est.values[2] + l2) <= 0.05 &&
                  std::abs(est.sum_estimate) <= 1e-9 && elapsed < 30.0;
  std::ostringstream os;
  os << "lambda=(" << fmt(est.values[0]) << "," << fmt(est.values[1]) << ","
     << fmt(est.values[2]) << ") tol(0.05,0.02,0.05) around (log2,0,-log2), |sum|="
     << fmt(std::abs(est.sum_estimate), 2) << "<=1e-9, " << fmt(elapsed, 3)
     << "s<30s";
  return {ok, os.str()};
}

// ---- check 2: joint invariant subspaces and the slow one ------------------

Verdict check_invariant_subspaces() {
  const AtomicMatrixMeasure nu = example32_measure(2.0, 0.1);
  const SubspacePoint line = SubspacePoint::standard(3, {2});
  const SubspacePoint plane = SubspacePoint::standard(3, {0, 1});
  const auto lines = invariant_subspace_search(nu, 1);
  const auto planes = invariant_subspace_search(nu, 2);
  const bool list_ok =
      lines.size() == 1 && subspace_distance(lines[0], line) < 1e-6 &&
      planes.size() == 1 && subspace_distance(planes[0], plane) < 1e-6;
  SpectrumBudget budget;
  budget.n_steps = 20000;
  budget.n_trials = 16;
  budget.seed = 7;
  const auto eq = equator_detect(nu, budget);
  const double eq_dist =
      eq ? subspace_distance(eq->subspace, line) : std::nan("");
  const bool eq_ok = eq.has_value() && eq_dist < 1e-6;
  std::ostringstream os;
  os << "dim-1 list {e3} and dim-2 list {e1^e2} exact (dist<1e-6), slow subspace dist="
     << fmt(eq_dist, 2) << "<1e-6";
  return {list_ok && eq_ok, os.str()};
}

// ---- check 3: reflecting-walk top exponent --------------------------------

Verdict check_reflecting_walk() {
  const TopExponentEstimate pure = top_exponent(kifer_measure(0.0), 1000, 4, 1);
  const bool exact_ok = pure.closed_form && pure.estimate == std::log(2.0);
  const auto t0 = std::chrono::steady_clock::now();
  const TopExponentEstimate mixed =
      top_exponent(kifer_measure(0.05), 1000000, 8, 1);
  const double elapsed = seconds_since(t0);
  const bool mixed_ok = std::abs(mixed.estimate) <= 0.02 && elapsed < 60.0;
  std::ostringstream os;
  os << "t=0 exact log2 (closed form), t=0.05: |" << fmt(mixed.estimate, 3)
     << "|<=0.02 at n=1e6, " << fmt(elapsed, 3) << "s<60s";
  return {exact_ok && mixed_ok, os.str()};
}

// ---- check 4: projection-rotation exponent series -------------------------

Verdict check_projection_rotation() {
  const LThetaSeries quarter = ltheta_series(0.25, 40);
  Matrix proj = Matrix::Zero(2, 2);
  proj(0, 0) = 1.0;
  const Matrix degenerate = proj * snapped_rotation(0.25) * proj;
  const bool quarter_ok = quarter.minus_infinity && quarter.zero_k == 1 &&
                          degenerate.cwiseAbs().maxCoeff() == 0.0;

  const LThetaSeries at_zero = ltheta_series(0.0, 40);
  Rng zero_rng(1, 0);
  const bool zero_ok =
      at_zero.value == 0.0 && ltheta_chain_rate(0.0, 10000, zero_rng) == 0.0;

  const LThetaSeries golden = ltheta_series(oracle::golden_theta, 40);
  Rng chain_rng(1, 0);
  bool hit_zero = false;
  const double sim =
      ltheta_chain_rate(oracle::golden_theta, 1000000, chain_rng, &hit_zero);
  const double gap = std::abs(golden.value - sim);
  const bool golden_ok = !golden.minus_infinity && !hit_zero && gap <= 0.01;

  std::ostringstream os;
  os << "theta=1/4: -inf flag + exact zero product, theta=0: exact 0, golden: |series-sim|="
     << fmt(gap, 2) << "<=0.01 at n=1e6";
  return {quarter_ok && zero_ok && golden_ok, os.str()};
}

// ---- check 5: exterior-power cross-validation -----------------------------

Verdict check_exterior_cross() {
  int agree = 0;
  for (int i = 0; i < 20; ++i) {
    const int d = 2 + i % 3;
    Rng gen(100 + i, 0);
    const AtomicMatrixMeasure nu = random_invertible_measure(d, 3, 1.0, gen);
    const std::uint64_t seed = 1000 + std::uint64_t(i);
    const SpectrumEstimate qr = full_spectrum_qr(nu, 20000, 8, seed);
    const SpectrumEstimate ext = spectrum_via_exterior(nu, 20000, 8, seed);
    bool all_l = int(qr.values.size()) == d && int(ext.values.size()) == d;
    for (int l = 0; all_l && l < d; ++l) {
      const double hw = qr.half_widths[std::size_t(l)] +
                        ext.half_widths[std::size_t(l)] + 1e-12;
      all_l = std::abs(qr.values[std::size_t(l)] - ext.values[std::size_t(l)]) <= hw;
    }
    agree += all_l ? 1 : 0;
  }
  std::ostringstream os;
  os << agree
     << "/20 random measures (d in {2,3,4}) agree per exponent within combined "
        "half-widths, need >=18";
  return {agree >= 18, os.str()};
}

// ---- check 6: Furstenberg integral consistency ----------------------------

Verdict check_furstenberg() {
  const StationaryOptions opt = bundled_stationary_options();

  const AtomicMatrixMeasure nu = example32_measure(2.0, 0.1);
  const StationaryResult sr = stationary_estimate(nu, opt);
  const double integral = furstenberg_integral(nu, sr.measure);
  const TopExponentEstimate top = top_exponent(nu, 20000, 8, 2);
  const double gap1 = std::abs(integral - top.estimate);

  Rng gen(42, 0);
  const AtomicMatrixMeasure nu2 = random_invertible_measure(2, 3, 1.0, gen);
  const bool irreducible = invariant_subspace_search(nu2, 1).empty();
  const StationaryResult sr2 = stationary_estimate(nu2, opt);
  const double integral2 = furstenberg_integral(nu2, sr2.measure);
  const TopExponentEstimate top2 = top_exponent(nu2, 20000, 8, 2);
  const double gap2 = std::abs(integral2 - top2.estimate);

  std::ostringstream os;
  os << "pinch-and-turn gap=" << fmt(gap1, 2) << "<=0.05, random irreducible 2x2 gap="
     << fmt(gap2, 2) << "<=0.05";
  return {gap1 <= 0.05 && irreducible && gap2 <= 0.05, os.str()};
}

// ---- check 7: localized kernels keep their stationary vectors -------------

Verdict check_localization() {
  int pass = 0;
  double worst_resid = 0.0, worst_j = 0.0;
  for (int i = 0; i < 100; ++i) {
    Rng rng(7, std::uint64_t(i));
    const int n = 2 + int(rng.next_u64() % 19);
    Matrix rows(n, n);
    for (int r = 0; r < n; ++r) {
      double sum = 0.0;
      for (int c = 0; c < n; ++c) {
        rows(r, c) = 0.02 + rng.next_double();
        sum += rows(r, c);
      }
      rows.row(r) /= sum;
    }
    const FiniteMarkovKernel T(rows);
    const Vector eta = T.stationary();
    std::vector<int> U;
    for (int s = 0; s < n; ++s)
      if (rng.next_u64() & 1ull) U.push_back(s);
    if (U.empty()) U.push_back(int(rng.next_u64() % std::uint64_t(n)));
    if (int(U.size()) == n) U.pop_back();
    const LocalizedKernel loc = localize_kernel(T, eta, U);
    const double resid =
        (loc.kernel.rows().transpose() * loc.eta_U - loc.eta_U)
            .lpNorm<1>();
    const double jgap = std::abs(loc.J_outflow - loc.J_inflow);
    worst_resid = std::max(worst_resid, resid);
    worst_j = std::max(worst_j, jgap);
    if (resid <= 1e-10 && jgap <= 1e-12) ++pass;
  }
  std::ostringstream os;
  os << pass << "/100 chains (n<=20): |eta_U T_U - eta_U|_1<=1e-10 (worst "
     << fmt(worst_resid, 2) << "), |J_out-J_in|<=1e-12 (worst " << fmt(worst_j, 2)
     << ")";
  return {pass == 100, os.str()};
}

// ---- check 8: couplings with a forbidden rectangle ------------------------

Verdict check_couplings() {
  int pass = 0;
  for (int i = 0; i < 100; ++i) {
    Rng rng(8, std::uint64_t(i));
    const auto random_dist = [&](int n) {
      Vector v(n);
      double sum = 0.0;
      for (int j = 0; j < n; ++j) {
        v[j] = 0.05 + rng.next_double();
        sum += v[j];
      }
      return Vector(v / sum);
    };
    const auto pick_light_subset = [&](const Vector& w) {
      for (int tries = 0; tries < 200; ++tries) {
        std::vector<int> s;
        for (int j = 0; j < w.size(); ++j)
          if (rng.next_u64() & 1ull) s.push_back(j);
        if (s.empty() || int(s.size()) == w.size()) continue;
        double mass = 0.0;
        for (int j : s) mass += w[j];
        if (mass < 0.5 - 1e-9) return s;
      }
      int lightest = 0;
      for (int j = 1; j < w.size(); ++j)
        if (w[j] < w[lightest]) lightest = j;
      return std::vector<int>{lightest};
    };
    const int n = 2 + int(rng.next_u64() % 7);
    const int m = 2 + int(rng.next_u64() % 7);
    const Vector eta = random_dist(n);
    const Vector eta2 = random_dist(m);
    const std::vector<int> A = pick_light_subset(eta);
    const std::vector<int> A2 = pick_light_subset(eta2);

    const Matrix plan = coupling_avoiding(eta, eta2, A, A2);
    bool ok = plan.minCoeff() >= 0.0;
    for (int a : A)
      for (int b : A2) ok = ok && plan(a, b) == 0.0;
    ok = ok && (plan.rowwise().sum() - eta).cwiseAbs().maxCoeff() <= 1e-12;
    ok = ok && (plan.colwise().sum().transpose() - eta2).cwiseAbs().maxCoeff() <=
                   1e-12;
    const Matrix swapped = coupling_avoiding(eta2, eta, A2, A);
    ok = ok && (plan - swapped.transpose()).cwiseAbs().maxCoeff() == 0.0;
    if (ok) ++pass;
  }
  std::ostringstream os;
  os << pass
     << "/100 instances: marginals within 1e-12, forbidden rectangle exactly "
        "zero, nonnegative, swap-symmetric bit for bit";
  return {pass == 100, os.str()};
}

// ---- check 9: additive-drift mass bound ------------------------------------

Verdict check_mass_bound() {
  int pass = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100; ++i) {
    Rng rng(9, std::uint64_t(i));
    const int n = 3 + int(rng.next_u64() % 18);
    const int asz = 1 + int(rng.next_u64() % std::uint64_t(std::max(1, n / 3)));
    std::vector<int> A, B;
    for (int s = 0; s < asz; ++s) A.push_back(s);
    for (int s = asz; s < n; ++s) B.push_back(s);

    Matrix rows = Matrix::Constant(n, n, 0.1 / double(n));
    for (int r = 0; r < n; ++r) {
      if (r < asz) {
        Vector w = Vector::Zero(n);
        double sum = 0.0;
        for (int b : B) {
          w[b] = 0.01 + rng.next_double();
          sum += w[b];
        }
        for (int b : B) rows(r, b) += 0.9 * w[b] / sum;
      } else {
        Vector w(n);
        double sum = 0.0;
        for (int c = 0; c < n; ++c) {
          w[c] = 0.01 + rng.next_double();
          sum += w[c];
        }
        for (int c = 0; c < n; ++c) rows(r, c) += 0.9 * w[c] / sum;
      }
      rows.row(r) /= rows.row(r).sum();
    }
    const FiniteMarkovKernel T(rows);
    Vector Psi(n);
    for (int s = 0; s < n; ++s)
      Psi[s] = s < asz ? 5.0 + rng.next_double() : rng.next_double();
    const Vector zeta = T.stationary();
    const MargulisBoundReport rep = margulis_mass_bound_check(T, Psi, A, B, zeta);
    worst_margin = std::min(worst_margin, rep.zeta_B - rep.bound);
    if (rep.asserted && rep.holds) ++pass;
  }
  std::ostringstream os;
  os << pass
     << "/100 chains with strict downward drift: zeta(B) >= kappa_A/(kappa_A+"
        "kappa_B) * zeta(X) - 1e-12 (worst margin "
     << fmt(worst_margin, 3) << ")";
  return {pass == 100, os.str()};
}

// ---- check 10: contraction drift near the repelling line -------------------

Verdict check_drift_probes() {
  const AtomicMatrixMeasure nu = example32_measure(2.0, 0.1);
  const SubspacePoint E = SubspacePoint::standard(3, {2});
  MargulisParams params = MargulisParams::defaults(1);
  params.omega = {1e-9};
  params.Omega = 10.0;
  const std::vector<double> ns = {10.0, 20.0, 40.0};

  bool ok = true;
  std::vector<double> pair_means, point_means;
  for (double nd : ns) {
    const int n = int(nd);
    const DriftReport rep =
        drift_probe(nu, E, params, 1, 1e-8, 1e-7, n, 200, 1);
    ok = ok && rep.mean_drift < 0.0 && rep.median_drift < 0.0 &&
         rep.max_increment <= rep.C_bound;
    pair_means.push_back(rep.mean_drift);
    const DriftReport rr =
        repeller_probe(nu, E, params, 1e-12, 1e-11, n, 200, 1);
    ok = ok && rr.mean_drift < 0.0 && rr.median_drift < 0.0 &&
         rr.max_increment <= rr.C_bound;
    point_means.push_back(rr.mean_drift);
  }
  const LinearFit pair_fit = linear_fit(ns, pair_means);
  const LinearFit point_fit = linear_fit(ns, point_means);
  ok = ok && pair_fit.slope < 0.0 && pair_fit.r_squared >= 0.8 &&
       point_fit.slope < 0.0 && point_fit.r_squared >= 0.8;
  std::ostringstream os;
  os << "pair means (" << fmt(pair_means[0], 3) << "," << fmt(pair_means[1], 3)
     << "," << fmt(pair_means[2], 3) << ") R2=" << fmt(pair_fit.r_squared, 3)
     << ", point means (" << fmt(point_means[0], 3) << "," << fmt(point_means[1], 3)
     << "," << fmt(point_means[2], 3) << ") R2=" << fmt(point_fit.r_squared, 3)
     << ", all<0, R2>=0.8, increments<=C*n";
  return {ok, os.str()};
}

// ---- check 11: martingale tails and large deviations ------------------------

Verdict check_concentration() {
  bool dominated = true;
  for (int k = 0; k < oracle::azuma_grid_size; ++k) {
    const double n = oracle::azuma_grid[k][0];
    const double s = oracle::azuma_grid[k][1];
    const double exact = oracle::azuma_grid[k][2];
    dominated = dominated && exact <= azuma_bound(1.0, (long long)(n), s);
  }
  const AtomicMatrixMeasure nu = example32_measure(2.0, 0.1);
  const LargeDeviationTable ld =
      large_deviation_probe(nu, 0.1, {25, 50, 100, 200}, 4000, 3);
  const bool ld_ok = ld.r_squared >= 0.9 && ld.c_hat > 0.0;
  std::ostringstream os;
  os << "exact +/-1 tails <= 2exp(-s^2/2n) on 20-point grid, escape fractions "
        "log-linear: c_hat="
     << fmt(ld.c_hat, 3) << ", R2=" << fmt(ld.r_squared, 3) << ">=0.9";
  return {dominated && ld_ok, os.str()};
}

// ---- check 12: conjugation / perturbation sweeps ----------------------------

Verdict check_sweeps() {
  const json cfg =
      load_json_file(std::string(LYAP_CONFIG_DIR) + "/sweep.json");
  const ExperimentResult res = run_experiment("sweep", cfg, std::nullopt, 1);
  std::ostringstream os;
  if (res.failures.empty()) {
    os << "conjugation invariance flat within half-widths, perturbation "
          "modulus monotone over h in {0.1,0.05,0.025}";
    return {true, os.str()};
  }
  os << res.failures.size() << " sweep checks failed:";
  for (const auto& f : res.failures) os << " " << f;
  return {false, os.str()};
}

// ---- check 13: bitwise reproducibility across worker counts -----------------

Verdict check_reproducibility() {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "lyap_acceptance";
  fs::remove_all(base);
  const std::vector<int> worker_counts = {1, 4, 8};
  int files_compared = 0;
  for (const std::string& name : experiment_names()) {
    for (int workers : worker_counts) {
      const fs::path out = base / name / ("w" + std::to_string(workers));
      fs::create_directories(out);
      const std::string cmd = std::string("\"") + LYAP_CLI_PATH + "\" " + name +
                              " --config \"" + LYAP_CONFIG_DIR + "/" + name +
                              ".json\" --out \"" + out.string() +
                              "\" --workers " + std::to_string(workers) +
                              " > /dev/null";
      const int rc = std::system(cmd.c_str());
      if (rc != 0) {
        return {false, name + " exited nonzero under --workers " +
                           std::to_string(workers)};
      }
    }
    const auto listing = [&](int workers) {
      std::vector<std::string> names;
      const fs::path dir = base / name / ("w" + std::to_string(workers));
      for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string fn = entry.path().filename().string();
        if (fn != "run_meta.json") names.push_back(fn);
      }
      std::sort(names.begin(), names.end());
      return names;
    };
    const auto l1 = listing(1);
    if (l1.empty() ||
        std::find(l1.begin(), l1.end(), "report.json") == l1.end()) {
      return {false, name + " produced no report.json"};
    }
    if (l1 != listing(4) || l1 != listing(8)) {
      return {false, name + " produced different file sets across workers"};
    }
    for (const std::string& fn : l1) {
      const std::string ref =
          read_text_file((base / name / "w1" / fn).string());
      for (int workers : {4, 8}) {
        const std::string other = read_text_file(
            (base / name / ("w" + std::to_string(workers)) / fn).string());
        if (other != ref) {
          return {false, name + "/" + fn + " differs between 1 and " +
                             std::to_string(workers) + " workers"};
        }
      }
      ++files_compared;
    }
  }
  std::ostringstream os;
  os << experiment_names().size() << " bundled experiments x workers {1,4,8}: "
     << files_compared << " output files bitwise identical";
  return {true, os.str()};
}

}  // namespace

int main() {
  // Keep the child CLI runs on the configs' own seeds.
  unsetenv("LYAP_SEED");

  int failed = 0;
  const auto line = [&](int idx, const char* label, const Verdict& v) {
    std::printf("[%s] %02d %s | %s\n", v.first ? "PASS" : "FAIL", idx, label,
                v.second.c_str());
    std::fflush(stdout);
    if (!v.first) ++failed;
  };
  const auto guarded = [&](int idx, const char* label, auto&& fn) {
    try {
      line(idx, label, fn());
    } catch (const std::exception& e) {
      line(idx, label, {false, std::string("exception: ") + e.what()});
    }
  };

  guarded(1, "pinch-and-turn full spectrum", check_full_spectrum);
  guarded(2, "joint invariant subspaces", check_invariant_subspaces);
  guarded(3, "reflecting-walk top exponent", check_reflecting_walk);
  guarded(4, "projection-rotation series", check_projection_rotation);
  guarded(5, "exterior vs QR cross-check", check_exterior_cross);
  guarded(6, "Furstenberg integral", check_furstenberg);
  guarded(7, "kernel localization", check_localization);
  guarded(8, "forbidden-rectangle couplings", check_couplings);
  guarded(9, "drift mass bound", check_mass_bound);
  guarded(10, "repelling-line drift probes", check_drift_probes);
  guarded(11, "tail bounds and large deviations", check_concentration);
  guarded(12, "invariance sweeps", check_sweeps);
  guarded(13, "worker-count reproducibility", check_reproducibility);

  if (failed == 0) {
    std::printf("acceptance: all 13 checks passed\n");
    return 0;
  }
  std::printf("acceptance: %d of 13 checks FAILED\n", failed);
  return 1;
}
