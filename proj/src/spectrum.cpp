#include "lyap/spectrum.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lyap/parallel.hpp"

namespace lyap {

namespace {

constexpr std::uint64_t kStartVectorSalt = 0xA5C1ED0DDE5EED01ull;
constexpr std::uint64_t kReferenceSalt = 0x5EEDBA5EBA5EBA5Eull;

struct MeanStderr {
  double mean = 0.0;
  double half_width = 0.0;
};

MeanStderr summarize(const std::vector<double>& xs) {
  MeanStderr out;
  const double n = double(xs.size());
  out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.half_width = 1.96 * std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

// In-place modified Gram-Schmidt; returns the diagonal of R (column norms
// after projection). Columns of q are replaced by the orthonormal factor.
void mgs_inplace(Matrix& q, Vector& rdiag) {
  const int d = int(q.cols());
  for (int j = 0; j < d; ++j) {
    auto col = q.col(j);
    for (int k = 0; k < j; ++k) col -= q.col(k).dot(col) * q.col(k);
    const double r = col.norm();
    if (!(r > 0.0)) throw std::runtime_error("qr step collapsed: singular product");
    rdiag(j) = r;
    col /= r;
  }
}

std::vector<double> sorted_log_abs_eigenvalues(const Matrix& A) {
  Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
  std::vector<double> out;
  out.reserve(std::size_t(A.rows()));
  for (int i = 0; i < A.rows(); ++i) out.push_back(std::log(std::abs(es.eigenvalues()(i))));
  std::sort(out.begin(), out.end(), std::greater<double>());
  return out;
}

struct TrialRates {
  std::vector<double> acc;      // accumulated log R_ii (or log norm), unsorted
  double log_det_word = 0.0;    // running sum of log|det A_{i_k}|
};

// One QR trajectory from the identity frame; rates in frame-column order.
TrialRates qr_trajectory(const AtomicMatrixMeasure& nu, long long n_steps,
                         std::uint64_t seed, std::uint64_t trial,
                         const std::vector<double>& log_abs_dets) {
  const int d = nu.dim();
  Rng wrng(seed, trial);
  Matrix q = Matrix::Identity(d, d);
  Matrix tmp(d, d);
  Vector rdiag(d);
  TrialRates out;
  out.acc.assign(std::size_t(d), 0.0);
  for (long long s = 0; s < n_steps; ++s) {
    const int i = nu.sample(wrng);
    tmp.noalias() = nu.atom(i).A * q;
    q.swap(tmp);
    mgs_inplace(q, rdiag);
    for (int j = 0; j < d; ++j) out.acc[std::size_t(j)] += std::log(rdiag(j));
    out.log_det_word += log_abs_dets[std::size_t(i)];
  }
  return out;
}

}  // namespace

TopExponentEstimate top_exponent(const AtomicMatrixMeasure& nu, long long n_steps,
                                 int n_trials, std::uint64_t seed, int workers) {
  if (n_steps < 1) throw std::invalid_argument("top_exponent: need n_steps >= 1");
  if (n_trials < 1) throw std::invalid_argument("top_exponent: need n_trials >= 1");

  TopExponentEstimate out;
  if (nu.size() == 1) {
    // Deterministic product: the growth rate of a generic vector is the log
    // spectral radius, available in closed form.
    const auto logs = sorted_log_abs_eigenvalues(nu.atom(0).A);
    out.estimate = logs[0];
    out.half_width = 0.0;
    out.per_trial.assign(std::size_t(n_trials), logs[0]);
    out.closed_form = true;
    return out;
  }

  const int d = nu.dim();
  out.per_trial.assign(std::size_t(n_trials), 0.0);
  parallel_trials(n_trials, workers, [&](int t) {
    Rng vrng(seed ^ kStartVectorSalt, std::uint64_t(t));
    Rng wrng(seed, std::uint64_t(t));
    Vector v = random_unit_vector(d, vrng);
    Vector tmp(d);
    double acc = 0.0;
    for (long long s = 0; s < n_steps; ++s) {
      tmp.noalias() = nu.atom(nu.sample(wrng)).A * v;
      const double nrm = tmp.norm();
      if (!(nrm > 0.0)) throw std::runtime_error("top_exponent: vector collapsed");
      acc += std::log(nrm);
      v = tmp / nrm;
    }
    out.per_trial[std::size_t(t)] = acc / double(n_steps);
  });
  const auto ms = summarize(out.per_trial);
  out.estimate = ms.mean;
  out.half_width = ms.half_width;
  return out;
}

SpectrumEstimate full_spectrum_qr(const AtomicMatrixMeasure& nu, long long n_steps,
                                  int n_trials, std::uint64_t seed, int workers) {
  const int d = nu.dim();
  if (n_steps < d) throw std::invalid_argument("full_spectrum_qr: need n_steps >= d");
  if (n_trials < 1) throw std::invalid_argument("full_spectrum_qr: need n_trials >= 1");

  SpectrumEstimate out;
  out.method = "qr";
  out.n_steps = n_steps;
  out.n_trials = n_trials;
  out.sum_exact = nu.mean_log_abs_det();

  if (nu.size() == 1) {
    out.values = sorted_log_abs_eigenvalues(nu.atom(0).A);
    out.half_widths.assign(std::size_t(d), 0.0);
    out.closed_form = true;
  } else {
    std::vector<double> log_abs_dets;
    for (int i = 0; i < nu.size(); ++i)
      log_abs_dets.push_back(std::log(std::abs(nu.atom(i).A.determinant())));

    std::vector<TrialRates> trials(static_cast<std::size_t>(n_trials));
    parallel_trials(n_trials, workers, [&](int t) {
      trials[std::size_t(t)] = qr_trajectory(nu, n_steps, seed, std::uint64_t(t), log_abs_dets);
    });

    out.values.assign(std::size_t(d), 0.0);
    out.half_widths.assign(std::size_t(d), 0.0);
    std::vector<double> per_trial(static_cast<std::size_t>(n_trials));
    for (int j = 0; j < d; ++j) {
      for (int t = 0; t < n_trials; ++t)
        per_trial[std::size_t(t)] = trials[std::size_t(t)].acc[std::size_t(j)] / double(n_steps);
      const auto ms = summarize(per_trial);
      out.values[std::size_t(j)] = ms.mean;
      out.half_widths[std::size_t(j)] = ms.half_width;
    }
    for (const auto& tr : trials) {
      const double acc_sum = std::accumulate(tr.acc.begin(), tr.acc.end(), 0.0);
      out.qr_det_residual = std::max(out.qr_det_residual,
                                     std::abs(acc_sum - tr.log_det_word) / double(n_steps));
    }
    // Control variate: the exact sum of exponents is known, so distribute the
    // sampled sum's residue evenly. This leaves per-trial telescoping intact
    // and removes the common drift of the word's empirical log-determinant.
    const double raw_sum = std::accumulate(out.values.begin(), out.values.end(), 0.0);
    const double shift = (out.sum_exact - raw_sum) / double(d);
    for (double& v : out.values) v += shift;
    // Sorting indices by value keeps half_widths attached to their exponent.
    std::vector<int> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return out.values[std::size_t(a)] > out.values[std::size_t(b)];
    });
    std::vector<double> sv(static_cast<std::size_t>(d), 0.0), sh(static_cast<std::size_t>(d), 0.0);
    for (int j = 0; j < d; ++j) {
      sv[std::size_t(j)] = out.values[std::size_t(order[std::size_t(j)])];
      sh[std::size_t(j)] = out.half_widths[std::size_t(order[std::size_t(j)])];
    }
    out.values = std::move(sv);
    out.half_widths = std::move(sh);
  }

  out.partial_sums.assign(std::size_t(d), 0.0);
  double run = 0.0;
  for (int j = 0; j < d; ++j) {
    run += out.values[std::size_t(j)];
    out.partial_sums[std::size_t(j)] = run;
  }
  out.sum_estimate = run;
  return out;
}

SpectrumEstimate spectrum_via_exterior(const AtomicMatrixMeasure& nu, long long n_steps,
                                       int n_trials, std::uint64_t seed, int workers) {
  const int d = nu.dim();
  if (d > 6) throw std::invalid_argument("spectrum_via_exterior: dimension too large (d <= 6)");
  if (n_steps < 1) throw std::invalid_argument("spectrum_via_exterior: need n_steps >= 1");

  SpectrumEstimate out;
  out.method = "exterior";
  out.n_steps = n_steps;
  out.n_trials = n_trials;
  out.sum_exact = nu.mean_log_abs_det();

  // Wedge measures share atom weights with nu, so the word stream (seed, t)
  // draws identical words at every level. The top wedge (l = d) is the scalar
  // determinant, so it is tracked with per-atom log|det| instead of a measure.
  std::vector<AtomicMatrixMeasure> wedges;
  wedges.reserve(std::size_t(d - 1));
  for (int l = 1; l <= d - 1; ++l) {
    std::vector<Atom> atoms;
    for (int i = 0; i < nu.size(); ++i)
      atoms.push_back({nu.atom(i).p, exterior_power(nu.atom(i).A, l)});
    wedges.emplace_back(std::move(atoms));
  }
  std::vector<double> atom_log_det;
  atom_log_det.reserve(std::size_t(nu.size()));
  for (int i = 0; i < nu.size(); ++i)
    atom_log_det.push_back(std::log(std::abs(nu.atom(i).A.determinant())));

  if (nu.size() == 1) {
    out.values = sorted_log_abs_eigenvalues(nu.atom(0).A);
    out.half_widths.assign(std::size_t(d), 0.0);
    out.closed_form = true;
    out.partial_sums.assign(std::size_t(d), 0.0);
    // Exact wedge partial sums for single atoms: s_l = log rho(wedge_l).
    for (int l = 1; l <= d - 1; ++l)
      out.partial_sums[std::size_t(l - 1)] =
          sorted_log_abs_eigenvalues(wedges[std::size_t(l - 1)].atom(0).A)[0];
    out.partial_sums[std::size_t(d - 1)] = atom_log_det[0];
    out.sum_estimate = out.partial_sums.back();
    return out;
  }

  // per_level_trial[l][t] = per-trial top rate of the (l+1)-th wedge.
  std::vector<std::vector<double>> per_level_trial(
      std::size_t(d), std::vector<double>(std::size_t(n_trials), 0.0));
  parallel_trials(n_trials, workers, [&](int t) {
    for (int l = 1; l <= d; ++l) {
      Rng wrng(seed, std::uint64_t(t));
      if (l == d) {
        double acc = 0.0;
        for (long long s = 0; s < n_steps; ++s)
          acc += atom_log_det[std::size_t(wrng.next_index(nu.weights()))];
        per_level_trial[std::size_t(l - 1)][std::size_t(t)] = acc / double(n_steps);
        continue;
      }
      const AtomicMatrixMeasure& w = wedges[std::size_t(l - 1)];
      const int dl = w.dim();
      Rng vrng(seed ^ (kStartVectorSalt + std::uint64_t(l)), std::uint64_t(t));
      Vector v = random_unit_vector(dl, vrng);
      Vector tmp(dl);
      double acc = 0.0;
      for (long long s = 0; s < n_steps; ++s) {
        const int i = wrng.next_index(w.weights());
        tmp.noalias() = w.atom(i).A * v;
        const double nrm = tmp.norm();
        if (!(nrm > 0.0)) throw std::runtime_error("spectrum_via_exterior: vector collapsed");
        acc += std::log(nrm);
        v = tmp / nrm;
      }
      per_level_trial[std::size_t(l - 1)][std::size_t(t)] = acc / double(n_steps);
    }
  });

  out.values.assign(std::size_t(d), 0.0);
  out.half_widths.assign(std::size_t(d), 0.0);
  out.partial_sums.assign(std::size_t(d), 0.0);
  std::vector<double> diffs(static_cast<std::size_t>(n_trials));
  for (int l = 1; l <= d; ++l) {
    const auto sums = summarize(per_level_trial[std::size_t(l - 1)]);
    out.partial_sums[std::size_t(l - 1)] = sums.mean;
    for (int t = 0; t < n_trials; ++t) {
      const double prev = (l == 1) ? 0.0 : per_level_trial[std::size_t(l - 2)][std::size_t(t)];
      diffs[std::size_t(t)] = per_level_trial[std::size_t(l - 1)][std::size_t(t)] - prev;
    }
    const auto ms = summarize(diffs);
    out.values[std::size_t(l - 1)] = ms.mean;
    out.half_widths[std::size_t(l - 1)] = ms.half_width;
  }
  out.sum_estimate = out.partial_sums.back();
  return out;
}

FiltrationEstimate filtration_estimate(const AtomicMatrixMeasure& nu,
                                       std::uint64_t word_seed, long long n_steps) {
  const int d = nu.dim();
  if (n_steps < d) throw std::invalid_argument("filtration_estimate: need n_steps >= d");

  // Simplicity gate: every consecutive spectral gap must clear 3x the
  // combined half-widths (and a floor, so closed-form zero widths still
  // require honestly separated exponents).
  const auto spec = full_spectrum_qr(nu, std::min<long long>(n_steps, 20000), 16,
                                     word_seed ^ kReferenceSalt);
  for (int i = 0; i + 1 < d; ++i) {
    const double gap = spec.values[std::size_t(i)] - spec.values[std::size_t(i + 1)];
    const double need = std::max(
        3.0 * (spec.half_widths[std::size_t(i)] + spec.half_widths[std::size_t(i + 1)]), 1e-6);
    if (gap <= need)
      throw std::runtime_error(
          "filtration_estimate: spectrum gap " + std::to_string(gap) + " at level " +
          std::to_string(i + 1) + " below resolution " + std::to_string(need) +
          "; filtration not identifiable");
  }

  // One recorded word; propagate the transposed factors in reverse order so
  // the frame aligns with the right singular directions of the forward
  // product without ever forming it. The propagation starts from a random
  // orthonormal frame: a fixed frame (e.g. the identity) can be exactly
  // orthogonal to one of the singular directions, which silently reorders
  // the recovered flag.
  std::vector<int> word(static_cast<std::size_t>(n_steps));
  {
    Rng wrng(word_seed, 0);
    for (long long s = 0; s < n_steps; ++s) word[std::size_t(s)] = nu.sample(wrng);
  }
  Rng frng(word_seed ^ kStartVectorSalt, 0);
  Matrix frame = random_orthonormal_frame(d, d, frng);
  Matrix tmp(d, d);
  Vector rdiag(d);
  for (long long k = n_steps - 1; k >= 0; --k) {
    tmp.noalias() = nu.atom(word[std::size_t(k)]).A.transpose() * frame;
    frame.swap(tmp);
    mgs_inplace(frame, rdiag);
  }

  FiltrationEstimate out;
  out.word_seed = word_seed;
  out.n_steps = n_steps;
  for (int i = 0; i < d; ++i) {
    out.spaces.emplace_back(Matrix(frame.rightCols(d - i)));
    out.exponents.push_back(spec.values[std::size_t(i)]);
  }

  // Growth dichotomy on the same word: a random vector of V^i grows at chi_i
  // once the i-1 faster levels are projected out. The vector is propagated as
  // the last column of a frame whose leading columns carry the faster
  // directions, re-orthonormalizing every step; the accumulated last
  // R-diagonal telescopes to the growth of v modulo the faster levels.
  // (Naive iteration of v alone cannot measure any rate below the top one:
  // rounding reseeds mass along the fastest direction every step.)
  Rng vrng(word_seed ^ kStartVectorSalt, 1);
  for (int i = 0; i < d; ++i) {
    const Matrix& q = out.spaces[std::size_t(i)].frame();
    Vector coeff(q.cols());
    for (int j = 0; j < q.cols(); ++j) coeff(j) = vrng.next_gaussian();
    Vector v = q * coeff;
    v /= v.norm();
    Matrix walk(d, i + 1);
    if (i > 0) walk.leftCols(i) = frame.leftCols(i);
    walk.col(i) = v;
    Matrix wtmp(d, i + 1);
    Vector wdiag(i + 1);
    double acc = 0.0;
    for (long long s = 0; s < n_steps; ++s) {
      wtmp.noalias() = nu.atom(word[std::size_t(s)]).A * walk;
      walk.swap(wtmp);
      mgs_inplace(walk, wdiag);
      acc += std::log(wdiag(i));
    }
    out.verified_rates.push_back(acc / double(n_steps));
  }
  return out;
}

double azuma_bound(double A, long long n, double s) {
  if (!(A > 0.0) || n < 1 || !(s > 0.0))
    throw std::invalid_argument("azuma_bound: need A > 0, n >= 1, s > 0");
  return 2.0 * std::exp(-(s * s) / (2.0 * double(n) * A * A));
}

LargeDeviationTable large_deviation_probe(const AtomicMatrixMeasure& nu, double epsilon,
                                          const std::vector<long long>& horizons,
                                          int n_trials, std::uint64_t seed, int workers) {
  if (horizons.empty()) throw std::invalid_argument("large_deviation_probe: empty grid");
  if (!(epsilon > 0.0)) throw std::invalid_argument("large_deviation_probe: need epsilon > 0");
  std::vector<long long> grid = horizons;
  std::sort(grid.begin(), grid.end());
  const long long n_max = grid.back();

  LargeDeviationTable out;
  out.horizon = grid;
  out.epsilon = epsilon;
  out.n_trials = n_trials;
  out.lambda_ref =
      top_exponent(nu, std::max<long long>(4 * n_max, 2000), 64, seed ^ kReferenceSalt).estimate;

  const int d = nu.dim();
  // last_violation[t] = largest n with |rate_n - lambda_ref| >= epsilon.
  std::vector<long long> last_violation(std::size_t(n_trials), 0);
  parallel_trials(n_trials, workers, [&](int t) {
    Rng vrng(seed ^ kStartVectorSalt, std::uint64_t(t));
    Rng wrng(seed, std::uint64_t(t));
    Vector v = random_unit_vector(d, vrng);
    Vector tmp(d);
    double acc = 0.0;
    long long last = 0;
    for (long long n = 1; n <= n_max; ++n) {
      tmp.noalias() = nu.atom(nu.sample(wrng)).A * v;
      const double nrm = tmp.norm();
      acc += std::log(nrm);
      v = tmp / nrm;
      if (std::abs(acc / double(n) - out.lambda_ref) >= epsilon) last = n;
    }
    last_violation[std::size_t(t)] = last;
  });

  for (long long N : grid) {
    int hits = 0;
    for (long long lv : last_violation)
      if (lv >= N) ++hits;
    out.fraction.push_back(double(hits) / double(n_trials));
  }

  // Least squares of log fraction vs N on strictly positive fractions.
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (out.fraction[i] > 0.0) {
      xs.push_back(double(grid[i]));
      ys.push_back(std::log(out.fraction[i]));
    }
  if (xs.size() >= 2) {
    const double n = double(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom > 0) {
      const double slope = (n * sxy - sx * sy) / denom;
      const double intercept = (sy - slope * sx) / n;
      out.c_hat = -slope;
      double ss_res = 0, ss_tot = 0;
      const double ymean = sy / n;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const double fit = slope * xs[i] + intercept;
        ss_res += (ys[i] - fit) * (ys[i] - fit);
        ss_tot += (ys[i] - ymean) * (ys[i] - ymean);
      }
      out.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    }
  }
  return out;
}

}  // namespace lyap
