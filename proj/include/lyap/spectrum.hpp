#pragma once

// Lyapunov spectrum estimators for random matrix products: top exponent by
// vector renormalization, full spectrum by per-step QR re-orthonormalization,
// exterior-power cross-estimator, finite-horizon filtration estimates, and
// concentration / large-deviation probes.

#include <cstdint>
#include <string>
#include <vector>

#include "lyap/linalg.hpp"
#include "lyap/measure.hpp"

namespace lyap {

struct TopExponentEstimate {
  double estimate = 0.0;
  double half_width = 0.0;          // 1.96 * stderr across trials
  std::vector<double> per_trial;    // per-trial rates, ascending trial order
  bool closed_form = false;         // single-atom measures: exact log spectral radius
};

struct SpectrumEstimate {
  std::vector<double> values;        // lambda_1 >= ... >= lambda_d, nats/step
  std::vector<double> half_widths;   // per-exponent, 1.96 * stderr across trials
  std::vector<double> partial_sums;  // s_l = lambda_1 + ... + lambda_l
  long long n_steps = 0;
  int n_trials = 0;
  std::string method;                // "qr" | "exterior" | "top-only"
  bool closed_form = false;          // deterministic measure: exact eigenvalue path
  double sum_estimate = 0.0;         // sum of reported values
  double sum_exact = 0.0;            // sum_i p_i log|det A_i|
  double qr_det_residual = 0.0;      // worst per-trajectory telescoping error
};

struct FiltrationEstimate {
  std::vector<SubspacePoint> spaces;  // V^1 > V^2 > ... > V^d, dim V^i = d-i+1
  std::vector<double> exponents;      // chi_i, strictly decreasing
  std::vector<double> verified_rates; // re-simulated growth rate of a random
                                      // vector of each estimated space on the
                                      // same word, measured modulo the faster
                                      // levels (kept numerically meaningful by
                                      // per-step re-orthonormalization)
  std::uint64_t word_seed = 0;
  long long n_steps = 0;
};

struct LargeDeviationTable {
  std::vector<long long> horizon;    // window starts N
  std::vector<double> fraction;      // P(some n in [N, N_max] leaves the band)
  double c_hat = 0.0;                // fitted decay rate: log fraction ~ -c_hat N
  double r_squared = 0.0;
  double lambda_ref = 0.0;           // center of the band
  double epsilon = 0.0;              // band half-width
  int n_trials = 0;
};

// Averages (1/n) log |g_{n-1}...g_0 v| over trials with a fresh random start
// direction per trial, renormalizing every step. Words for trial t are drawn
// from the stream (seed, t), start vectors from an independent stream, so two
// estimators sharing (seed, t) see identical words. Single-atom measures take
// the exact closed form log(spectral radius).
TopExponentEstimate top_exponent(const AtomicMatrixMeasure& nu, long long n_steps,
                                 int n_trials, std::uint64_t seed, int workers = 1);

// Propagates the identity frame with per-step modified Gram-Schmidt QR,
// accumulating log R_ii. Reported values are shifted by the exact-sum control
// variate (sum lambda_i = mean log|det| is known in closed form) and sorted.
// Single-atom measures take the exact closed form log|eig_i|, sorted.
SpectrumEstimate full_spectrum_qr(const AtomicMatrixMeasure& nu, long long n_steps,
                                  int n_trials, std::uint64_t seed, int workers = 1);

// Runs top_exponent on every exterior power (l = 1..d) with paired word
// streams; lambda_l = s_l - s_{l-1} from the wedge partial sums. Requires the
// largest wedge dimension C(d, floor(d/2)) to stay small (d <= 6).
SpectrumEstimate spectrum_via_exterior(const AtomicMatrixMeasure& nu, long long n_steps,
                                       int n_trials, std::uint64_t seed, int workers = 1);

// Estimates the growth filtration of one sampled trajectory: V^i is spanned
// by the trailing columns of the QR-propagated frame of the transposed
// product applied in reverse word order (the right singular directions of the
// forward product). Requires simple spectrum: every consecutive gap of the
// internally estimated spectrum must exceed 3x the combined half-widths,
// otherwise throws with a diagnostic. The growth dichotomy is re-verified on
// the same word and reported in verified_rates.
FiltrationEstimate filtration_estimate(const AtomicMatrixMeasure& nu,
                                       std::uint64_t word_seed, long long n_steps);

// Closed-form martingale concentration bound 2 exp(-s^2 / (2 n A^2)).
double azuma_bound(double A, long long n, double s);

// For each window start N, the fraction of trajectories whose running rate
// (1/n) log |P_n v| leaves (lambda_ref - eps, lambda_ref + eps) for some
// n in [N, N_max]; fits log fraction vs N by least squares on the positive
// entries. lambda_ref is estimated internally from an independent stream.
LargeDeviationTable large_deviation_probe(const AtomicMatrixMeasure& nu, double epsilon,
                                          const std::vector<long long>& horizons,
                                          int n_trials, std::uint64_t seed,
                                          int workers = 1);

}  // namespace lyap
