#pragma once

// Contraction diagnostics around a repelling subspace: pairwise separation
// functions on flags, their stabilized (floored) variants, the logarithmic
// cutoff observable, and Monte Carlo drift probes along random matrix
// products.

#include <cstdint>
#include <utility>
#include <vector>

#include "lyap/linalg.hpp"
#include "lyap/measure.hpp"

namespace lyap {

struct MargulisParams {
  // Per-level exponents; gamma has one entry per flag level, beta couples
  // consecutive levels (size rank - 1).
  std::vector<double> gamma;
  std::vector<double> beta;
  // Per-level floor scales omega; the stabilization floor after n steps is
  // omega[k] * exp(-B * n).
  std::vector<double> omega;
  double Omega = 1e4;     // additive ceiling inside the cutoff observable
  double eps_cut = 0.1;   // radius around E where the observable is active
  double B = 0.0;         // per-step log-norm bound; probes fill it in when <= 0

  static MargulisParams defaults(int rank);
};

// Distance from the span of the two directions to E. Symmetric; requires the
// directions to be at least 1e-9 apart.
double vertical_angle_1(const ProjectivePoint& x, const ProjectivePoint& xp,
                        const SubspacePoint& E);

// vertical_angle_1 damped by the separation of the pair raised to gamma.
double vertical_projection_1(const ProjectivePoint& x, const ProjectivePoint& xp,
                             const SubspacePoint& E, double gamma);

// Distance from (top level of F) + (first level of Fp) to E. Asymmetric;
// requires the first level of Fp to sit at least 1e-9 away from the top
// level of F.
double vertical_angle_r(const FlagPoint& F, const FlagPoint& Fp,
                        const SubspacePoint& E);

// vertical_angle_r damped by the transversality of the top level of F to
// (previous level of F) + (first level of Fp), raised to gamma_r. At rank one
// the transversality factor degenerates to the separation of the two lines.
double vertical_projection_r(const FlagPoint& F, const FlagPoint& Fp,
                             const SubspacePoint& E, double gamma_r);

// Level-recursive product: psi_1 = vertical_projection at rank one, and
// psi_k = psi_{k-1}(truncated flags)^{beta_{k-1}} * vertical_projection_k.
double psi_r(const FlagPoint& F, const FlagPoint& Fp, const SubspacePoint& E,
             const MargulisParams& params);

struct StabilizedValues {
  double sva = 0.0;  // floored vertical angle at the top level
  double svp = 0.0;  // floored vertical projection at the top level
  double psi = 0.0;  // fully floored recursive product
};

// Same recursion with every distance factor floored at omega[k] exp(-B n),
// which keeps logarithms bounded along length-n trajectories.
StabilizedValues stabilized_psi(const FlagPoint& F, const FlagPoint& Fp,
                                const SubspacePoint& E, const MargulisParams& params,
                                int n_steps);

// Symmetrization over the argument order of the stabilized product.
double psi_hat(const FlagPoint& F, const FlagPoint& Fp, const SubspacePoint& E,
               const MargulisParams& params, int n_steps);

// log(Omega + 1 / psi_hat) when either top level is eps_cut-close to E,
// log(Omega) otherwise. Always >= log(Omega), symmetric in the pair.
double cutoff_Psi(const FlagPoint& F, const FlagPoint& Fp, const SubspacePoint& E,
                  const MargulisParams& params, int n_steps);

struct DriftReport {
  int n = 0;              // word length
  int samples = 0;        // pairs / points drawn
  double mean_drift = 0.0;
  double median_drift = 0.0;
  double fraction_decreasing = 0.0;
  double min_increment = 0.0;
  double max_increment = 0.0;
  double C_bound = 0.0;   // deterministic ceiling: no increment may exceed it
  std::uint64_t seed = 0;
};

// Draws pairs of rank-`rank` flags whose top levels sit at distance
// [band_lo, band_hi] from E, pushes both through the same random length-n
// word, and reports the increments of the cutoff observable. C_bound is
// n * sum_k (B + gamma_k A) with (A, B) the modulus/log-norm constants of the
// measure's support.
DriftReport drift_probe(const AtomicMatrixMeasure& nu, const SubspacePoint& E,
                        MargulisParams params, int rank, double band_lo,
                        double band_hi, int n, int n_samples, std::uint64_t seed,
                        int workers = 1);

// Single-point variant: increments of log(Omega + 1/max(d(x, E), floor))
// under the cutoff, measuring how strongly E repels nearby directions.
DriftReport repeller_probe(const AtomicMatrixMeasure& nu, const SubspacePoint& E,
                           MargulisParams params, double band_lo, double band_hi,
                           int n, int n_samples, std::uint64_t seed,
                           int workers = 1);

// Random flag over a fixed top level: the top subspace of the result spans
// exactly the given orthonormal frame (rotated within itself), the lower
// levels are drawn from the rotation-invariant distribution on inner flags.
// With `restricted`, the first level is rejection-sampled until it sits at
// distance at least half of d(span(frame), E) from E; throws if the
// acceptance rate falls below 1e-4. acceptance_rate (optional) receives the
// observed rate.
FlagPoint sample_homogeneous_flag(const Matrix& top_frame, bool restricted,
                                  const SubspacePoint& E, Rng& rng,
                                  double* acceptance_rate = nullptr);

// Redraws the inner levels of both flags (top levels kept) until the two
// first levels are at least tau apart and each is transversal to the other
// flag's top level. Throws after too many rejections.
std::pair<FlagPoint, FlagPoint> spreading_out(const FlagPoint& F,
                                              const FlagPoint& Fp,
                                              const SubspacePoint& E, double tau,
                                              Rng& rng);

}  // namespace lyap
