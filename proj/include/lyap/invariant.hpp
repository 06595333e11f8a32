#pragma once

// Common invariant subspaces of a matrix measure, block decompositions
// adapted to an invariant subspace, restricted / quotient measures, and
// equator detection (the maximal invariant subspace with strictly smaller
// restricted top exponent).

#include <cstdint>
#include <optional>
#include <vector>

#include "lyap/linalg.hpp"
#include "lyap/measure.hpp"

namespace lyap {

struct BlockDecomposition {
  Matrix gE;     // r x r: action on E in the adapted basis
  Matrix h;      // r x (d-r): coupling block
  Matrix gPerp;  // (d-r) x (d-r): induced action on the orthogonal complement
  Matrix basis;  // d x d orthonormal, first r columns span E
};

// Orthonormal-basis block form of g with invariant subspace E; verifies the
// invariance residual, the quotient identity (projection of g u equals gPerp
// applied to the projection of u, 10 random u), and |gPerp| <= |g|.
BlockDecomposition block_decompose(const Matrix& g, const SubspacePoint& E,
                                   double residual_tol = 1e-8);

// Measures of the per-atom blocks. restrict_measure needs dim E >= 2 (use
// restricted_top_exponent for lines); quotient_measure needs dim E <= d - 2.
AtomicMatrixMeasure restrict_measure(const AtomicMatrixMeasure& nu, const SubspacePoint& E);
AtomicMatrixMeasure quotient_measure(const AtomicMatrixMeasure& nu, const SubspacePoint& E);

// Candidate r-dimensional subspaces invariant under every atom within the
// relative residual max_i |(I-P_L) A_i Q_L| / |A_i| <= residual_tol.
// Search: eigenspace lattice of two random measure-algebra combinations
// sum_i c_i A_i; sums of eigen-blocks with total dimension r are verified
// against all atoms, and only verified candidates are returned (sound, but
// possibly incomplete on degenerate inputs).
std::vector<SubspacePoint> invariant_subspace_search(const AtomicMatrixMeasure& nu, int r,
                                                     double residual_tol = 1e-8,
                                                     std::uint64_t seed = 99);

struct SpectrumBudget {
  long long n_steps = 20000;
  int n_trials = 16;
  std::uint64_t seed = 7;
  int workers = 1;
};

struct EquatorReport {
  SubspacePoint subspace;
  double lambda_restricted = 0.0;
  double lambda_restricted_half_width = 0.0;
  double lambda_full = 0.0;
  double lambda_full_half_width = 0.0;
  // Invariant subspaces whose restricted exponent was NOT below the full one
  // by more than the combined half-widths (rejected candidates).
  std::vector<SubspacePoint> maximality_witnesses;
  // Incomparable candidates that also passed; nonempty means the maximality
  // choice was ambiguous and all of them are reported.
  std::vector<SubspacePoint> ambiguous_candidates;
};

// Exact restricted top exponent on a line (1-dimensional invariant subspace):
// sum_i p_i log |A_i q|.
double restricted_top_exponent_line(const AtomicMatrixMeasure& nu, const SubspacePoint& L);

// Searches invariant subspaces of every dimension 1..d-1, estimates the top
// exponent of each restriction, and returns the maximal subspace whose
// restricted exponent sits below the full top exponent by more than the
// combined half-widths. Returns nullopt when no invariant subspace qualifies.
std::optional<EquatorReport> equator_detect(const AtomicMatrixMeasure& nu,
                                            const SpectrumBudget& budget,
                                            double residual_tol = 1e-8);

}  // namespace lyap
