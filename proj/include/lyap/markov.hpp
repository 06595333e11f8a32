#pragma once

// Finite-state Markov operators: stationary vectors, localization of a chain
// to a subset, couplings with forbidden rectangles, additive-drift mass
// bounds, and the core/border classification of an invariant-subspace
// neighborhood.

#include <cstdint>
#include <string>
#include <vector>

#include "lyap/linalg.hpp"
#include "lyap/measure.hpp"

namespace lyap {

class FiniteMarkovKernel {
 public:
  // rows must be square, entrywise nonnegative, each row summing to 1 within
  // 1e-12.
  explicit FiniteMarkovKernel(Matrix rows);

  int n_states() const { return int(rows_.rows()); }
  const Matrix& rows() const { return rows_; }

  // A stationary probability vector (pi^T rows = pi^T), via least squares on
  // the stacked fixed-point + normalization system.
  Vector stationary() const;

 private:
  Matrix rows_;
};

struct LocalizedKernel {
  FiniteMarkovKernel kernel;    // |U| x |U| localized operator
  std::vector<int> states;      // original indices of U, ascending
  Vector eta_U;                 // normalized restriction of eta to U
  double J_outflow = 0.0;       // sum_{x in U} eta(x) sigma_x(U^c)
  double J_inflow = 0.0;        // sum_{x in U^c} eta(x) sigma_x(U)
};

// Localization of T to U: each row keeps its inside part and re-injects its
// escaping mass through the eta-weighted average re-entry distribution
// (1/J) sum_{z notin U} eta(z) (sigma_z | U). With zero exchange mass (J = 0)
// the plain restriction is returned. eta must be stationary within 1e-10 and
// give U positive mass; the normalized restriction eta_U is then stationary
// for the localized kernel.
LocalizedKernel localize_kernel(const FiniteMarkovKernel& T, const Vector& eta,
                                const std::vector<int>& U);

// Coupling of eta (on {0..n-1}) and eta2 (on {0..m-1}) with zero mass on
// A x A2, built from the three-rectangle closed form; requires
// eta(A) < eta(A^c) and eta2(A2) < eta2(A2^c). Marginals are exact.
Matrix coupling_avoiding(const Vector& eta, const Vector& eta2,
                         const std::vector<int>& A, const std::vector<int>& A2);

struct AvoidancePair {
  std::vector<int> A, C;    // A subset of C, first factor
  std::vector<int> A2, C2;  // A2 subset of C2, second factor
};

// Iterated coupling vanishing on every A_j x A2_j: starting from the product
// coupling, step j removes the mass of A_j x A2_j together with a
// theta_j-scaled copy of the mass outside C_j x C2_j and re-injects two
// product correction terms supported away from every forbidden rectangle.
// Requires theta_j < 1 at every step and the cross-compatibility condition:
// whenever A_i meets A_j, A2_i must sit inside C2_j (and mirrored); violations
// raise an error naming the offending pair.
Matrix coupling_avoiding_many(const Vector& eta, const Vector& eta2,
                              const std::vector<AvoidancePair>& pairs);

struct MargulisBoundReport {
  double kappa_A = 0.0;   // min over A of (Psi - T Psi): uniform downward drift
  double kappa_B = 0.0;   // max(0, max over B of (T Psi - Psi)): worst upward drift
  bool hypotheses_hold = false;       // kappa_A > 0
  double stationarity_residual = 0.0; // |zeta T - zeta|_1 / zeta(X)
  double zeta_B = 0.0;    // measured mass of B
  double zeta_X = 0.0;    // total mass
  double bound = 0.0;     // kappa_A / (kappa_A + kappa_B) * zeta_X
  bool asserted = false;  // hypotheses hold and zeta is stationary
  bool holds = false;     // asserted and zeta_B >= bound - 1e-12
};

// Computes the tightest drift constants of Psi on the partition (A, B) and,
// when the downward drift is strict and zeta is T-stationary, checks the mass
// bound zeta(B) >= kappa_A / (kappa_A + kappa_B) * zeta(X).
MargulisBoundReport margulis_mass_bound_check(const FiniteMarkovKernel& T,
                                              const Vector& Psi,
                                              const std::vector<int>& A,
                                              const std::vector<int>& B,
                                              const Vector& zeta);

// Additive drift constant obtained from a multiplicative drift
// T Phi <= c Phi + b on {Phi >= alpha}: kappa = -log(c + b / alpha).
double additive_drift_from_multiplicative(double c, double b, double alpha);

enum class CoreClass { core_sharp, core, border, outside };

// Classifies a projective point against the neighborhood family
// X_t = { d(x, E) <= (1 - t/100) eps } with the fixed step a_X = eps/100:
// core needs x and every A_i x inside X_2, the sharp core additionally needs
// every A_i^{-1} x inside the core, border is X_0 minus the core.
CoreClass core_border(const AtomicMatrixMeasure& nu, const SubspacePoint& E, double eps,
                      const ProjectivePoint& x);

std::string to_string(CoreClass c);

}  // namespace lyap
