#pragma once

// Finitely supported probability measures on invertible matrices: atoms,
// word samplers, convolution powers, ball-smoothing, and support diagnostics.

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "lyap/linalg.hpp"
#include "lyap/rng.hpp"

namespace lyap {

struct Atom {
  double p = 0.0;
  Matrix A;
};

// Weighted atoms (p_i, A_i): p_i > 0, sum 1 within 1e-12, all A_i invertible.
class AtomicMatrixMeasure {
 public:
  explicit AtomicMatrixMeasure(std::vector<Atom> atoms, double invertibility_tol = 1e-12);

  int dim() const { return int(atoms_[0].A.rows()); }
  int size() const { return int(atoms_.size()); }
  const Atom& atom(int i) const { return atoms_[std::size_t(i)]; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }

  // Draws an atom index with the atom probabilities.
  int sample(Rng& rng) const { return rng.next_index(weights_); }

  // Exact mean log |det|: the sum of all Lyapunov exponents.
  double mean_log_abs_det() const;

  // Rescales every atom by c > 0 (shifts the whole spectrum by log c).
  AtomicMatrixMeasure scaled(double c) const;

 private:
  std::vector<Atom> atoms_;
  std::vector<double> weights_;
};

// Deterministic matrix source: draw(i) is a pure function of (seed, i).
struct MatrixSampler {
  std::function<Matrix(std::uint64_t index)> draw;
  double support_norm_bound = 0.0;  // sup of max(|g|, |g^-1|) over the support
  int dim = 0;
};

struct SupportConstants {
  double A = 0.0;  // log-distance Lipschitz bound on Grassmannians
  double B = 2.0;  // max_i(log|A_i| + log|A_i^-1|) + 2
};

// k-fold convolution. Exact enumeration (words g_{n-1}...g_0 with product
// weights) when m^n <= cap, otherwise a sampler of i.i.d. length-n words.
std::variant<AtomicMatrixMeasure, MatrixSampler> convolution_power(
    const AtomicMatrixMeasure& nu, int n, std::uint64_t seed, int cap = 4096);

// Samples A_i * exp(M) with i ~ weights and M uniform entries scaled so
// |M| <= radius: a full-dimensional ball around the identity.
MatrixSampler smooth(const AtomicMatrixMeasure& nu, double radius, std::uint64_t seed);

struct TopologyDistance {
  double weak_star_proxy = 0.0;     // exact 1-Wasserstein, entrywise sup-norm ground metric
  double support_hausdorff = 0.0;   // exact Hausdorff distance between atom sets
};

TopologyDistance topology_distance(const AtomicMatrixMeasure& nu1,
                                   const AtomicMatrixMeasure& nu2);

// B over a margin-enlarged neighborhood (atoms scaled by (1 +/- margin));
// A estimated as the max over n_pairs random same-dimension subspace pairs
// and atoms of |log d(A U, A V) - log d(U, V)| (a sampled lower bound on the
// true sup; reported as such).
SupportConstants support_constants(const AtomicMatrixMeasure& nu, double margin = 0.0,
                                   int n_pairs = 1000, std::uint64_t seed = 12345);

}  // namespace lyap
