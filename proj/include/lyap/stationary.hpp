#pragma once

// Empirical measures on projective / Grassmann / flag spaces, pushforward
// under an atomic matrix measure, exact Wasserstein-1 diagnostics, and the
// stationary-measure estimator (block-window averaging of pushforward
// iterates) together with the Furstenberg integral.

#include <cstdint>
#include <vector>

#include "lyap/linalg.hpp"
#include "lyap/measure.hpp"
#include "lyap/rng.hpp"

namespace lyap {

enum class SpaceKind { projective, grassmann, flag };

struct SpaceTag {
  SpaceKind kind = SpaceKind::projective;
  int d = 2;  // ambient dimension
  int r = 1;  // subspace / flag rank (projective: 1)

  static SpaceTag projective(int d) { return {SpaceKind::projective, d, 1}; }
  static SpaceTag grassmann(int r, int d) { return {SpaceKind::grassmann, d, r}; }
  static SpaceTag flag(int r, int d) { return {SpaceKind::flag, d, r}; }
  bool operator==(const SpaceTag&) const = default;
};

// point is a d x r orthonormal frame; for flags the column prefixes span the
// nested subspaces, for projective points r = 1 with canonical sign.
struct MeasureAtom {
  double w = 0.0;
  Matrix point;
};

class EmpiricalMeasure {
 public:
  EmpiricalMeasure(SpaceTag tag, std::vector<MeasureAtom> atoms);

  const SpaceTag& tag() const { return tag_; }
  const std::vector<MeasureAtom>& atoms() const { return atoms_; }
  int size() const { return int(atoms_.size()); }

 private:
  SpaceTag tag_;
  std::vector<MeasureAtom> atoms_;
};

// Distance between two points of the tagged space: sine of the angle
// (projective), largest principal sine (grassmann), max over levels (flag).
double space_distance(const SpaceTag& tag, const Matrix& a, const Matrix& b);

struct PruneOptions {
  double merge_radius = 1e-9;  // grid cell size; doubled until max_atoms holds
  double weight_floor = 1e-12; // atoms below floor dropped, mass renormalized
  int max_atoms = 1 << 30;
};

// Grid-merges atoms (deterministic cell buckets, weighted representative for
// projective points, heaviest frame otherwise), doubling the radius until the
// atom budget holds, then drops below-floor atoms and renormalizes.
EmpiricalMeasure prune_measure(const EmpiricalMeasure& eta, const PruneOptions& opt);

// Exact 1-Wasserstein between two clouds on the same space.
double measure_w1(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

// Coarsens both clouds on a shared grid (smallest radius in the doubling
// sequence bringing both under target_atoms) and returns their exact W1;
// the shared grid keeps the coarsening error comparable on both sides.
double measure_w1_coarse(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                         int target_atoms, double start_radius = 1e-9);

// Pushforward: atom (w, x) -> atoms (w p_i, A_i x) for every i, frames
// re-orthonormalized. Exact weight bookkeeping; no pruning.
EmpiricalMeasure push_measure(const AtomicMatrixMeasure& nu, const EmpiricalMeasure& eta);

// Pushforward followed by pruning.
EmpiricalMeasure push_measure(const AtomicMatrixMeasure& nu, const EmpiricalMeasure& eta,
                              const PruneOptions& opt);

EmpiricalMeasure uniform_random_cloud(const SpaceTag& tag, int n_atoms, Rng& rng);

struct StationaryOptions {
  long long n_iters = 512;       // total pushforward iterations
  std::uint64_t seed = 1;
  int window = 64;               // block length for the running averages
  int start_atoms = 64;
  double merge_radius = 1e-9;
  double prune_floor = 1e-12;
  int per_iter_max_atoms = 4096; // cap on each iterate cloud
  int result_max_atoms = 4096;   // cap on the returned block average
  int diag_atoms = 128;          // coarsening budget for W1 diagnostics
  double converge_threshold = 1e-4;
};

struct StationaryResult {
  EmpiricalMeasure measure;   // final block average, pruned
  double diagnostic = 0.0;    // block-to-block W1 plus the prune cost below
  double prune_cost = 0.0;    // W1 upper bound on pruning done in the last block
  bool converged = false;     // diagnostic < converge_threshold
  long long n_iters = 0;
  int window = 0;
};

// Iterates the pushforward from a uniform random cloud and averages iterates
// over consecutive blocks of `window` iterations. The pushforward of a block
// average matches the average shifted by one iterate, so the stationarity
// defect of the returned measure is controlled by the consecutive-block W1
// plus the W1 cost of the pruning performed while forming the block; the
// diagnostic is the sum of those two terms, so it keeps bounding the defect
// even when pruning pins the iterate cloud to an exact fixed point.
// Non-convergence is flagged, never thrown.
StationaryResult stationary_estimate(const AtomicMatrixMeasure& nu,
                                     const StationaryOptions& opt);

// Sum over atoms and matrix atoms of p_i w log|A_i v| (projective spaces).
double furstenberg_integral(const AtomicMatrixMeasure& nu, const EmpiricalMeasure& eta);

}  // namespace lyap
