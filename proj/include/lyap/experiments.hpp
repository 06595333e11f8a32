#pragma once

// Batch experiment runners behind the CLI: each takes a JSON config (unknown
// keys rejected), produces a deterministic report plus CSV tables, and lists
// failed internal checks. Reports never contain timing or worker counts, so
// a given (config, seed) pair yields bit-identical outputs at any parallelism.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lyap/measure.hpp"
#include "lyap/rng.hpp"

namespace lyap {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct ExperimentResult {
  nlohmann::json report;
  // (file stem, table); written as <stem>.csv next to report.json
  std::vector<std::pair<std::string, CsvTable>> tables;
  // (file stem, document); written as <stem>.json next to report.json
  std::vector<std::pair<std::string, nlohmann::json>> extra_json;
  std::vector<std::string> failures;  // failed check names; non-empty => exit 2
};

// Names accepted by run_experiment, in listing order.
const std::vector<std::string>& experiment_names();

// Dispatches to the named runner. seed_override (from --seed / LYAP_SEED)
// wins over the config's "seed"; workers only affects scheduling, never
// results. Unknown experiment names and malformed configs throw
// std::invalid_argument.
ExperimentResult run_experiment(const std::string& name,
                                const nlohmann::json& config,
                                std::optional<std::uint64_t> seed_override,
                                int workers);

// Three-dimensional pinch-and-turn family: block diag(sigma, 1/sigma) acting
// on the first two coordinates, alone or composed with a rotation by theta,
// each with weight 1/2; the third coordinate is fixed. The line e3 and the
// plane e1^e2 are jointly invariant.
AtomicMatrixMeasure example32_measure(double sigma, double theta);

// Two-atom family on R^2: diag(2, 1/2) with weight 1-t, the coordinate swap
// with weight t. At t = 0 the top exponent is exactly log 2; for t in (0, 1)
// the norm performs a reflecting random walk and the exponent vanishes.
AtomicMatrixMeasure kifer_measure(double t);

// Rotation by 2 pi theta with entries snapped to exact {-1, 0, 1} when within
// 1e-15, so quarter-turn products vanish entrywise exactly.
Matrix snapped_rotation(double theta);

struct LThetaSeries {
  double value = 0.0;        // sum_{k=0..K} 2^{-k-2} log|cos(2 pi k theta)|
  bool minus_infinity = false;  // some cos(2 pi k theta) is exactly zero
  int zero_k = -1;           // witness k for the zero cosine
  double tail_estimate = 0.0;   // magnitude of 60 further terms
};

// Truncated exponent series of the projection-rotation family
// {diag(1,0), rotation(theta)} with equal weights. A cosine vanishes exactly
// iff 4 k theta is an odd integer; that is detected up to 1e-9 and flagged
// instead of summed.
LThetaSeries ltheta_series(double theta, int K);

// Same truncated sum with no zero detection: every log|cos| term enters as
// evaluated in floating point. Useful for pinning the raw accumulation.
double ltheta_series_raw(double theta, int K);

// Direct simulation of the same family: tracks only the current rotation run
// length and the accumulated log |cos|, returning the length-normalized sum.
// hit_zero (optional) reports whether a run hit an exactly vanishing cosine.
double ltheta_chain_rate(double theta, long long n_steps, Rng& rng,
                         bool* hit_zero = nullptr);

// Random k-atom measure with comfortably invertible matrices (entries
// gaussian * spread, resampled until the determinant is solid).
AtomicMatrixMeasure random_invertible_measure(int d, int k_atoms, double spread,
                                              Rng& rng);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace lyap
