#include "lyap/margulis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "lyap/parallel.hpp"

namespace lyap {

namespace {

// Salt for the auxiliary stream that draws start configurations, so the word
// stream (plain trial index) is never shared with it.
constexpr std::uint64_t kPairSalt = 0xA5C1ED0DDE5EED01ull;

constexpr double kGeneralPositionTol = 1e-9;

void check_params(const MargulisParams& p, int rank) {
  if (rank < 1) throw std::invalid_argument("rank must be at least 1");
  if (int(p.gamma.size()) != rank || int(p.omega.size()) != rank ||
      int(p.beta.size()) != rank - 1) {
    std::ostringstream os;
    os << "parameter sizes (gamma " << p.gamma.size() << ", beta " << p.beta.size()
       << ", omega " << p.omega.size() << ") do not fit rank " << rank;
    throw std::invalid_argument(os.str());
  }
  for (double g : p.gamma)
    if (!(g >= 0.0)) throw std::invalid_argument("gamma entries must be >= 0");
  for (double b : p.beta)
    if (!(b >= 0.0)) throw std::invalid_argument("beta entries must be >= 0");
  for (double w : p.omega)
    if (!(w > 0.0)) throw std::invalid_argument("omega entries must be > 0");
  if (!(p.Omega > 0.0)) throw std::invalid_argument("Omega must be > 0");
  if (!(p.eps_cut > 0.0)) throw std::invalid_argument("eps_cut must be > 0");
  if (!(p.B >= 0.0)) throw std::invalid_argument("B must be >= 0");
}

// d(F_k + first level of Fp, E) for the level-k prefix of F. When `enforce`
// is set the line must be in general position with respect to the top level.
double raw_vertical_angle(const SubspacePoint& Fk, const SubspacePoint& line,
                          const SubspacePoint& E, bool enforce) {
  if (enforce && subspace_distance(line, Fk) <= kGeneralPositionTol) {
    throw std::invalid_argument(
        "degenerate pair: the partner line lies inside the top level");
  }
  return subspace_distance(subspace_sum(Fk, line, 1e-12), E);
}

// Transversality factor at level k: separation of the two lines at the
// bottom, otherwise distance from F_k to (F_{k-1} + first level of Fp).
double transversality_factor(const FlagPoint& F, const SubspacePoint& line, int k) {
  if (k == 0) return subspace_distance(F.level(0), line);
  return subspace_distance(F.level(k),
                           subspace_sum(F.level(k - 1), line, 1e-12));
}

struct PairLevels {
  std::vector<double> va;  // vertical angles per level
  std::vector<double> tv;  // transversality factors per level
};

PairLevels pair_levels(const FlagPoint& F, const FlagPoint& Fp,
                       const SubspacePoint& E, bool enforce) {
  const int r = F.rank();
  const SubspacePoint& line = Fp.level(0);
  if (enforce && subspace_distance(line, F.top()) <= kGeneralPositionTol) {
    throw std::invalid_argument(
        "degenerate pair: the partner line lies inside the top level");
  }
  PairLevels out;
  out.va.reserve(std::size_t(r));
  out.tv.reserve(std::size_t(r));
  for (int k = 0; k < r; ++k) {
    out.va.push_back(raw_vertical_angle(F.level(k), line, E, false));
    out.tv.push_back(transversality_factor(F, line, k));
  }
  return out;
}

double recursive_product(const PairLevels& lv, const MargulisParams& p,
                         double floor_scale, int n_steps,
                         StabilizedValues* top = nullptr) {
  const int r = int(lv.va.size());
  double psi = 0.0;
  double sva = 0.0, svp = 0.0;
  for (int k = 0; k < r; ++k) {
    const double floor_k =
        floor_scale > 0.0 ? p.omega[std::size_t(k)] * std::exp(-p.B * n_steps) : 0.0;
    sva = std::max(lv.va[std::size_t(k)], floor_k);
    const double tv = std::max(lv.tv[std::size_t(k)], floor_k);
    svp = sva * std::pow(tv, p.gamma[std::size_t(k)]);
    psi = (k == 0) ? svp : std::pow(psi, p.beta[std::size_t(k - 1)]) * svp;
  }
  if (top) *top = {sva, svp, psi};
  return psi;
}

void check_pair(const FlagPoint& F, const FlagPoint& Fp, const SubspacePoint& E) {
  if (F.rank() != Fp.rank()) {
    throw std::invalid_argument("the two flags must have equal rank");
  }
  if (F.dim_ambient() != Fp.dim_ambient() || F.dim_ambient() != E.dim_ambient()) {
    throw std::invalid_argument("flag and subspace ambient dimensions disagree");
  }
}

double linear_mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / double(xs.size());
}

double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

DriftReport summarize_increments(const std::vector<double>& inc, int n,
                                 double c_bound, std::uint64_t seed) {
  DriftReport rep;
  rep.n = n;
  rep.samples = int(inc.size());
  rep.mean_drift = linear_mean(inc);
  rep.median_drift = median_of(inc);
  int below = 0;
  rep.min_increment = inc.front();
  rep.max_increment = inc.front();
  for (double x : inc) {
    if (x < 0.0) ++below;
    rep.min_increment = std::min(rep.min_increment, x);
    rep.max_increment = std::max(rep.max_increment, x);
  }
  rep.fraction_decreasing = double(below) / double(inc.size());
  rep.C_bound = c_bound;
  rep.seed = seed;
  return rep;
}

// Orthonormal rank-frame tilted off E by exactly t: sqrt(1-t^2) base + t perp
// with base inside E and perp inside the orthogonal complement.
Matrix tilted_frame_near(const SubspacePoint& E, int rank, double lo, double hi,
                         Rng& rng) {
  const int d = E.dim_ambient();
  const double t = rng.next_uniform(lo, hi);
  const Matrix base = E.frame() * random_orthonormal_frame(E.dim_sub(), rank, rng);
  const SubspacePoint perp_space = orthogonal_complement(E);
  const Matrix perp =
      perp_space.frame() * random_orthonormal_frame(perp_space.dim_sub(), rank, rng);
  return std::sqrt(1.0 - t * t) * base + t * perp;
}

void fill_defaults_if_empty(MargulisParams& p, int rank) {
  if (p.gamma.empty() && p.beta.empty() && p.omega.empty()) {
    MargulisParams d = MargulisParams::defaults(rank);
    p.gamma = d.gamma;
    p.beta = d.beta;
    p.omega = d.omega;
  }
}

}  // namespace

MargulisParams MargulisParams::defaults(int rank) {
  if (rank < 1) throw std::invalid_argument("rank must be at least 1");
  MargulisParams p;
  p.gamma.assign(std::size_t(rank), 0.1);
  p.beta.assign(std::size_t(rank - 1), 0.1);
  p.omega.assign(std::size_t(rank), 1e-3);
  return p;
}

double vertical_angle_1(const ProjectivePoint& x, const ProjectivePoint& xp,
                        const SubspacePoint& E) {
  if (x.dim() != xp.dim() || x.dim() != E.dim_ambient()) {
    throw std::invalid_argument("dimension mismatch");
  }
  if (projective_distance(x, xp) <= kGeneralPositionTol) {
    throw std::invalid_argument("degenerate pair: the two directions coincide");
  }
  return subspace_distance(
      subspace_sum(SubspacePoint::line(x.direction()),
                   SubspacePoint::line(xp.direction()), 1e-12),
      E);
}

double vertical_projection_1(const ProjectivePoint& x, const ProjectivePoint& xp,
                             const SubspacePoint& E, double gamma) {
  return vertical_angle_1(x, xp, E) * std::pow(projective_distance(x, xp), gamma);
}

double vertical_angle_r(const FlagPoint& F, const FlagPoint& Fp,
                        const SubspacePoint& E) {
  check_pair(F, Fp, E);
  return raw_vertical_angle(F.top(), Fp.level(0), E, true);
}

double vertical_projection_r(const FlagPoint& F, const FlagPoint& Fp,
                             const SubspacePoint& E, double gamma_r) {
  check_pair(F, Fp, E);
  const double va = raw_vertical_angle(F.top(), Fp.level(0), E, true);
  return va * std::pow(transversality_factor(F, Fp.level(0), F.rank() - 1), gamma_r);
}

double psi_r(const FlagPoint& F, const FlagPoint& Fp, const SubspacePoint& E,
             const MargulisParams& params) {
  check_pair(F, Fp, E);
  check_params(params, F.rank());
  return recursive_product(pair_levels(F, Fp, E, true), params, 0.0, 0);
}

StabilizedValues stabilized_psi(const FlagPoint& F, const FlagPoint& Fp,
                                const SubspacePoint& E, const MargulisParams& params,
                                int n_steps) {
  check_pair(F, Fp, E);
  check_params(params, F.rank());
  if (n_steps < 0) throw std::invalid_argument("n_steps must be >= 0");
  StabilizedValues out;
  recursive_product(pair_levels(F, Fp, E, false), params, 1.0, n_steps, &out);
  return out;
}

double psi_hat(const FlagPoint& F, const FlagPoint& Fp, const SubspacePoint& E,
               const MargulisParams& params, int n_steps) {
  return std::max(stabilized_psi(F, Fp, E, params, n_steps).psi,
                  stabilized_psi(Fp, F, E, params, n_steps).psi);
}

double cutoff_Psi(const FlagPoint& F, const FlagPoint& Fp, const SubspacePoint& E,
                  const MargulisParams& params, int n_steps) {
  check_pair(F, Fp, E);
  check_params(params, F.rank());
  const bool active = subspace_distance(F.top(), E) <= params.eps_cut ||
                      subspace_distance(Fp.top(), E) <= params.eps_cut;
  if (!active) return std::log(params.Omega);
  return std::log(params.Omega + 1.0 / psi_hat(F, Fp, E, params, n_steps));
}

DriftReport drift_probe(const AtomicMatrixMeasure& nu, const SubspacePoint& E,
                        MargulisParams params, int rank, double band_lo,
                        double band_hi, int n, int n_samples, std::uint64_t seed,
                        int workers) {
  if (nu.dim() != E.dim_ambient()) {
    throw std::invalid_argument("measure and subspace dimensions disagree");
  }
  if (rank < 1 || rank > std::min(E.dim_sub(), nu.dim() - E.dim_sub())) {
    throw std::invalid_argument(
        "rank must fit inside both the subspace and its complement");
  }
  if (!(0.0 < band_lo && band_lo <= band_hi && band_hi < 1.0)) {
    throw std::invalid_argument("need 0 < band_lo <= band_hi < 1");
  }
  if (n < 1 || n_samples < 1) {
    throw std::invalid_argument("n and n_samples must be positive");
  }
  fill_defaults_if_empty(params, rank);
  const SupportConstants sc = support_constants(nu);
  if (params.B <= 0.0) params.B = sc.B;
  check_params(params, rank);

  double per_step = 0.0;
  for (int k = 0; k < rank; ++k) per_step += params.B + params.gamma[std::size_t(k)] * sc.A;
  const double c_bound = per_step * double(n);

  const std::vector<double>& weights = nu.weights();
  std::vector<double> inc(std::size_t(n_samples), 0.0);
  parallel_trials(n_samples, workers, [&](int t) {
    Rng pair_rng(seed ^ kPairSalt, std::uint64_t(t));
    FlagPoint F = FlagPoint::from_frame(
        tilted_frame_near(E, rank, band_lo, band_hi, pair_rng));
    FlagPoint Fp = F;
    for (int attempt = 0; attempt < 64; ++attempt) {
      Fp = FlagPoint::from_frame(
          tilted_frame_near(E, rank, band_lo, band_hi, pair_rng));
      if (subspace_distance(Fp.level(0), F.top()) > kGeneralPositionTol &&
          subspace_distance(F.level(0), Fp.top()) > kGeneralPositionTol) {
        break;
      }
    }
    const double before = cutoff_Psi(F, Fp, E, params, 0);
    Rng word_rng(seed, std::uint64_t(t));
    for (int s = 0; s < n; ++s) {
      const Matrix& A = nu.atom(word_rng.next_index(weights)).A;
      F = F.apply(A);
      Fp = Fp.apply(A);
    }
    inc[std::size_t(t)] = cutoff_Psi(F, Fp, E, params, n) - before;
  });
  return summarize_increments(inc, n, c_bound, seed);
}

DriftReport repeller_probe(const AtomicMatrixMeasure& nu, const SubspacePoint& E,
                           MargulisParams params, double band_lo, double band_hi,
                           int n, int n_samples, std::uint64_t seed, int workers) {
  if (nu.dim() != E.dim_ambient() || E.dim_sub() >= nu.dim()) {
    throw std::invalid_argument("need a proper subspace of the measure's space");
  }
  if (!(0.0 < band_lo && band_lo <= band_hi && band_hi < 1.0)) {
    throw std::invalid_argument("need 0 < band_lo <= band_hi < 1");
  }
  if (n < 1 || n_samples < 1) {
    throw std::invalid_argument("n and n_samples must be positive");
  }
  fill_defaults_if_empty(params, 1);
  const SupportConstants sc = support_constants(nu);
  if (params.B <= 0.0) params.B = sc.B;
  check_params(params, 1);
  const double c_bound = (params.B + params.gamma[0] * sc.A) * double(n);

  const SubspacePoint perp = orthogonal_complement(E);
  auto observable = [&](const ProjectivePoint& x, int steps) {
    const double dist = point_to_subspace_distance(x, E);
    if (dist > params.eps_cut) return std::log(params.Omega);
    const double floored = std::max(dist, params.omega[0] * std::exp(-params.B * steps));
    return std::log(params.Omega + 1.0 / floored);
  };

  const std::vector<double>& weights = nu.weights();
  std::vector<double> inc(std::size_t(n_samples), 0.0);
  parallel_trials(n_samples, workers, [&](int t) {
    Rng point_rng(seed ^ kPairSalt, std::uint64_t(t));
    const double dist = point_rng.next_uniform(band_lo, band_hi);
    Vector e = E.frame() * random_unit_vector(E.dim_sub(), point_rng);
    Vector u = perp.frame() * random_unit_vector(perp.dim_sub(), point_rng);
    ProjectivePoint x(std::sqrt(1.0 - dist * dist) * e + dist * u);
    const double before = observable(x, 0);
    Rng word_rng(seed, std::uint64_t(t));
    for (int s = 0; s < n; ++s) {
      x = x.apply(nu.atom(word_rng.next_index(weights)).A);
    }
    inc[std::size_t(t)] = observable(x, n) - before;
  });
  return summarize_increments(inc, n, c_bound, seed);
}

FlagPoint sample_homogeneous_flag(const Matrix& top_frame, bool restricted,
                                  const SubspacePoint& E, Rng& rng,
                                  double* acceptance_rate) {
  const SubspacePoint top(top_frame);
  const int r = top.dim_sub();
  if (restricted && top.dim_ambient() != E.dim_ambient()) {
    throw std::invalid_argument("frame and subspace ambient dimensions disagree");
  }
  const double threshold = restricted ? 0.5 * subspace_distance(top, E) : 0.0;

  const int max_tries = 10000;
  for (int tries = 1; tries <= max_tries; ++tries) {
    Matrix g(r, r);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) g(i, j) = rng.next_gaussian();
    const Matrix rotated = top_frame * thin_q(g);
    if (restricted) {
      const double d0 =
          point_to_subspace_distance(ProjectivePoint(rotated.col(0)), E);
      if (d0 < threshold) continue;
    }
    if (acceptance_rate) *acceptance_rate = 1.0 / double(tries);
    // Inner levels come from the rotated frame; the top level keeps the
    // caller's frame bit for bit.
    std::vector<SubspacePoint> levels;
    levels.reserve(std::size_t(r));
    for (int i = 1; i < r; ++i) levels.emplace_back(Matrix(rotated.leftCols(i)));
    levels.push_back(top);
    return FlagPoint(std::move(levels));
  }
  throw std::runtime_error(
      "restricted flag sampling: acceptance rate fell below 1e-4");
}

std::pair<FlagPoint, FlagPoint> spreading_out(const FlagPoint& F,
                                              const FlagPoint& Fp,
                                              const SubspacePoint& E, double tau,
                                              Rng& rng) {
  check_pair(F, Fp, E);
  if (!(tau >= 0.0 && tau < 1.0)) {
    throw std::invalid_argument("tau must lie in [0, 1)");
  }
  const Matrix top_f = F.top().frame();
  const Matrix top_fp = Fp.top().frame();
  const int max_tries = 10000;
  for (int tries = 0; tries < max_tries; ++tries) {
    FlagPoint G = sample_homogeneous_flag(top_f, true, E, rng);
    FlagPoint Gp = sample_homogeneous_flag(top_fp, true, E, rng);
    if (subspace_distance(G.level(0), Gp.level(0)) >= tau &&
        subspace_distance(Gp.level(0), G.top()) >= tau &&
        subspace_distance(G.level(0), Gp.top()) >= tau) {
      return {std::move(G), std::move(Gp)};
    }
  }
  throw std::runtime_error(
      "spreading out: could not reach the requested separation");
}

}  // namespace lyap
