#include "lyap/markov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lyap {

namespace {

void check_probability_vector(const Vector& eta, const char* name) {
  if (eta.size() == 0) {
    throw std::invalid_argument(std::string(name) + " is empty");
  }
  double sum = 0.0;
  for (int i = 0; i < eta.size(); ++i) {
    if (!std::isfinite(eta(i)) || eta(i) < 0.0) {
      std::ostringstream os;
      os << name << "(" << i << ") = " << eta(i) << " is not a valid mass";
      throw std::invalid_argument(os.str());
    }
    sum += eta(i);
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    std::ostringstream os;
    os << name << " sums to " << sum << ", expected 1 within 1e-12";
    throw std::invalid_argument(os.str());
  }
}

std::vector<int> sorted_unique_subset(const std::vector<int>& raw, int n,
                                      const char* name) {
  std::vector<int> out = raw;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.size() != raw.size()) {
    throw std::invalid_argument(std::string(name) + " contains repeated indices");
  }
  for (int i : out) {
    if (i < 0 || i >= n) {
      std::ostringstream os;
      os << name << " contains index " << i << " outside [0, " << n << ")";
      throw std::invalid_argument(os.str());
    }
  }
  return out;
}

std::vector<int> complement_of(const std::vector<int>& sorted_subset, int n) {
  std::vector<int> out;
  out.reserve(size_t(n) - sorted_subset.size());
  size_t k = 0;
  for (int i = 0; i < n; ++i) {
    if (k < sorted_subset.size() && sorted_subset[k] == i) {
      ++k;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

double mass_on(const Vector& eta, const std::vector<int>& idx) {
  double s = 0.0;
  for (int i : idx) s += eta(i);
  return s;
}

bool sorted_sets_intersect(const std::vector<int>& a, const std::vector<int>& b) {
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return true;
    if (a[i] < b[j]) ++i; else ++j;
  }
  return false;
}

bool sorted_set_contains(const std::vector<int>& big, const std::vector<int>& small) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

double rectangle_mass(const Matrix& plan, const std::vector<int>& rows,
                      const std::vector<int>& cols) {
  double s = 0.0;
  for (int x : rows)
    for (int y : cols) s += plan(x, y);
  return s;
}

void clamp_tiny_negatives(Matrix& m) {
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (m(i, j) < 0.0) {
        if (m(i, j) < -1e-12) {
          std::ostringstream os;
          os << "coupling entry (" << i << ", " << j << ") = " << m(i, j)
             << " is negative beyond rounding";
          throw std::logic_error(os.str());
        }
        m(i, j) = 0.0;
      }
    }
  }
}

}  // namespace

FiniteMarkovKernel::FiniteMarkovKernel(Matrix rows) : rows_(std::move(rows)) {
  if (rows_.rows() == 0 || rows_.rows() != rows_.cols()) {
    throw std::invalid_argument("transition matrix must be square and non-empty");
  }
  for (int i = 0; i < rows_.rows(); ++i) {
    double sum = 0.0;
    for (int j = 0; j < rows_.cols(); ++j) {
      double v = rows_(i, j);
      if (!std::isfinite(v) || v < -1e-15) {
        std::ostringstream os;
        os << "transition entry (" << i << ", " << j << ") = " << v
           << " is not a valid probability";
        throw std::invalid_argument(os.str());
      }
      if (v < 0.0) rows_(i, j) = 0.0;
      sum += rows_(i, j);
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      std::ostringstream os;
      os << "row " << i << " sums to " << sum << ", expected 1 within 1e-12";
      throw std::invalid_argument(os.str());
    }
  }
}

Vector FiniteMarkovKernel::stationary() const {
  const int n = n_states();
  // Solve the over-determined system [T^T - I; 1^T] pi = [0; 1] in the least
  // squares sense; for a genuine stochastic matrix the residual of the
  // fixed-point block is zero for some probability vector.
  Matrix system(n + 1, n);
  system.topRows(n) = rows_.transpose() - Matrix::Identity(n, n);
  system.bottomRows(1).setOnes();
  Vector rhs = Vector::Zero(n + 1);
  rhs(n) = 1.0;
  Vector pi = system.colPivHouseholderQr().solve(rhs);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (pi(i) < 0.0) {
      if (pi(i) < -1e-9) {
        throw std::runtime_error(
            "stationary solve produced a significantly negative coordinate; "
            "the chain may be reducible");
      }
      pi(i) = 0.0;
    }
    sum += pi(i);
  }
  if (sum <= 0.0) {
    throw std::runtime_error("stationary solve produced the zero vector");
  }
  return pi / sum;
}

LocalizedKernel localize_kernel(const FiniteMarkovKernel& T, const Vector& eta,
                                const std::vector<int>& U_raw) {
  const int n = T.n_states();
  if (eta.size() != n) {
    throw std::invalid_argument("stationary vector size does not match the kernel");
  }
  check_probability_vector(eta, "eta");
  Vector image = T.rows().transpose() * eta;
  double res = (image - eta).cwiseAbs().sum();
  if (res > 1e-10) {
    std::ostringstream os;
    os << "eta is not stationary: |eta T - eta|_1 = " << res;
    throw std::invalid_argument(os.str());
  }
  std::vector<int> U = sorted_unique_subset(U_raw, n, "U");
  if (U.empty()) {
    throw std::invalid_argument("U must be non-empty");
  }
  std::vector<int> Uc = complement_of(U, n);
  const int m = int(U.size());

  double eta_mass_U = mass_on(eta, U);
  if (eta_mass_U <= 0.0) {
    throw std::invalid_argument("eta gives U zero mass; localization is undefined");
  }

  // Escape mass of each inside state and the exchange flux both ways.
  Vector escape(m);
  double J_out = 0.0;
  for (int a = 0; a < m; ++a) {
    double e = 0.0;
    for (int z : Uc) e += T.rows()(U[a], z);
    escape(a) = e;
    J_out += eta(U[a]) * e;
  }
  double J_in = 0.0;
  Vector reentry = Vector::Zero(m);  // sum_{z notin U} eta(z) sigma_z(.)|_U
  for (int z : Uc) {
    double into_U = 0.0;
    for (int b = 0; b < m; ++b) {
      double v = eta(z) * T.rows()(z, U[b]);
      reentry(b) += v;
      into_U += T.rows()(z, U[b]);
    }
    J_in += eta(z) * into_U;
  }

  Matrix local(m, m);
  if (J_out <= 0.0) {
    // Nothing escapes: the restriction is already a Markov kernel on U.
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) local(a, b) = T.rows()(U[a], U[b]);
  } else {
    Vector rho = reentry / J_out;  // the eta-averaged re-entry distribution
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        local(a, b) = T.rows()(U[a], U[b]) + escape(a) * rho(b);
  }

  LocalizedKernel out{FiniteMarkovKernel(local), U, Vector(m), J_out, J_in};
  for (int a = 0; a < m; ++a) out.eta_U(a) = eta(U[a]) / eta_mass_U;
  return out;
}

Matrix coupling_avoiding(const Vector& eta, const Vector& eta2,
                         const std::vector<int>& A_raw,
                         const std::vector<int>& A2_raw) {
  check_probability_vector(eta, "eta");
  check_probability_vector(eta2, "eta2");
  const int n = int(eta.size());
  const int m = int(eta2.size());
  std::vector<int> A = sorted_unique_subset(A_raw, n, "A");
  std::vector<int> A2 = sorted_unique_subset(A2_raw, m, "A2");
  std::vector<int> B = complement_of(A, n);
  std::vector<int> B2 = complement_of(A2, m);

  double etaA = mass_on(eta, A), etaB = mass_on(eta, B);
  double eta2A = mass_on(eta2, A2), eta2B = mass_on(eta2, B2);
  if (!(etaA < etaB)) {
    std::ostringstream os;
    os << "need eta(A) < eta(A^c), got " << etaA << " >= " << etaB;
    throw std::invalid_argument(os.str());
  }
  if (!(eta2A < eta2B)) {
    std::ostringstream os;
    os << "need eta2(A2) < eta2(A2^c), got " << eta2A << " >= " << eta2B;
    throw std::invalid_argument(os.str());
  }

  // Grouped so the construction is exactly swap-covariant in floating point:
  // coef * (eta(x) * eta2(y)) and 1 - (etaA + eta2A) only combine values in
  // commutative (order-free) operations, so swapping the two marginals yields
  // the bitwise transpose.
  const double alpha = 1.0 / eta2B;
  const double beta = 1.0 / etaB;
  const double gamma = (1.0 - (etaA + eta2A)) / (etaB * eta2B);

  Matrix plan = Matrix::Zero(n, m);
  for (int x : A)
    for (int y : B2) plan(x, y) = alpha * (eta(x) * eta2(y));
  for (int x : B) {
    for (int y : A2) plan(x, y) = beta * (eta(x) * eta2(y));
    for (int y : B2) plan(x, y) = gamma * (eta(x) * eta2(y));
  }
  clamp_tiny_negatives(plan);
  return plan;
}

Matrix coupling_avoiding_many(const Vector& eta, const Vector& eta2,
                              const std::vector<AvoidancePair>& pairs) {
  check_probability_vector(eta, "eta");
  check_probability_vector(eta2, "eta2");
  const int n = int(eta.size());
  const int m = int(eta2.size());

  struct Sets {
    std::vector<int> A, C, Cc, A2, C2, C2c;
  };
  std::vector<Sets> S(pairs.size());
  for (size_t j = 0; j < pairs.size(); ++j) {
    S[j].A = sorted_unique_subset(pairs[j].A, n, "A");
    S[j].C = sorted_unique_subset(pairs[j].C, n, "C");
    S[j].A2 = sorted_unique_subset(pairs[j].A2, m, "A2");
    S[j].C2 = sorted_unique_subset(pairs[j].C2, m, "C2");
    if (!sorted_set_contains(S[j].C, S[j].A)) {
      std::ostringstream os;
      os << "pair " << j << ": A is not contained in C";
      throw std::invalid_argument(os.str());
    }
    if (!sorted_set_contains(S[j].C2, S[j].A2)) {
      std::ostringstream os;
      os << "pair " << j << ": A2 is not contained in C2";
      throw std::invalid_argument(os.str());
    }
    S[j].Cc = complement_of(S[j].C, n);
    S[j].C2c = complement_of(S[j].C2, m);
  }

  // Cross-compatibility: a later correction term, supported on
  // A_j x (C2_j)^c and (C_j)^c x A2_j, must never leak back into an earlier
  // or later forbidden rectangle A_i x A2_i.
  for (size_t i = 0; i < pairs.size(); ++i) {
    for (size_t j = 0; j < pairs.size(); ++j) {
      if (i == j) continue;
      if (sorted_sets_intersect(S[i].A, S[j].A) &&
          !sorted_set_contains(S[j].C2, S[i].A2)) {
        std::ostringstream os;
        os << "pairs (" << i << ", " << j << "): A_" << i << " meets A_" << j
           << " but A2_" << i << " is not contained in C2_" << j;
        throw std::invalid_argument(os.str());
      }
      if (sorted_sets_intersect(S[i].A2, S[j].A2) &&
          !sorted_set_contains(S[j].C, S[i].A)) {
        std::ostringstream os;
        os << "pairs (" << i << ", " << j << "): A2_" << i << " meets A2_" << j
           << " but A_" << i << " is not contained in C_" << j;
        throw std::invalid_argument(os.str());
      }
    }
  }

  Matrix plan = eta * eta2.transpose();  // start from the product coupling
  for (size_t j = 0; j < pairs.size(); ++j) {
    const double bad = rectangle_mass(plan, S[j].A, S[j].A2);
    if (bad <= 0.0) continue;  // nothing to remove
    const double reservoir = rectangle_mass(plan, S[j].Cc, S[j].C2c);
    if (!(bad < reservoir)) {
      std::ostringstream os;
      os << "pair " << j << ": removable mass " << bad
         << " is not strictly below the reservoir mass " << reservoir
         << " outside C x C2";
      throw std::invalid_argument(os.str());
    }
    const double theta = bad / reservoir;

    // Row/column marginals of the two removed pieces.
    Vector r1_row = Vector::Zero(n), r2_row = Vector::Zero(n);
    Vector r1_col = Vector::Zero(m), r2_col = Vector::Zero(m);
    for (int x : S[j].A)
      for (int y : S[j].A2) {
        r1_row(x) += plan(x, y);
        r1_col(y) += plan(x, y);
      }
    for (int x : S[j].Cc)
      for (int y : S[j].C2c) {
        r2_row(x) += theta * plan(x, y);
        r2_col(y) += theta * plan(x, y);
      }

    // Remove the forbidden rectangle and the scaled reservoir copy.
    for (int x : S[j].A)
      for (int y : S[j].A2) plan(x, y) = 0.0;
    for (int x : S[j].Cc)
      for (int y : S[j].C2c) plan(x, y) *= (1.0 - theta);

    // Re-inject two product corrections carrying the same marginals:
    // rows of the rectangle spread over columns outside C2, and columns of
    // the rectangle spread over rows outside C.
    for (int x : S[j].A)
      for (int y : S[j].C2c) plan(x, y) += r1_row(x) * r2_col(y) / bad;
    for (int x : S[j].Cc)
      for (int y : S[j].A2) plan(x, y) += r2_row(x) * r1_col(y) / bad;
  }
  clamp_tiny_negatives(plan);
  return plan;
}

MargulisBoundReport margulis_mass_bound_check(const FiniteMarkovKernel& T,
                                              const Vector& Psi,
                                              const std::vector<int>& A_raw,
                                              const std::vector<int>& B_raw,
                                              const Vector& zeta) {
  const int n = T.n_states();
  if (Psi.size() != n || zeta.size() != n) {
    throw std::invalid_argument("Psi and zeta must match the kernel size");
  }
  std::vector<int> A = sorted_unique_subset(A_raw, n, "A");
  std::vector<int> B = sorted_unique_subset(B_raw, n, "B");
  if (A.empty()) {
    throw std::invalid_argument("A must be non-empty");
  }
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(zeta(i)) || zeta(i) < 0.0) {
      throw std::invalid_argument("zeta must be a finite nonnegative measure");
    }
  }

  Vector TPsi = T.rows() * Psi;

  MargulisBoundReport rep;
  rep.kappa_A = std::numeric_limits<double>::infinity();
  for (int x : A) rep.kappa_A = std::min(rep.kappa_A, Psi(x) - TPsi(x));
  rep.kappa_B = 0.0;
  for (int x : B) rep.kappa_B = std::max(rep.kappa_B, TPsi(x) - Psi(x));
  rep.hypotheses_hold = rep.kappa_A > 0.0;

  rep.zeta_X = zeta.sum();
  rep.zeta_B = mass_on(zeta, B);
  Vector image = T.rows().transpose() * zeta;
  rep.stationarity_residual =
      rep.zeta_X > 0.0 ? (image - zeta).cwiseAbs().sum() / rep.zeta_X
                       : std::numeric_limits<double>::infinity();

  rep.bound = rep.hypotheses_hold
                  ? rep.kappa_A / (rep.kappa_A + rep.kappa_B) * rep.zeta_X
                  : 0.0;
  rep.asserted = rep.hypotheses_hold && rep.stationarity_residual <= 1e-10;
  rep.holds = rep.asserted && rep.zeta_B >= rep.bound - 1e-12;
  return rep;
}

double additive_drift_from_multiplicative(double c, double b, double alpha) {
  if (!(c >= 0.0) || !(b >= 0.0) || !(alpha > 0.0)) {
    throw std::invalid_argument(
        "need c >= 0, b >= 0 and alpha > 0 to convert the drift inequality");
  }
  double arg = c + b / alpha;
  if (arg <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(arg);
}

CoreClass core_border(const AtomicMatrixMeasure& nu, const SubspacePoint& E, double eps,
                      const ProjectivePoint& x) {
  if (nu.dim() != E.dim_ambient() || nu.dim() != x.dim()) {
    throw std::invalid_argument("measure, subspace and point dimensions disagree");
  }
  if (!(eps > 0.0) || !(eps <= 1.0)) {
    throw std::invalid_argument("eps must lie in (0, 1]");
  }
  const double outer_radius = eps;          // X_0
  const double inner_radius = 0.98 * eps;   // X_2, two shrink steps of eps/100

  auto in_inner = [&](const ProjectivePoint& p) {
    return point_to_subspace_distance(p, E) <= inner_radius;
  };
  auto is_core = [&](const ProjectivePoint& p) {
    if (!in_inner(p)) return false;
    for (const auto& atom : nu.atoms()) {
      if (!in_inner(ProjectivePoint(atom.A * p.direction()))) return false;
    }
    return true;
  };

  if (is_core(x)) {
    bool sharp = true;
    for (const auto& atom : nu.atoms()) {
      Vector pre = atom.A.partialPivLu().solve(x.direction());
      if (!is_core(ProjectivePoint(pre))) {
        sharp = false;
        break;
      }
    }
    return sharp ? CoreClass::core_sharp : CoreClass::core;
  }
  if (point_to_subspace_distance(x, E) <= outer_radius) return CoreClass::border;
  return CoreClass::outside;
}

std::string to_string(CoreClass c) {
  switch (c) {
    case CoreClass::core_sharp: return "core_sharp";
    case CoreClass::core: return "core";
    case CoreClass::border: return "border";
    case CoreClass::outside: return "outside";
  }
  return "unknown";
}

}  // namespace lyap
