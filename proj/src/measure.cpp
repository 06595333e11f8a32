#include "lyap/measure.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <stdexcept>

#include "lyap/transport.hpp"

namespace lyap {

namespace {

double sup_norm_diff(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

AtomicMatrixMeasure::AtomicMatrixMeasure(std::vector<Atom> atoms, double invertibility_tol)
    : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw std::invalid_argument("measure: no atoms");
  const int d = int(atoms_[0].A.rows());
  if (d < 2) throw std::invalid_argument("measure: dimension must be >= 2");
  double total = 0.0;
  for (const auto& a : atoms_) {
    if (a.A.rows() != d || a.A.cols() != d)
      throw std::invalid_argument("measure: mixed matrix dimensions");
    if (!(a.p > 0.0)) throw std::invalid_argument("measure: nonpositive weight");
    if (!a.A.allFinite()) throw std::invalid_argument("measure: non-finite matrix entry");
    check_invertible(a.A, invertibility_tol);
    total += a.p;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("measure: weights sum to " + std::to_string(total));
  weights_.reserve(atoms_.size());
  for (const auto& a : atoms_) weights_.push_back(a.p);
}

double AtomicMatrixMeasure::mean_log_abs_det() const {
  double s = 0.0;
  for (const auto& a : atoms_) s += a.p * std::log(std::abs(a.A.determinant()));
  return s;
}

AtomicMatrixMeasure AtomicMatrixMeasure::scaled(double c) const {
  if (!(c > 0.0)) throw std::invalid_argument("scaled: need c > 0");
  std::vector<Atom> out = atoms_;
  for (auto& a : out) a.A *= c;
  return AtomicMatrixMeasure(std::move(out));
}

std::variant<AtomicMatrixMeasure, MatrixSampler> convolution_power(
    const AtomicMatrixMeasure& nu, int n, std::uint64_t seed, int cap) {
  if (n < 1) throw std::invalid_argument("convolution_power: need n >= 1");
  const int m = nu.size();
  double words = 1.0;
  for (int k = 0; k < n && words <= double(cap); ++k) words *= m;

  if (words <= double(cap)) {
    // Exact enumeration: words g_{n-1}...g_0 in odometer order.
    std::vector<Atom> out;
    out.reserve(std::size_t(words));
    std::vector<int> idx(std::size_t(n), 0);
    while (true) {
      Matrix prod = nu.atom(idx[0]).A;  // idx[k] = choice of g_k
      double w = nu.atom(idx[0]).p;
      for (int k = 1; k < n; ++k) {
        prod = nu.atom(idx[std::size_t(k)]).A * prod;
        w *= nu.atom(idx[std::size_t(k)]).p;
      }
      out.push_back({w, prod});
      int k = 0;
      while (k < n && ++idx[std::size_t(k)] == m) idx[std::size_t(k++)] = 0;
      if (k == n) break;
    }
    return AtomicMatrixMeasure(std::move(out));
  }

  double bound = 0.0;
  for (int i = 0; i < m; ++i) {
    const Matrix& A = nu.atom(i).A;
    bound = std::max(bound, std::max(operator_norm(A), operator_norm(A.inverse())));
  }
  MatrixSampler s;
  s.dim = nu.dim();
  s.support_norm_bound = std::pow(bound, double(n));
  s.draw = [nu, n, seed](std::uint64_t index) {
    Rng rng(seed, index);
    Matrix prod = nu.atom(nu.sample(rng)).A;
    for (int k = 1; k < n; ++k) prod = nu.atom(nu.sample(rng)).A * prod;
    return prod;
  };
  return s;
}

MatrixSampler smooth(const AtomicMatrixMeasure& nu, double radius, std::uint64_t seed) {
  if (!(radius > 0.0)) throw std::invalid_argument("smooth: need radius > 0");
  const int d = nu.dim();
  double max_norm = 0.0;
  for (int i = 0; i < nu.size(); ++i)
    max_norm = std::max(max_norm, operator_norm(nu.atom(i).A));

  MatrixSampler s;
  s.dim = d;
  s.support_norm_bound = max_norm * std::exp(radius);
  s.draw = [nu, radius, seed, d](std::uint64_t index) {
    Rng rng(seed, index);
    const int i = nu.sample(rng);
    Matrix M(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) M(r, c) = rng.next_uniform(-1.0, 1.0);
    const double nrm = operator_norm(M);
    if (nrm > 0.0) M *= (radius * rng.next_double() / nrm);
    const Matrix h = M.exp();
    Matrix out = nu.atom(i).A * h;
    check_invertible(out);
    return out;
  };
  return s;
}

TopologyDistance topology_distance(const AtomicMatrixMeasure& nu1,
                                   const AtomicMatrixMeasure& nu2) {
  if (nu1.dim() != nu2.dim())
    throw std::invalid_argument("topology_distance: dimension mismatch");
  const int n = nu1.size(), m = nu2.size();

  std::vector<std::vector<double>> cost(std::size_t(n),
                                        std::vector<double>(std::size_t(m), 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      cost[std::size_t(i)][std::size_t(j)] = sup_norm_diff(nu1.atom(i).A, nu2.atom(j).A);

  TopologyDistance out;
  out.weak_star_proxy = wasserstein1(nu1.weights(), nu2.weights(), cost);

  double h12 = 0.0, h21 = 0.0;
  for (int i = 0; i < n; ++i) {
    double best = cost[std::size_t(i)][0];
    for (int j = 1; j < m; ++j) best = std::min(best, cost[std::size_t(i)][std::size_t(j)]);
    h12 = std::max(h12, best);
  }
  for (int j = 0; j < m; ++j) {
    double best = cost[0][std::size_t(j)];
    for (int i = 1; i < n; ++i) best = std::min(best, cost[std::size_t(i)][std::size_t(j)]);
    h21 = std::max(h21, best);
  }
  out.support_hausdorff = std::max(h12, h21);
  return out;
}

SupportConstants support_constants(const AtomicMatrixMeasure& nu, double margin,
                                   int n_pairs, std::uint64_t seed) {
  SupportConstants out;
  const int d = nu.dim();

  double b = 0.0;
  for (int i = 0; i < nu.size(); ++i) {
    const Matrix& A = nu.atom(i).A;
    for (double scale : {1.0 - margin, 1.0, 1.0 + margin}) {
      if (!(scale > 0.0)) continue;
      const Matrix g = scale * A;
      b = std::max(b, std::log(operator_norm(g)) + std::log(operator_norm(g.inverse())));
    }
  }
  out.B = b + 2.0;

  Rng rng(seed, 0);
  double a = 0.0;
  for (int t = 0; t < n_pairs; ++t) {
    const int r = 1 + int(rng.next_u64() % std::uint64_t(d - 1));
    const SubspacePoint U(random_orthonormal_frame(d, r, rng));
    const SubspacePoint V(random_orthonormal_frame(d, r, rng));
    const double base = subspace_distance(U, V);
    if (base < 1e-12 || base > 1.0 - 1e-12) continue;
    for (int i = 0; i < nu.size(); ++i) {
      const Matrix& A = nu.atom(i).A;
      const double moved = subspace_distance(U.apply(A), V.apply(A));
      if (moved < 1e-14) continue;
      a = std::max(a, std::abs(std::log(moved) - std::log(base)));
    }
  }
  out.A = a;
  return out;
}

}  // namespace lyap
