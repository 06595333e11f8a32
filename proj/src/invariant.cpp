#include "lyap/invariant.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lyap/spectrum.hpp"

namespace lyap {

namespace {

double invariance_residual(const Matrix& g, const Matrix& qE) {
  const Matrix image = g * qE;
  const Matrix leak = image - qE * (qE.transpose() * image);
  return operator_norm(leak);
}

// Eigen-blocks of a real matrix: one spanning frame per real eigenvalue and
// one two-column frame per complex-conjugate pair.
std::vector<Matrix> eigen_blocks(const Matrix& m) {
  Eigen::EigenSolver<Matrix> es(m);
  const auto& vals = es.eigenvalues();
  const auto& vecs = es.eigenvectors();
  std::vector<Matrix> blocks;
  std::vector<bool> used(std::size_t(m.rows()), false);
  for (int i = 0; i < m.rows(); ++i) {
    if (used[std::size_t(i)]) continue;
    used[std::size_t(i)] = true;
    if (std::abs(vals(i).imag()) < 1e-10 * (1.0 + std::abs(vals(i).real()))) {
      Matrix b(m.rows(), 1);
      b.col(0) = vecs.col(i).real();
      if (b.col(0).norm() < 1e-12) b.col(0) = vecs.col(i).imag();
      blocks.push_back(std::move(b));
    } else {
      // Mark the conjugate partner as consumed.
      for (int j = i + 1; j < m.rows(); ++j) {
        if (used[std::size_t(j)]) continue;
        if (std::abs(vals(j).real() - vals(i).real()) < 1e-9 * (1.0 + std::abs(vals(i))) &&
            std::abs(vals(j).imag() + vals(i).imag()) < 1e-9 * (1.0 + std::abs(vals(i)))) {
          used[std::size_t(j)] = true;
          break;
        }
      }
      Matrix b(m.rows(), 2);
      b.col(0) = vecs.col(i).real();
      b.col(1) = vecs.col(i).imag();
      blocks.push_back(std::move(b));
    }
  }
  return blocks;
}

}  // namespace

BlockDecomposition block_decompose(const Matrix& g, const SubspacePoint& E,
                                   double residual_tol) {
  const int d = E.dim_ambient();
  const int r = E.dim_sub();
  if (g.rows() != d || g.cols() != d)
    throw std::invalid_argument("block_decompose: dimension mismatch");
  if (r >= d) throw std::invalid_argument("block_decompose: E must be a proper subspace");
  const double gn = operator_norm(g);
  if (invariance_residual(g, E.frame()) > residual_tol * std::max(1.0, gn))
    throw std::invalid_argument("block_decompose: E is not invariant under g");

  BlockDecomposition out;
  out.basis = Matrix(d, d);
  out.basis.leftCols(r) = E.frame();
  out.basis.rightCols(d - r) = orthogonal_complement(E).frame();
  const Matrix adapted = out.basis.transpose() * g * out.basis;
  out.gE = adapted.topLeftCorner(r, r);
  out.h = adapted.topRightCorner(r, d - r);
  out.gPerp = adapted.bottomRightCorner(d - r, d - r);

  check_invertible(out.gE);
  check_invertible(out.gPerp);

  // Quotient identity: the complement-projection of g u equals gPerp applied
  // to the complement-projection of u.
  Rng rng(0xB10C0DECull, 0);
  const Matrix qPerp = out.basis.rightCols(d - r);
  for (int t = 0; t < 10; ++t) {
    Vector u(d);
    for (int i = 0; i < d; ++i) u(i) = rng.next_gaussian();
    const Vector lhs = qPerp.transpose() * (g * u);
    const Vector rhs = out.gPerp * (qPerp.transpose() * u);
    if ((lhs - rhs).norm() > 1e-9 * std::max(1.0, gn * u.norm()))
      throw std::runtime_error("block_decompose: quotient identity violated");
  }
  if (operator_norm(out.gPerp) > gn * (1.0 + 1e-12))
    throw std::runtime_error("block_decompose: quotient norm exceeds the full norm");
  return out;
}

AtomicMatrixMeasure restrict_measure(const AtomicMatrixMeasure& nu, const SubspacePoint& E) {
  if (E.dim_sub() < 2)
    throw std::invalid_argument("restrict_measure: need dim E >= 2 (lines are exact)");
  std::vector<Atom> atoms;
  for (int i = 0; i < nu.size(); ++i)
    atoms.push_back({nu.atom(i).p, block_decompose(nu.atom(i).A, E).gE});
  return AtomicMatrixMeasure(std::move(atoms));
}

AtomicMatrixMeasure quotient_measure(const AtomicMatrixMeasure& nu, const SubspacePoint& E) {
  if (E.dim_ambient() - E.dim_sub() < 2)
    throw std::invalid_argument("quotient_measure: need codim E >= 2 (lines are exact)");
  std::vector<Atom> atoms;
  for (int i = 0; i < nu.size(); ++i)
    atoms.push_back({nu.atom(i).p, block_decompose(nu.atom(i).A, E).gPerp});
  return AtomicMatrixMeasure(std::move(atoms));
}

std::vector<SubspacePoint> invariant_subspace_search(const AtomicMatrixMeasure& nu, int r,
                                                     double residual_tol,
                                                     std::uint64_t seed) {
  const int d = nu.dim();
  if (r < 1 || r >= d) throw std::invalid_argument("invariant_subspace_search: bad rank");
  if (d > 6) throw std::invalid_argument("invariant_subspace_search: d <= 6 only");

  std::vector<SubspacePoint> found;
  auto already_found = [&](const SubspacePoint& L) {
    for (const auto& f : found)
      if (subspace_distance(f, L) < 1e-6 && subspace_distance(L, f) < 1e-6) return true;
    return false;
  };
  auto verified = [&](const SubspacePoint& L) {
    for (int i = 0; i < nu.size(); ++i) {
      const Matrix& A = nu.atom(i).A;
      if (invariance_residual(A, L.frame()) > residual_tol * operator_norm(A)) return false;
    }
    return true;
  };

  for (int draw = 0; draw < 2; ++draw) {
    Rng rng(seed, std::uint64_t(draw));
    Matrix combo = Matrix::Zero(d, d);
    for (int i = 0; i < nu.size(); ++i) combo += rng.next_gaussian() * nu.atom(i).A;
    const auto blocks = eigen_blocks(combo);
    const int nb = int(blocks.size());

    // Every subset of eigen-blocks whose dimensions add to r spans a
    // candidate invariant subspace of the combination; cross-check each
    // against all atoms.
    for (unsigned mask = 1; mask < (1u << nb); ++mask) {
      int dim = 0;
      for (int b = 0; b < nb; ++b)
        if (mask & (1u << b)) dim += int(blocks[std::size_t(b)].cols());
      if (dim != r) continue;
      Matrix span(d, r);
      int col = 0;
      for (int b = 0; b < nb; ++b)
        if (mask & (1u << b)) {
          span.middleCols(col, blocks[std::size_t(b)].cols()) = blocks[std::size_t(b)];
          col += int(blocks[std::size_t(b)].cols());
        }
      SubspacePoint L = SubspacePoint::from_span(span, 1e-9);
      if (L.dim_sub() != r) continue;  // numerically dependent blocks
      if (!already_found(L) && verified(L)) found.push_back(std::move(L));
    }
  }
  return found;
}

double restricted_top_exponent_line(const AtomicMatrixMeasure& nu, const SubspacePoint& L) {
  if (L.dim_sub() != 1)
    throw std::invalid_argument("restricted_top_exponent_line: need a line");
  const Vector q = L.frame().col(0);
  double s = 0.0;
  for (int i = 0; i < nu.size(); ++i) s += nu.atom(i).p * std::log((nu.atom(i).A * q).norm());
  return s;
}

std::optional<EquatorReport> equator_detect(const AtomicMatrixMeasure& nu,
                                            const SpectrumBudget& budget,
                                            double residual_tol) {
  const int d = nu.dim();
  const auto full = top_exponent(nu, budget.n_steps, budget.n_trials, budget.seed,
                                 budget.workers);

  struct Candidate {
    SubspacePoint L;
    double lambda = 0.0;
    double half_width = 0.0;
    bool below = false;
  };
  std::vector<Candidate> candidates;
  for (int r = 1; r < d; ++r) {
    for (auto& L : invariant_subspace_search(nu, r, residual_tol, budget.seed ^ 0xE1ull)) {
      Candidate c{std::move(L), 0.0, 0.0, false};
      if (r == 1) {
        c.lambda = restricted_top_exponent_line(nu, c.L);
      } else {
        const auto rest = top_exponent(restrict_measure(nu, c.L), budget.n_steps,
                                       budget.n_trials, budget.seed ^ std::uint64_t(r),
                                       budget.workers);
        c.lambda = rest.estimate;
        c.half_width = rest.half_width;
      }
      c.below = c.lambda < full.estimate - (full.half_width + c.half_width);
      candidates.push_back(std::move(c));
    }
  }
  if (candidates.empty()) return std::nullopt;

  std::vector<const Candidate*> passing;
  for (const auto& c : candidates)
    if (c.below) passing.push_back(&c);
  if (passing.empty()) return std::nullopt;

  // Maximal passing candidates under inclusion.
  std::vector<const Candidate*> maximal;
  for (const auto* c : passing) {
    bool dominated = false;
    for (const auto* other : passing)
      if (other != c && other->L.contains(c->L, 1e-6) && other->L.dim_sub() > c->L.dim_sub())
        dominated = true;
    if (!dominated) maximal.push_back(c);
  }

  EquatorReport out{maximal.front()->L, maximal.front()->lambda,
                    maximal.front()->half_width, full.estimate, full.half_width,
                    {}, {}};
  for (std::size_t i = 1; i < maximal.size(); ++i)
    out.ambiguous_candidates.push_back(maximal[i]->L);
  for (const auto& c : candidates)
    if (!c.below) out.maximality_witnesses.push_back(c.L);
  return out;
}

}  // namespace lyap
