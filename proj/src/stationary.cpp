#include "lyap/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "lyap/transport.hpp"

namespace lyap {

namespace {

void validate_point(const SpaceTag& tag, const Matrix& p) {
  if (p.rows() != tag.d || p.cols() != tag.r)
    throw std::invalid_argument("measure atom: frame shape does not match space tag");
  const Matrix gram = p.transpose() * p;
  if ((gram - Matrix::Identity(tag.r, tag.r)).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("measure atom: frame not orthonormal");
}

Matrix canonicalize(const SpaceTag& tag, const Matrix& p) {
  if (tag.kind == SpaceKind::projective) return ProjectivePoint(p.col(0)).direction();
  return p;
}

// Deterministic grid key for bucket merging. Projective points use the
// sign-canonical direction; subspaces and flag levels use their (basis-free)
// orthogonal projection matrices.
std::vector<long long> grid_key(const SpaceTag& tag, const Matrix& p, double cell) {
  std::vector<long long> key;
  auto push_entries = [&](const Matrix& m) {
    for (int j = 0; j < m.cols(); ++j)
      for (int i = 0; i < m.rows(); ++i)
        key.push_back(std::llround(m(i, j) / cell));
  };
  switch (tag.kind) {
    case SpaceKind::projective:
      push_entries(ProjectivePoint(p.col(0)).direction());
      break;
    case SpaceKind::grassmann:
      push_entries(p * p.transpose());
      break;
    case SpaceKind::flag:
      for (int l = 1; l <= tag.r; ++l) {
        const Matrix q = p.leftCols(l);
        push_entries(q * q.transpose());
      }
      break;
  }
  return key;
}

struct Bucket {
  double w = 0.0;
  Matrix rep;          // representative frame
  double rep_w = 0.0;  // weight of the heaviest member (non-projective reps)
  Vector mean;         // sign-aligned weighted mean (projective only)
};

// Merges atoms into grid cells of the given size. Weights are carried as-is
// (callers renormalize); starts from `radius` and doubles until the result
// fits max_atoms. `displacement` (optional) receives sum_a w_a d(a, rep(a)),
// an upper bound on the W1 cost of the merge in the atoms' weight units.
std::vector<MeasureAtom> grid_merge(const SpaceTag& tag, const std::vector<MeasureAtom>& atoms,
                                    double radius, int max_atoms, double* radius_used,
                                    double* displacement = nullptr) {
  double cell = radius;
  while (true) {
    std::map<std::vector<long long>, Bucket> cells;
    for (const auto& a : atoms) {
      auto& b = cells[grid_key(tag, a.point, cell)];
      if (tag.kind == SpaceKind::projective) {
        const Vector dir = ProjectivePoint(a.point.col(0)).direction();
        if (b.w == 0.0) {
          b.mean = a.w * dir;
        } else {
          b.mean += (b.mean.dot(dir) >= 0.0 ? a.w : -a.w) * dir;
        }
      }
      if (b.w == 0.0 || a.w > b.rep_w) {
        b.rep = a.point;
        b.rep_w = a.w;
      }
      b.w += a.w;
    }
    if (int(cells.size()) <= max_atoms) {
      for (auto& [key, b] : cells) {
        if (tag.kind == SpaceKind::projective) {
          const double n = b.mean.norm();
          b.rep = n > 1e-300 ? Matrix(ProjectivePoint(b.mean).direction()) : Matrix(b.rep);
        }
      }
      std::vector<MeasureAtom> out;
      out.reserve(cells.size());
      for (auto& [key, b] : cells) out.push_back({b.w, b.rep});
      if (displacement) {
        double moved = 0.0;
        for (const auto& a : atoms) {
          const Bucket& b = cells[grid_key(tag, a.point, cell)];
          moved += a.w * space_distance(tag, a.point, b.rep);
        }
        *displacement = moved;
      }
      if (radius_used) *radius_used = cell;
      return out;
    }
    cell *= 2.0;
  }
}

// `dropped` (optional) receives the fraction of total mass removed by the
// floor, an upper bound on the W1 cost of the drop (distances are <= 1).
std::vector<MeasureAtom> drop_floor_and_normalize(std::vector<MeasureAtom> atoms,
                                                  double weight_floor,
                                                  double* dropped = nullptr) {
  double total = 0.0;
  for (const auto& a : atoms) total += a.w;
  std::vector<MeasureAtom> kept;
  kept.reserve(atoms.size());
  for (auto& a : atoms)
    if (a.w >= weight_floor * total) kept.push_back(std::move(a));
  if (kept.empty()) throw std::runtime_error("prune: weight floor removed every atom");
  double kept_total = 0.0;
  for (const auto& a : kept) kept_total += a.w;
  for (auto& a : kept) a.w /= kept_total;
  if (dropped) *dropped = total > 0.0 ? (total - kept_total) / total : 0.0;
  return kept;
}

}  // namespace

EmpiricalMeasure::EmpiricalMeasure(SpaceTag tag, std::vector<MeasureAtom> atoms)
    : tag_(tag), atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw std::invalid_argument("empirical measure: no atoms");
  if (tag_.r < 1 || tag_.r > tag_.d || (tag_.kind == SpaceKind::projective && tag_.r != 1))
    throw std::invalid_argument("empirical measure: bad space tag");
  double total = 0.0;
  for (auto& a : atoms_) {
    if (!(a.w > 0.0)) throw std::invalid_argument("empirical measure: nonpositive weight");
    validate_point(tag_, a.point);
    a.point = canonicalize(tag_, a.point);
    total += a.w;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("empirical measure: weights sum to " + std::to_string(total));
}

double space_distance(const SpaceTag& tag, const Matrix& a, const Matrix& b) {
  switch (tag.kind) {
    case SpaceKind::projective:
      return projective_distance(ProjectivePoint(a.col(0)), ProjectivePoint(b.col(0)));
    case SpaceKind::grassmann:
      return subspace_distance(SubspacePoint(a), SubspacePoint(b));
    case SpaceKind::flag: {
      double worst = 0.0;
      for (int l = 1; l <= tag.r; ++l)
        worst = std::max(worst, subspace_distance(SubspacePoint(Matrix(a.leftCols(l))),
                                                  SubspacePoint(Matrix(b.leftCols(l)))));
      return worst;
    }
  }
  return 0.0;
}

EmpiricalMeasure prune_measure(const EmpiricalMeasure& eta, const PruneOptions& opt) {
  auto merged = grid_merge(eta.tag(), eta.atoms(), opt.merge_radius, opt.max_atoms, nullptr);
  return EmpiricalMeasure(eta.tag(), drop_floor_and_normalize(std::move(merged),
                                                              opt.weight_floor));
}

double measure_w1(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (!(a.tag() == b.tag())) throw std::invalid_argument("measure_w1: space mismatch");
  const int n = a.size(), m = b.size();
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(m), 0.0));
  std::vector<double> wa(static_cast<std::size_t>(n), 0.0), wb(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < n; ++i) {
    wa[std::size_t(i)] = a.atoms()[std::size_t(i)].w;
    for (int j = 0; j < m; ++j)
      cost[std::size_t(i)][std::size_t(j)] =
          space_distance(a.tag(), a.atoms()[std::size_t(i)].point,
                         b.atoms()[std::size_t(j)].point);
  }
  for (int j = 0; j < m; ++j) wb[std::size_t(j)] = b.atoms()[std::size_t(j)].w;
  return wasserstein1(wa, wb, cost);
}

double measure_w1_coarse(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                         int target_atoms, double start_radius) {
  if (!(a.tag() == b.tag())) throw std::invalid_argument("measure_w1_coarse: space mismatch");
  double cell = start_radius;
  while (true) {
    double used_a = cell, used_b = cell;
    auto ma = grid_merge(a.tag(), a.atoms(), cell, 1 << 30, &used_a);
    auto mb = grid_merge(b.tag(), b.atoms(), cell, 1 << 30, &used_b);
    if (int(ma.size()) <= target_atoms && int(mb.size()) <= target_atoms) {
      const EmpiricalMeasure ca(a.tag(), drop_floor_and_normalize(std::move(ma), 0.0));
      const EmpiricalMeasure cb(b.tag(), drop_floor_and_normalize(std::move(mb), 0.0));
      return measure_w1(ca, cb);
    }
    cell *= 2.0;
  }
}

EmpiricalMeasure push_measure(const AtomicMatrixMeasure& nu, const EmpiricalMeasure& eta) {
  if (nu.dim() != eta.tag().d) throw std::invalid_argument("push_measure: dimension mismatch");
  std::vector<MeasureAtom> out;
  out.reserve(std::size_t(eta.size()) * std::size_t(nu.size()));
  for (int i = 0; i < nu.size(); ++i) {
    const Matrix& A = nu.atom(i).A;
    const double p = nu.atom(i).p;
    for (const auto& a : eta.atoms()) {
      Matrix moved = A * a.point;
      if (eta.tag().r == 1) {
        moved = ProjectivePoint(moved.col(0)).direction();
      } else {
        moved = thin_q(moved);
      }
      out.push_back({p * a.w, std::move(moved)});
    }
  }
  return EmpiricalMeasure(eta.tag(), std::move(out));
}

EmpiricalMeasure push_measure(const AtomicMatrixMeasure& nu, const EmpiricalMeasure& eta,
                              const PruneOptions& opt) {
  return prune_measure(push_measure(nu, eta), opt);
}

EmpiricalMeasure uniform_random_cloud(const SpaceTag& tag, int n_atoms, Rng& rng) {
  if (n_atoms < 1) throw std::invalid_argument("uniform_random_cloud: need atoms");
  std::vector<MeasureAtom> atoms;
  atoms.reserve(std::size_t(n_atoms));
  for (int i = 0; i < n_atoms; ++i)
    atoms.push_back({1.0 / double(n_atoms), random_orthonormal_frame(tag.d, tag.r, rng)});
  return EmpiricalMeasure(tag, std::move(atoms));
}

StationaryResult stationary_estimate(const AtomicMatrixMeasure& nu,
                                     const StationaryOptions& opt) {
  if (opt.n_iters < 2) throw std::invalid_argument("stationary_estimate: need n_iters >= 2");
  const SpaceTag tag = SpaceTag::projective(nu.dim());
  const int window = int(std::min<long long>(opt.window, opt.n_iters / 2));
  const int effective_window = std::max(1, window);

  Rng rng(opt.seed, 0);
  EmpiricalMeasure cloud = uniform_random_cloud(tag, opt.start_atoms, rng);

  PruneOptions iter_prune;
  iter_prune.merge_radius = opt.merge_radius;
  iter_prune.weight_floor = opt.prune_floor;
  iter_prune.max_atoms = opt.per_iter_max_atoms;

  std::vector<MeasureAtom> accum;  // running block sum, weights unnormalized
  const std::size_t accum_cap = std::size_t(16) * std::size_t(opt.result_max_atoms);

  // Every merge/floor reports its W1 cost; per block those costs divide by the
  // block length (the block average carries each iterate at weight 1/length),
  // and the final block-level floor adds its dropped fraction directly.
  std::vector<EmpiricalMeasure> blocks;
  std::vector<double> block_costs;
  double cost_raw = 0.0;
  long long block_len = 0;
  for (long long it = 1; it <= opt.n_iters; ++it) {
    const EmpiricalMeasure pushed = push_measure(nu, cloud);
    double moved = 0.0;
    double dropped = 0.0;
    auto kept = grid_merge(tag, pushed.atoms(), iter_prune.merge_radius,
                           iter_prune.max_atoms, nullptr, &moved);
    cloud = EmpiricalMeasure(
        tag, drop_floor_and_normalize(std::move(kept), iter_prune.weight_floor, &dropped));
    cost_raw += moved + dropped;
    ++block_len;
    for (const auto& a : cloud.atoms()) accum.push_back(a);
    if (accum.size() > accum_cap) {
      accum = grid_merge(tag, accum, opt.merge_radius, int(accum_cap / 2), nullptr, &moved);
      cost_raw += moved;
    }
    if (it % effective_window == 0 || it == opt.n_iters) {
      auto merged =
          grid_merge(tag, accum, opt.merge_radius, opt.result_max_atoms, nullptr, &moved);
      cost_raw += moved;
      double block_dropped = 0.0;
      blocks.emplace_back(
          tag, drop_floor_and_normalize(std::move(merged), opt.prune_floor, &block_dropped));
      block_costs.push_back(cost_raw / double(block_len) + block_dropped);
      if (blocks.size() > 2) {
        blocks.erase(blocks.begin());
        block_costs.erase(block_costs.begin());
      }
      accum.clear();
      cost_raw = 0.0;
      block_len = 0;
    }
  }

  StationaryResult out{blocks.back(), 0.0, block_costs.back(), false, opt.n_iters,
                       effective_window};
  if (blocks.size() >= 2) {
    out.diagnostic =
        measure_w1_coarse(blocks[blocks.size() - 2], blocks.back(), opt.diag_atoms,
                          opt.merge_radius) +
        out.prune_cost;
  } else {
    out.diagnostic = std::numeric_limits<double>::infinity();
  }
  out.converged = out.diagnostic < opt.converge_threshold;
  return out;
}

double furstenberg_integral(const AtomicMatrixMeasure& nu, const EmpiricalMeasure& eta) {
  if (eta.tag().kind != SpaceKind::projective)
    throw std::invalid_argument("furstenberg_integral: projective measures only");
  if (nu.dim() != eta.tag().d)
    throw std::invalid_argument("furstenberg_integral: dimension mismatch");
  double total = 0.0;
  for (int i = 0; i < nu.size(); ++i)
    for (const auto& a : eta.atoms())
      total += nu.atom(i).p * a.w * std::log((nu.atom(i).A * a.point.col(0)).norm());
  return total;
}

}  // namespace lyap
