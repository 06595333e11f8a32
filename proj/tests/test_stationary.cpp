#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "lyap/experiments.hpp"
#include "lyap/measure.hpp"
#include "lyap/rng.hpp"
#include "lyap/stationary.hpp"
#include "lyap/transport.hpp"

using namespace lyap;

namespace {

EmpiricalMeasure line_measure(const std::vector<double>& ws,
                              const std::vector<Vector>& dirs) {
  std::vector<MeasureAtom> atoms;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    Matrix p = dirs[i].normalized();
    atoms.push_back({ws[i], p});
  }
  return EmpiricalMeasure(SpaceTag::projective(int(dirs[0].size())), std::move(atoms));
}

Vector unit3(double a, double b, double c) {
  Vector v(3);
  v << a, b, c;
  return v;
}

}  // namespace

TEST_CASE("exact transport cost on a two-point problem") {
  // Move 0.3 of mass across distance 1, keep 0.7 in place.
  const std::vector<double> a = {1.0, 0.0};
  const std::vector<double> b = {0.7, 0.3};
  const std::vector<std::vector<double>> cost = {{0.0, 1.0}, {1.0, 0.0}};
  CHECK(wasserstein1(a, b, cost) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("empirical measures validate and canonicalize") {
  CHECK_THROWS_AS(line_measure({-0.5, 1.5}, {unit3(1, 0, 0), unit3(0, 1, 0)}),
                  std::invalid_argument);
  const EmpiricalMeasure m = line_measure({0.5, 0.5}, {unit3(-2, 0, 0), unit3(0, 1, 0)});
  CHECK(m.size() == 2);
  CHECK(m.atoms()[0].point(0, 0) > 0.0);  // sign canonicalized
}

TEST_CASE("space distance on lines is the sine of the angle") {
  const SpaceTag tag = SpaceTag::projective(3);
  Matrix p = unit3(1, 0, 0);
  Matrix q = unit3(1, 1, 0).normalized();
  CHECK(space_distance(tag, p, q) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(space_distance(tag, p, p) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("w1 between single atoms is the ground distance") {
  const EmpiricalMeasure a = line_measure({1.0}, {unit3(1, 0, 0)});
  const EmpiricalMeasure b = line_measure({1.0}, {unit3(0, 1, 0)});
  CHECK(measure_w1(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(measure_w1(a, a) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(measure_w1_coarse(a, b, 16) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pruning merges nearby atoms and preserves total mass") {
  const EmpiricalMeasure m =
      line_measure({0.5, 0.5}, {unit3(1, 0, 0), unit3(1, 1e-12, 0)});
  PruneOptions opt;
  opt.merge_radius = 1e-9;
  const EmpiricalMeasure pruned = prune_measure(m, opt);
  CHECK(pruned.size() == 1);
  CHECK(pruned.atoms()[0].w == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("pushforward multiplies weights and moves points") {
  const AtomicMatrixMeasure nu = example32_measure(2.0, 0.1);
  const EmpiricalMeasure m = line_measure({1.0}, {unit3(1, 2, 2).normalized()});
  const EmpiricalMeasure pushed = push_measure(nu, m);
  CHECK(pushed.size() == 2);
  double total = 0.0;
  for (const auto& a : pushed.atoms()) total += a.w;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("deterministic contraction concentrates the stationary estimate") {
  // Single atom diag(4, 1): every line except span(e2) converges to span(e1).
  Matrix g = Matrix::Zero(2, 2);
  g(0, 0) = 4.0;
  g(1, 1) = 1.0;
  const AtomicMatrixMeasure nu({{1.0, g}});
  StationaryOptions opt;
  opt.n_iters = 96;
  opt.window = 24;
  opt.start_atoms = 32;
  opt.seed = 2;
  opt.converge_threshold = 1e-2;
  const StationaryResult res = stationary_estimate(nu, opt);
  CHECK(res.converged);
  // Dominant atom should sit at span(e1).
  double best_w = 0.0;
  Matrix best = res.measure.atoms()[0].point;
  for (const auto& a : res.measure.atoms())
    if (a.w > best_w) {
      best_w = a.w;
      best = a.point;
    }
  CHECK(best_w > 0.9);
  CHECK(std::abs(best(0, 0)) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("stationary diagnostic bounds the one-step residual") {
  const AtomicMatrixMeasure nu = example32_measure(2.0, 0.1);
  StationaryOptions opt;
  opt.n_iters = 120;
  opt.window = 30;
  opt.seed = 1;
  opt.per_iter_max_atoms = 512;
  opt.result_max_atoms = 512;
  opt.diag_atoms = 64;
  opt.converge_threshold = 1e-2;
  const StationaryResult res = stationary_estimate(nu, opt);
  CHECK(res.prune_cost >= 0.0);
  CHECK(res.diagnostic >= res.prune_cost);
  const EmpiricalMeasure pushed = push_measure(nu, res.measure);
  const double residual = measure_w1_coarse(res.measure, pushed, opt.diag_atoms);
  CHECK(residual <= 2.0 * res.diagnostic + 1e-9);
}

TEST_CASE("furstenberg integral is exact on a point mass") {
  Matrix g = Matrix::Zero(2, 2);
  g(0, 0) = 4.0;
  g(1, 1) = 1.0;
  const AtomicMatrixMeasure nu({{1.0, g}});
  Vector e1(2);
  e1 << 1.0, 0.0;
  const EmpiricalMeasure delta = line_measure({1.0}, {e1});
  CHECK(furstenberg_integral(nu, delta) == std::log(4.0));
}

TEST_CASE("uniform random clouds live on the requested space") {
  Rng rng(3, 1);
  const EmpiricalMeasure cloud = uniform_random_cloud(SpaceTag::grassmann(2, 4), 10, rng);
  CHECK(cloud.size() == 10);
  for (const auto& a : cloud.atoms()) {
    CHECK(a.point.rows() == 4);
    CHECK(a.point.cols() == 2);
    CHECK((a.point.transpose() * a.point - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <
          1e-12);
  }
}
