#include <cmath>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "lyap/experiments.hpp"
#include "lyap/markov.hpp"
#include "lyap/rng.hpp"

using namespace lyap;

namespace {

FiniteMarkovKernel two_state() {
  Matrix rows(2, 2);
  rows << 0.9, 0.1, 0.4, 0.6;
  return FiniteMarkovKernel(rows);
}

FiniteMarkovKernel random_kernel(int n, Rng& rng) {
  Matrix rows(n, n);
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      rows(i, j) = rng.next_uniform(0.05, 1.0);
      total += rows(i, j);
    }
    for (int j = 0; j < n; ++j) rows(i, j) /= total;
  }
  return FiniteMarkovKernel(rows);
}

Vector uniform_eta(int n) { return Vector::Constant(n, 1.0 / double(n)); }

}  // namespace

TEST_CASE("kernel validation rejects non-stochastic rows") {
  Matrix bad(2, 2);
  bad << 0.5, 0.6, 0.5, 0.5;
  CHECK_THROWS_AS(FiniteMarkovKernel{bad}, std::invalid_argument);
  Matrix neg(2, 2);
  neg << 1.2, -0.2, 0.5, 0.5;
  CHECK_THROWS_AS(FiniteMarkovKernel{neg}, std::invalid_argument);
}

TEST_CASE("stationary distribution of the two-state chain") {
  const Vector pi = two_state().stationary();
  CHECK(pi[0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(pi[1] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("localization of the two-state chain keeps the restricted measure stationary") {
  const FiniteMarkovKernel T = two_state();
  const Vector eta = T.stationary();
  const LocalizedKernel loc = localize_kernel(T, eta, {0});
  CHECK(loc.J_outflow == doctest::Approx(0.08).epsilon(1e-12));
  CHECK(loc.J_inflow == doctest::Approx(0.08).epsilon(1e-12));
  CHECK(loc.kernel.n_states() == 1);
  CHECK(loc.kernel.rows()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(loc.eta_U[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("localized kernels are stochastic and leave eta_U invariant on random chains") {
  Rng rng(31, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3 + int(rng.next_u64() % 8);
    const FiniteMarkovKernel T = random_kernel(n, rng);
    const Vector eta = T.stationary();
    std::vector<int> U;
    for (int i = 0; i < n; ++i)
      if (rng.next_double() < 0.5) U.push_back(i);
    if (U.empty()) U.push_back(0);
    if (int(U.size()) == n) U.pop_back();
    const LocalizedKernel loc = localize_kernel(T, eta, U);
    const Vector resid = loc.kernel.rows().transpose() * loc.eta_U - loc.eta_U;
    CHECK(resid.cwiseAbs().sum() <= 1e-12);
    CHECK(std::abs(loc.J_outflow - loc.J_inflow) <= 1e-12);
  }
}

TEST_CASE("localization requires a stationary input measure") {
  const FiniteMarkovKernel T = two_state();
  CHECK_THROWS_AS(localize_kernel(T, uniform_eta(2), {0}), std::invalid_argument);
}

TEST_CASE("avoiding coupling reproduces the closed-form uniform fixture") {
  const Vector eta = uniform_eta(3);
  const Matrix plan = coupling_avoiding(eta, eta, {0}, {0});
  CHECK(plan(0, 0) == 0.0);
  CHECK(plan(0, 1) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(plan(0, 2) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(plan(1, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(plan(1, 1) == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
  CHECK(plan(2, 2) == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
}

TEST_CASE("avoiding coupling has exact marginals and swap symmetry") {
  Rng rng(17, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + int(rng.next_u64() % 5);
    const int m = 2 + int(rng.next_u64() % 5);
    Vector eta(n), eta2(m);
    for (int i = 0; i < n; ++i) eta[i] = rng.next_uniform(0.2, 1.0);
    for (int j = 0; j < m; ++j) eta2[j] = rng.next_uniform(0.2, 1.0);
    eta /= eta.sum();
    eta2 /= eta2.sum();
    // One forbidden index per side keeps the mass condition easy to satisfy.
    std::vector<int> A = {int(rng.next_u64() % n)};
    std::vector<int> A2 = {int(rng.next_u64() % m)};
    if (eta[A[0]] >= 0.5 || eta2[A2[0]] >= 0.5) continue;
    const Matrix plan = coupling_avoiding(eta, eta2, A, A2);
    CHECK(plan.minCoeff() >= 0.0);
    CHECK(plan(A[0], A2[0]) == 0.0);
    for (int i = 0; i < n; ++i)
      CHECK(plan.row(i).sum() == doctest::Approx(eta[i]).epsilon(1e-12));
    for (int j = 0; j < m; ++j)
      CHECK(plan.col(j).sum() == doctest::Approx(eta2[j]).epsilon(1e-12));
    const Matrix swapped = coupling_avoiding(eta2, eta, A2, A);
    CHECK((plan - swapped.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("coupling rejects a dominant forbidden block") {
  Vector eta(2);
  eta << 0.7, 0.3;
  CHECK_THROWS_AS(coupling_avoiding(eta, uniform_eta(2), {0}, {0}),
                  std::invalid_argument);
}

TEST_CASE("multi-rectangle coupling clears every rectangle with exact marginals") {
  const int n = 6;
  const Vector eta = uniform_eta(n);
  std::vector<AvoidancePair> pairs;
  pairs.push_back({{0}, {0, 1}, {0}, {0, 1}});
  pairs.push_back({{2}, {2, 3}, {2}, {2, 3}});
  const Matrix plan = coupling_avoiding_many(eta, eta, pairs);
  CHECK(plan.minCoeff() >= -1e-15);
  CHECK(plan(0, 0) == 0.0);
  CHECK(plan(2, 2) == 0.0);
  for (int i = 0; i < n; ++i) {
    CHECK(plan.row(i).sum() == doctest::Approx(eta[i]).epsilon(1e-12));
    CHECK(plan.col(i).sum() == doctest::Approx(eta[i]).epsilon(1e-12));
  }
}

TEST_CASE("multi-rectangle coupling names cross-compatibility violations") {
  const Vector eta = uniform_eta(4);
  std::vector<AvoidancePair> pairs;
  // Same A on both steps, but the second C2 fails to absorb the first A2.
  pairs.push_back({{0}, {0}, {1}, {1}});
  pairs.push_back({{0}, {0}, {2}, {2}});
  CHECK_THROWS_AS(coupling_avoiding_many(eta, eta, pairs), std::invalid_argument);
}

TEST_CASE("mass bound report is tight on the two-state drift chain") {
  const FiniteMarkovKernel T = two_state();
  Vector Psi(2);
  Psi << 10.0, 0.0;
  const Vector zeta = T.stationary();
  const MargulisBoundReport rep = margulis_mass_bound_check(T, Psi, {0}, {1}, zeta);
  CHECK(rep.kappa_A == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.kappa_B == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(rep.bound == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(rep.asserted);
  CHECK(rep.holds);
  CHECK(rep.zeta_B == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("additive drift from multiplicative drift") {
  CHECK(additive_drift_from_multiplicative(0.5, 0.1, 1.0) ==
        doctest::Approx(-std::log(0.6)).epsilon(1e-12));
  CHECK(std::isinf(additive_drift_from_multiplicative(0.0, 0.0, 1.0)));
  CHECK_THROWS_AS(additive_drift_from_multiplicative(-0.1, 0.0, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(additive_drift_from_multiplicative(0.5, 0.1, 0.0),
                  std::invalid_argument);
}

TEST_CASE("core and border classification around the invariant line") {
  const AtomicMatrixMeasure nu = example32_measure(2.0, 0.1);
  const SubspacePoint e3 = SubspacePoint::standard(3, {2});
  const double eps = 0.1;
  Vector on(3), near(3), far(3);
  on << 0.0, 0.0, 1.0;
  far << 1.0, 0.0, 0.0;
  // Tilt by an angle whose sine lies between the inner and outer radii.
  const double t = 0.099;
  near << t, 0.0, std::sqrt(1.0 - t * t);
  CHECK(core_border(nu, e3, eps, ProjectivePoint(on)) == CoreClass::core_sharp);
  CHECK(core_border(nu, e3, eps, ProjectivePoint(near)) == CoreClass::border);
  CHECK(core_border(nu, e3, eps, ProjectivePoint(far)) == CoreClass::outside);
  CHECK(to_string(CoreClass::core) == "core");
}
