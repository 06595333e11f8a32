#include <cmath>
#include <stdexcept>
#include <variant>

#include <doctest.h>

#include "lyap/experiments.hpp"
#include "lyap/measure.hpp"
#include "lyap/rng.hpp"
#include "lyap/spectrum.hpp"
#include "oracle_data.hpp"

using namespace lyap;

namespace {

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

}  // namespace

TEST_CASE("measure validation rejects bad weights and singular atoms") {
  CHECK_THROWS_AS(AtomicMatrixMeasure({{0.6, diag2(1, 1)}, {0.6, diag2(2, 1)}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(AtomicMatrixMeasure({{1.0, diag2(1, 0)}}), std::invalid_argument);
  CHECK_THROWS_AS(AtomicMatrixMeasure({}), std::invalid_argument);
  const AtomicMatrixMeasure ok({{0.5, diag2(2, 1)}, {0.5, diag2(1, 2)}});
  CHECK(ok.dim() == 2);
  CHECK(ok.size() == 2);
}

TEST_CASE("mean log |det| is exact on determinant-one atoms") {
  const AtomicMatrixMeasure nu({{1.0, diag2(2.0, 0.5)}});
  CHECK(nu.mean_log_abs_det() == 0.0);
}

TEST_CASE("scaling shifts the spectrum by log c") {
  const AtomicMatrixMeasure nu({{1.0, diag2(2.0, 0.5)}});
  const AtomicMatrixMeasure scaled = nu.scaled(3.0);
  const TopExponentEstimate a = top_exponent(nu, 100, 2, 1);
  const TopExponentEstimate b = top_exponent(scaled, 100, 2, 1);
  CHECK(b.estimate == doctest::Approx(a.estimate + std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("single-atom top exponent is the exact log spectral radius") {
  const AtomicMatrixMeasure nu({{1.0, diag2(3.0, 1.0)}});
  const TopExponentEstimate est = top_exponent(nu, 1000, 4, 9);
  CHECK(est.closed_form);
  CHECK(est.estimate == std::log(3.0));
  CHECK(est.half_width == 0.0);
}

TEST_CASE("single-atom full spectrum is the exact sorted log |eigenvalue| list") {
  const AtomicMatrixMeasure nu({{1.0, diag2(2.0, 0.5)}});
  const SpectrumEstimate s = full_spectrum_qr(nu, 1000, 2, 3);
  CHECK(s.closed_form);
  REQUIRE(s.values.size() == 2);
  CHECK(s.values[0] == std::log(2.0));
  CHECK(s.values[1] == std::log(0.5));
}

TEST_CASE("kifer at t = 0 reduces to the exact closed form") {
  const TopExponentEstimate est = top_exponent(kifer_measure(0.0), 100000, 4, 1);
  CHECK(est.closed_form);
  CHECK(est.estimate == std::log(2.0));
}

TEST_CASE("qr spectrum on the pinch-and-turn family is pinned and ordered") {
  const AtomicMatrixMeasure nu = example32_measure(2.0, 0.1);
  const SpectrumEstimate s = full_spectrum_qr(nu, 5000, 8, 1);
  REQUIRE(s.values.size() == 3);
  CHECK(std::abs(s.sum_estimate - s.sum_exact) <= 1e-9);
  CHECK(s.values[0] >= s.values[1]);
  CHECK(s.values[1] >= s.values[2]);
  CHECK(s.values[0] == doctest::Approx(std::log(2.0)).epsilon(0.15));
}

TEST_CASE("exterior-power estimator agrees with qr within combined half-widths") {
  // Deep horizon: both estimators carry O(1/n) start-alignment bias while the
  // half-widths shrink like 1/sqrt(n), so the agreement window needs n large.
  const AtomicMatrixMeasure nu = example32_measure(2.0, 0.1);
  const SpectrumEstimate qr = full_spectrum_qr(nu, 32000, 8, 21);
  const SpectrumEstimate ext = spectrum_via_exterior(nu, 32000, 8, 21);
  REQUIRE(qr.values.size() == ext.values.size());
  for (std::size_t l = 0; l < qr.values.size(); ++l) {
    const double gap = std::abs(qr.values[l] - ext.values[l]);
    CHECK(gap <= qr.half_widths[l] + ext.half_widths[l] + 1e-9);
  }
}

TEST_CASE("filtration estimate recovers the growth dichotomy with simple spectrum") {
  const AtomicMatrixMeasure nu = example32_measure(2.0, 0.1);
  const FiltrationEstimate f = filtration_estimate(nu, 5, 4000);
  REQUIRE(f.spaces.size() == 3);
  CHECK(f.spaces[0].dim_sub() == 3);
  CHECK(f.spaces[1].dim_sub() == 2);
  CHECK(f.spaces[2].dim_sub() == 1);
  for (std::size_t i = 1; i < f.exponents.size(); ++i)
    CHECK(f.exponents[i] < f.exponents[i - 1]);
  for (std::size_t i = 0; i < f.exponents.size(); ++i)
    CHECK(std::abs(f.verified_rates[i] - f.exponents[i]) < 0.2);
}

TEST_CASE("filtration refuses a spectrum with a non-simple gap") {
  // Equal weights on rotation-like isometries give a collapsed spectrum.
  Matrix rot(2, 2);
  const double c = std::cos(1.0), s = std::sin(1.0);
  rot << c, -s, s, c;
  const AtomicMatrixMeasure nu({{0.5, rot}, {0.5, Matrix::Identity(2, 2)}});
  CHECK_THROWS_AS(filtration_estimate(nu, 3, 2000), std::runtime_error);
}

TEST_CASE("azuma bound dominates the frozen exact binomial tails") {
  for (int i = 0; i < oracle::azuma_grid_size; ++i) {
    const double n = oracle::azuma_grid[i][0];
    const double s = oracle::azuma_grid[i][1];
    const double exact = oracle::azuma_grid[i][2];
    CHECK(exact <= azuma_bound(1.0, (long long)(n), s));
  }
}

TEST_CASE("recomputed binomial tail matches the frozen spot value") {
  // Two-sided tail P(|S_100| >= 20) for a fair +/-1 walk, S = 2 Binom - n.
  const int n = 100, s = 20;
  long double tail = 0.0L;
  for (int k = 0; k <= n; ++k) {
    const int walk = 2 * k - n;
    if (std::abs(walk) >= s) {
      const long double logc = std::lgammal(n + 1.0L) - std::lgammal(k + 1.0L) -
                               std::lgammal(n - k + 1.0L) - n * std::log(2.0L);
      tail += std::exp(logc);
    }
  }
  CHECK(double(tail) == doctest::Approx(oracle::binom_tail_n100_s20).epsilon(1e-10));
}

TEST_CASE("large deviation probe returns sane fractions and fit") {
  const AtomicMatrixMeasure nu = example32_measure(2.0, 0.1);
  const LargeDeviationTable t =
      large_deviation_probe(nu, 0.12, {20, 40, 80}, 100, 3);
  REQUIRE(t.horizon.size() == 3);
  for (double f : t.fraction) {
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
  }
  CHECK(t.epsilon == 0.12);
  CHECK(std::isfinite(t.lambda_ref));
}

TEST_CASE("convolution power enumerates small word spaces exactly") {
  const AtomicMatrixMeasure nu({{0.5, diag2(2.0, 1.0)}, {0.5, diag2(1.0, 2.0)}});
  const auto result = convolution_power(nu, 2, 1);
  REQUIRE(std::holds_alternative<AtomicMatrixMeasure>(result));
  const auto& conv = std::get<AtomicMatrixMeasure>(result);
  CHECK(conv.size() == 4);
  double total = 0.0;
  for (const auto& a : conv.atoms()) total += a.p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("convolution power falls back to a sampler over the cap") {
  const AtomicMatrixMeasure nu({{0.5, diag2(2.0, 1.0)}, {0.5, diag2(1.0, 2.0)}});
  const auto result = convolution_power(nu, 30, 1, 1000);
  REQUIRE(std::holds_alternative<MatrixSampler>(result));
  const auto& sampler = std::get<MatrixSampler>(result);
  CHECK(sampler.dim == 2);
  const Matrix draw0 = sampler.draw(0);
  const Matrix again = sampler.draw(0);
  CHECK((draw0 - again).cwiseAbs().maxCoeff() == 0.0);  // pure function of the index
}

TEST_CASE("smoothing samples invertible matrices near the atoms") {
  const AtomicMatrixMeasure nu = example32_measure(2.0, 0.1);
  const MatrixSampler s = smooth(nu, 0.05, 4);
  const Matrix g = s.draw(7);
  CHECK(is_invertible(g));
  CHECK(s.support_norm_bound > 0.0);
}

TEST_CASE("topology distance vanishes on identical measures and separates different ones") {
  const AtomicMatrixMeasure nu = example32_measure(2.0, 0.1);
  const AtomicMatrixMeasure mu = example32_measure(2.0, 0.2);
  const TopologyDistance zero = topology_distance(nu, nu);
  CHECK(zero.weak_star_proxy == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(zero.support_hausdorff == doctest::Approx(0.0).epsilon(1e-15));
  const TopologyDistance diff = topology_distance(nu, mu);
  CHECK(diff.weak_star_proxy > 0.0);
  CHECK(diff.support_hausdorff > 0.0);
}

TEST_CASE("support constants are positive and margin-monotone in B") {
  const AtomicMatrixMeasure nu = example32_measure(2.0, 0.1);
  const SupportConstants plain = support_constants(nu, 0.0, 200, 5);
  const SupportConstants fat = support_constants(nu, 0.2, 200, 5);
  CHECK(plain.A > 0.0);
  CHECK(plain.B >= 2.0);
  CHECK(fat.B >= plain.B);
}
