#include <doctest.h>

#include <cmath>

#include "aclstm/error.hpp"
#include "aclstm/metrics.hpp"
#include "aclstm/poly.hpp"
#include "oracles.hpp"

using namespace aclstm;

namespace {

std::vector<Complex> random_coeffs(std::size_t n, unsigned seed, double scale) {
  auto c = oracle::complex_gaussian(n, seed, scale);
  c[0] += Complex{1.0, 0.0};
  return c;
}

ComplexVector to_eigen(const std::vector<Complex>& c) {
  return Eigen::Map<const ComplexVector>(c.data(), static_cast<long>(c.size()));
}

}  // namespace

TEST_SUITE("poly") {
  TEST_CASE("basis layout") {
    const std::vector<Complex> x{{1.0, 0.0}, {0.0, 2.0}, {3.0, 4.0}};
    SUBCASE("M = 0, K = 1 is the identity column") {
      const auto phi = mp_basis(x, MpSpec::mp(0, 1));
      REQUIRE(phi.cols() == 1);
      for (int n = 0; n < 3; ++n) CHECK(phi(n, 0) == x[static_cast<std::size_t>(n)]);
    }
    SUBCASE("default MP has 45 columns") {
      CHECK(MpSpec::mp(4, 9).coefficient_count() == 45);
      auto odd = MpSpec::mp(4, 9);
      odd.odd_only = true;
      CHECK(odd.coefficient_count() == 25);
      CHECK(odd.orders() == std::vector<int>{1, 3, 5, 7, 9});
    }
    SUBCASE("zero padding before the first sample") {
      const auto phi = mp_basis(x, MpSpec::mp(1, 2));
      REQUIRE(phi.cols() == 4);
      CHECK(phi(0, 2) == Complex{});
      CHECK(phi(0, 3) == Complex{});
      CHECK(phi(2, 0) == x[2]);
      CHECK(std::abs(phi(2, 1) - x[2] * 5.0) < 1e-15);
      CHECK(std::abs(phi(2, 3) - x[1] * 2.0) < 1e-15);
    }
    SUBCASE("generalized layout") {
      const auto g = MpSpec::gmp_default();
      CHECK(g.coefficient_count() == 63);
      CHECK(g.max_lag() == 4);
      CHECK(g.max_lead() == 1);
      const auto phi = mp_basis(x, [] {
        MpSpec s = MpSpec::mp(0, 1);
        s.lags = {1, -1};
        s.cross_orders = {3};
        return s;
      }());
      REQUIRE(phi.cols() == 3);
      // lag +1 at n = 1: x[1] |x[0]|^2; lead at n = 1: x[1] |x[2]|^2; lead past the end is zero.
      CHECK(std::abs(phi(1, 1) - x[1] * 1.0) < 1e-15);
      CHECK(std::abs(phi(1, 2) - x[1] * 25.0) < 1e-13);
      CHECK(phi(2, 2) == Complex{});
    }
    SUBCASE("invalid specs") {
      CHECK_THROWS_AS(mp_basis(x, MpSpec::mp(-1, 3)), ConfigError);
      CHECK_THROWS_AS(mp_basis(x, MpSpec::mp(1, 0)), ConfigError);
      CHECK_THROWS_AS(mp_basis(x, MpSpec::mp(3, 1)), ConfigError);
      auto s = MpSpec::mp(0, 1);
      s.lags = {0};
      s.cross_orders = {3};
      CHECK_THROWS_AS(mp_basis(x, s), ConfigError);
    }
  }

  TEST_CASE("basis matches the reference polynomial") {
    const auto x = oracle::complex_gaussian(50, 2, 0.7);
    const auto c = random_coeffs(12, 3, 0.1);
    const auto expect = oracle::memory_polynomial(x, 3, 3, c);
    const auto y = mp_predict(x, MpSpec::mp(3, 3), to_eigen(c));
    for (std::size_t n = 0; n < x.size(); ++n) CHECK(std::abs(y[n] - expect[n]) < 1e-13);
  }

  TEST_CASE("noise-free MP data is recovered exactly") {
    const auto x = oracle::complex_gaussian(10000, 4, 0.5);
    const auto c = random_coeffs(9, 5, 0.05);
    const auto y = oracle::memory_polynomial(x, 2, 3, c);
    const auto fit = mp_fit(x, y, MpSpec::mp(2, 3));
    CHECK_FALSE(fit.rank_deficient);
    CHECK(fit.rank == 9);
    for (std::size_t k = 0; k < 9; ++k) CHECK(std::abs(fit.coeffs(static_cast<long>(k)) - c[k]) < 1e-8 * std::abs(c[k]) + 1e-12);
    CHECK(fit.residual_nmse_db < -120.0);
  }

  TEST_CASE("a pure gain is fitted as a single coefficient") {
    const auto x = oracle::complex_gaussian(500, 6);
    std::vector<Complex> y(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) y[n] = 2.0 * x[n];
    const auto fit = mp_fit(x, y, MpSpec::mp(2, 3));
    CHECK(std::abs(fit.coeffs(0) - 2.0) < 1e-10);
    for (long k = 1; k < fit.coeffs.size(); ++k) CHECK(std::abs(fit.coeffs(k)) < 1e-10);
  }

  TEST_CASE("additive noise sets the residual floor") {
    const auto x = oracle::complex_gaussian(20000, 7, 0.5);
    const auto c = random_coeffs(12, 8, 0.05);
    auto y = oracle::memory_polynomial(x, 2, 4, c);
    const double p = mean_power(y);
    const auto noise = oracle::complex_gaussian(y.size(), 9, std::sqrt(p * 1e-4));
    for (std::size_t n = 0; n < y.size(); ++n) y[n] += noise[n];
    const auto fit = mp_fit(x, y, MpSpec::mp(2, 4));
    CHECK(fit.residual_nmse_db == doctest::Approx(-40.0).epsilon(0.025));
  }

  TEST_CASE("prediction is linear in the coefficients") {
    const auto x = oracle::complex_gaussian(64, 10);
    const auto spec = MpSpec::gmp_default();
    const auto a = to_eigen(oracle::complex_gaussian(63, 11));
    const auto b = to_eigen(oracle::complex_gaussian(63, 12));
    const Complex alpha{0.3, -1.2};
    const auto ya = mp_predict(x, spec, a), yb = mp_predict(x, spec, b);
    const auto yab = mp_predict(x, spec, ComplexVector(alpha * a + b));
    for (std::size_t n = 0; n < x.size(); ++n) CHECK(std::abs(yab[n] - (alpha * ya[n] + yb[n])) < 1e-9);
    CHECK_THROWS_AS(mp_predict(x, spec, ComplexVector(a.head(10))), ConfigError);
  }

  TEST_CASE("plain MP prediction is causal") {
    auto x = oracle::complex_gaussian(40, 13);
    const auto spec = MpSpec::mp(3, 5);
    const auto c = to_eigen(oracle::complex_gaussian(20, 14));
    const auto y = mp_predict(x, spec, c);
    x[30] += Complex{5.0, -3.0};
    const auto z = mp_predict(x, spec, c);
    for (std::size_t n = 0; n < 30; ++n) CHECK(y[n] == z[n]);
    CHECK(y[30] != z[30]);
  }

  TEST_CASE("least-squares optimality") {
    const auto x = oracle::complex_gaussian(800, 15, 0.6);
    const auto y = oracle::complex_gaussian(800, 16);
    const auto spec = MpSpec::mp(2, 5);
    const auto fit = mp_fit(x, y, spec);
    const ComplexMatrix phi = mp_basis(x, spec);
    const ComplexVector yv = Eigen::Map<const ComplexVector>(y.data(), 800);
    const double best = (phi * fit.coeffs - yv).squaredNorm();
    // The residual is orthogonal to the basis, so perturbing any coefficient costs energy.
    CHECK((phi.adjoint() * (phi * fit.coeffs - yv)).norm() < 1e-9 * yv.norm() * phi.norm());
    for (long k = 0; k < fit.coeffs.size(); ++k) {
      ComplexVector c = fit.coeffs;
      c(k) += Complex{1e-3, -1e-3};
      CHECK((phi * c - yv).squaredNorm() > best);
    }
    // Agreement with the normal equations on a well-conditioned problem.
    const ComplexVector ne = (phi.adjoint() * phi).ldlt().solve(phi.adjoint() * yv);
    CHECK((ne - fit.coeffs).norm() <= 1e-6 * fit.coeffs.norm());
  }

  TEST_CASE("row range restricts the fit") {
    const auto x = oracle::complex_gaussian(400, 17);
    std::vector<Complex> y(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) y[n] = (n < 200 ? 2.0 : -7.0) * x[n];
    const auto fit = mp_fit(x, y, MpSpec::mp(1, 1), 0, 200);
    CHECK(std::abs(fit.coeffs(0) - 2.0) < 1e-10);
    CHECK_THROWS_AS(mp_fit(x, y, MpSpec::mp(1, 1), 300, 300), ConfigError);
    std::vector<Complex> shorter(y.begin(), y.end() - 1);
    CHECK_THROWS_AS(mp_fit(x, shorter, MpSpec::mp(1, 1)), ConfigError);
  }

  TEST_CASE("dropping padded rows excludes the warm-up") {
    const auto x = oracle::complex_gaussian(300, 18);
    const auto c = random_coeffs(6, 19, 0.1);
    auto y = oracle::memory_polynomial(x, 2, 2, c);
    y[0] = y[1] = Complex{100.0, 100.0};  // corrupt samples whose history is incomplete
    auto spec = MpSpec::mp(2, 2);
    spec.zero_pad = false;
    const auto fit = mp_fit(x, y, spec);
    for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(fit.coeffs(static_cast<long>(k)) - c[k]) < 1e-9);
  }

  TEST_CASE("rank-deficient problems return the minimum-norm solution") {
    std::vector<Complex> x(100, Complex{0.5, 0.0});
    std::vector<Complex> y(100, Complex{1.0, 0.0});
    const auto fit = mp_fit(x, y, MpSpec::mp(1, 1), 1);
    CHECK(fit.rank_deficient);
    CHECK(fit.rank == 1);
    CHECK(std::abs(fit.coeffs(0) - 1.0) < 1e-12);
    CHECK(std::abs(fit.coeffs(1) - 1.0) < 1e-12);
  }

  TEST_CASE("generalized terms fit generalized data better than a plain MP") {
    const auto x = oracle::complex_gaussian(6000, 20, 0.5);
    const auto g = MpSpec::gmp_default();
    auto c = oracle::complex_gaussian(63, 21, 0.02);
    c[0] += 1.0;
    const auto y = mp_predict(x, g, to_eigen(c));
    CHECK(mp_fit(x, y, g).residual_nmse_db < -120.0);
    CHECK(mp_fit(x, y, MpSpec::mp(4, 9)).residual_nmse_db > -80.0);
  }
}
