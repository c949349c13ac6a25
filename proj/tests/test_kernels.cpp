#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/special_functions/digamma.hpp>

#include <hubbard_impurity/kernels.hpp>

using namespace hubimp;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// (1/pi) int_0^inf cos(w x) f(w) dw by Ooura's double-exponential rule.
template <class F>
double fourier_cos_inverse(F f, double x) {
  static boost::math::quadrature::ooura_fourier_cos<double> ooura(1e-14);
  if (x == 0.0) {
    boost::math::quadrature::exp_sinh<double> es;
    return es.integrate(f) / pi;
  }
  return ooura.integrate(f, std::abs(x)).first / pi;
}

}  // namespace

TEST_CASE("digamma matches Boost on the real axis", "[special]") {
  for (double x : {-3.7, -0.5, 0.1, 0.5, 1.0, 2.25, 7.0, 30.0, 400.0})
    CHECK_THAT(digamma(cplx(x)).real(), WithinRel(boost::math::digamma(x), 1e-13));
  CHECK_THROWS_AS(digamma(cplx(-2.0)), pole_error);
}

TEST_CASE("complex digamma recurrence and derivative of lgamma", "[special][property]") {
  for (cplx z : {cplx(0.3, 1.2), cplx(-1.4, 0.7), cplx(5.0, -3.0), cplx(0.75, 20.0)}) {
    cplx d = digamma(z + 1.0) - digamma(z) - 1.0 / z;
    CHECK(std::abs(d) < 1e-13);
    const double h = 1e-5;
    cplx fd = (lgamma(z + h) - lgamma(z - h)) / (2.0 * h);
    CHECK(std::abs(fd - digamma(z)) < 1e-8);
  }
}

TEST_CASE("log gamma", "[special]") {
  for (double x : {0.3, 1.0, 2.5, 10.0, 50.5}) CHECK_THAT(lgamma(cplx(x)).real(), WithinAbs(std::lgamma(x), 1e-12));
  CHECK_THAT(gamma(cplx(5.0)).real(), WithinRel(24.0, 1e-14));
  for (double y : {0.0, 0.8, 3.0, 12.0}) {
    // |Gamma(1/2 + i y)|^2 = pi / cosh(pi y)
    double lhs = std::exp(2.0 * lgamma(cplx(0.5, y)).real());
    CHECK_THAT(lhs, WithinRel(pi / std::cosh(pi * y), 1e-12));
  }
}

TEST_CASE("Gauss rules are exact on their polynomial spaces", "[special]") {
  auto gl = gauss_legendre(12, -1.0, 3.0);
  CHECK_THAT(gl.integrate([](double x) { return std::pow(x, 23); }), WithinRel((std::pow(3.0, 24) - 1.0) / 24.0, 1e-13));
  auto lg = gauss_laguerre(20);
  double fact = 1.0;
  for (int k = 0; k <= 20; ++k) {
    if (k > 0) fact *= k;
    CHECK_THAT(lg.integrate([k](double x) { return std::pow(x, k); }), WithinRel(fact, 1e-10));
  }
}

TEST_CASE("adaptive rule resolves a narrow Lorentzian", "[special]") {
  auto f = [](double x) { return kernel_a(1e-3, x - 0.2); };
  auto r = adaptive_rule(f, {-pi, 0.0, pi});
  double exact = (std::atan((pi - 0.2) / 5e-4) + std::atan((pi + 0.2) / 5e-4)) / pi;
  CHECK_THAT(r.integrate(f), WithinAbs(exact, 1e-12));
}

TEST_CASE("a_n is normalized", "[kernels]") {
  boost::math::quadrature::sinh_sinh<double> ss;
  for (double n : {0.1, 1.0, 2.5, 7.0}) CHECK_THAT(ss.integrate([n](double x) { return kernel_a(n, x); }), WithinAbs(1.0, 1e-10));
  CHECK_THROWS_AS(kernel_a(0.0, 1.0), validation_error);
  CHECK_THROWS_AS(kernel_a_signed(0.0, 1.0), pole_error);
  CHECK_THAT(kernel_a_signed(-2.0, 0.3), WithinAbs(-kernel_a(2.0, 0.3), 1e-16));
}

TEST_CASE("G_n closed form agrees with its Fourier integral", "[kernels]") {
  for (double u : {0.3, 1.25, 3.0})
    for (double n : {-0.5, 0.0, 0.4, 1.0, 2.0, 3.7})
      for (double x : {0.0, 0.05, 0.6, 2.0, 9.0}) {
        double ref = fourier_cos_inverse([&](double w) { return kernel_G_fourier(n, w, u); }, x);
        CHECK_THAT(kernel_G(n, x, u), WithinAbs(ref, 1e-10));
      }
}

TEST_CASE("G kernel identities", "[kernels][property]") {
  double u = 1.25;
  // algebraic tails for n != 0: integrate the half line
  boost::math::quadrature::exp_sinh<double> es;
  for (double n : {0.0, 1.0, 2.5})
    CHECK_THAT(2.0 * es.integrate([&](double x) { return kernel_G(n, x, u); }, 1e-13), WithinAbs(0.5, 1e-10));
  for (double x = -6.0; x <= 6.0; x += 0.25)
    CHECK_THAT(kernel_G(2.0, x, u), WithinAbs(kernel_a(2.0 * u, x) - kernel_G(0.0, x, u), 1e-14));
  CHECK_THROWS_AS(kernel_G(-1.0, 0.0, u), validation_error);
  CHECK_THROWS_AS(kernel_G(1.0, 0.0, 0.0), validation_error);
}

TEST_CASE("Wiener-Hopf factor", "[kernels]") {
  for (double u : {0.5, 1.25, 2.0}) {
    CHECK_THAT(std::abs(G_plus(0.0, u)), WithinAbs(std::sqrt(2.0), 1e-12));
    cplx at_pole = G_plus(cplx(0.0, pi / (2.0 * u)), u);
    CHECK_THAT(at_pole.real(), WithinRel(std::sqrt(pi / std::exp(1.0)), 1e-13));
    for (double w : {-7.0, -1.0, 0.3, 2.0, 15.0}) {
      // G+(w) G-(w) = [1 - G1~(w)]^{-1} = 1 + e^{-2u|w|}
      cplx prod = G_plus(w, u) * G_minus(w, u);
      CHECK_THAT(prod.real(), WithinRel(1.0 / (1.0 - kernel_G_fourier(1.0, w, u)), 1e-12));
      CHECK_THAT(std::norm(G_plus(w, u)), WithinRel(1.0 + std::exp(-2.0 * u * std::abs(w)), 1e-12));
    }
  }
  CHECK_THAT(std::abs(G_plus(400.0, 1.0)), WithinAbs(1.0, 1e-9));
}
