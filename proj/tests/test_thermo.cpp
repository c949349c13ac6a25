#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include <hubbard_impurity/thermo.hpp>

using namespace hubimp;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

using gk = boost::math::quadrature::gauss_kronrod<double, 61>;

// int_{-Q}^{Q} g with breakpoints, adaptive Gauss-Kronrod.
template <class F>
double integrate_pieces(F g, std::vector<double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < b.size(); ++i) s += gk::integrate(g, b[i], b[i + 1], 20, 1e-13);
  return s;
}

// Residual of rho(k) = f(k) + cos k int G1(sin k - sin k') rho(k') dk' at k.
template <class R, class F>
double equation_residual(R rho, F f, double u, double k, const std::vector<double>& breaks) {
  double conv = integrate_pieces([&](double x) { return kernel_G(1.0, std::sin(k) - std::sin(x), u) * rho(x); }, breaks);
  return rho(k) - f(k) - std::cos(k) * conv;
}

}  // namespace

TEST_CASE("host density solves its integral equation", "[thermo]") {
  auto h = solve_host_h0(0.7, 1.25);
  auto rho = [&](double k) { return h.density(k); };
  auto f = [](double) { return 1.0 / pi; };
  for (double k : {-1.5, -0.3, 0.0, 0.8, h.Q * 0.999})
    CHECK(std::abs(equation_residual(rho, f, h.u, k, {-h.Q, 0.0, h.Q})) < 1e-12);
  CHECK_THAT(0.5 * h.integral(), WithinAbs(0.7, 1e-12));
}

TEST_CASE("host dressed energy vanishes at the Fermi points", "[thermo]") {
  auto h = solve_host_h0(0.45, 0.8);
  CHECK(std::abs(h.dressed_energy(h.Q)) < 1e-12);
  CHECK(std::abs(h.dressed_energy(-h.Q)) < 1e-12);
  CHECK(h.dressed_energy(0.0) < 0.0);
  // independent residual of eps = mu - 2 cos k + int G1 cos k' eps(k')
  auto eps = [&](double k) { return h.dressed_energy(k); };
  for (double k : {0.0, 0.5 * h.Q}) {
    double conv = integrate_pieces([&](double x) { return kernel_G(1.0, std::sin(k) - std::sin(x), h.u) * std::cos(x) * eps(x); },
                                   {-h.Q, 0.0, h.Q});
    CHECK(std::abs(eps(k) - (h.mu - 2.0 * std::cos(k)) - conv) < 1e-12);
  }
}

TEST_CASE("strong coupling: host reduces to free spinless filling", "[thermo]") {
  double n = 0.4, U = 2e4;
  auto h = solve_host_h0(n, U / 4.0);
  CHECK_THAT(h.Q, WithinAbs(n * pi, 1e-4));
  // spinless band plus the first superexchange correction
  // -(4 ln2 / U) n^2 (1 - sin(2 pi n) / (2 pi n)) to the energy per site
  double d = 2.0 * n - std::sin(2.0 * pi * n) / (2.0 * pi) - n * std::cos(2.0 * pi * n);
  CHECK_THAT(h.mu, WithinAbs(2.0 * std::cos(pi * n) + 4.0 * std::log(2.0) / U * d, 1e-6));
}

TEST_CASE("half filling: Fermi point at pi and the Mott gap edge", "[thermo]") {
  for (double u : {0.5, 1.25, 2.5}) {
    auto h = solve_host_h0(1.0, u);
    CHECK(h.Q == pi);
    // lower Hubbard band edge 2 - 4 int J1(w) / (w (1 + e^{2uw})) dw
    boost::math::quadrature::exp_sinh<double> es;
    double I = es.integrate([u](double w) {
      return boost::math::cyl_bessel_j(1, w) / (w * (1.0 + std::exp(2.0 * u * w)));
    });
    CHECK_THAT(-h.mu, WithinAbs(2.0 - 4.0 * I, 1e-10));
  }
}

TEST_CASE("impurity charge density solves the coupled equations", "[thermo]") {
  double U = 5.0, phi = 0.3;
  for (double p : {0.7, 1.8, 3.5, 6.0}) {
    auto d = solve_densities(U, p, phi, 0.7);
    const auto& s = d.impurity.charge;
    auto br = s.driving().breakpoints(d.host.Q);
    for (double k : {-1.2, 0.05, 0.9, 1.7}) {
      double r = equation_residual([&](double x) { return s.value(x); }, [&](double x) { return s.driving()(x); },
                                   d.host.u, k, br);
      CHECK(std::abs(r) < 1e-10);
    }
  }
}

TEST_CASE("impurity densities are even in k", "[thermo][property]") {
  auto d = solve_densities(5.0, 3.5, 0.3, 0.6);
  for (double k : {0.1, 0.7, 1.3}) {
    CHECK_THAT(d.impurity.charge.value(k), WithinAbs(d.impurity.charge.value(-k), 1e-12));
    CHECK_THAT(d.boundary.charge.value(k), WithinAbs(d.boundary.charge.value(-k), 1e-12));
  }
}

TEST_CASE("charge solutions are linear in the driving", "[thermo][property]") {
  auto host = solve_host_h0(0.6, 1.25);
  auto c = derive_couplings(5.0, 4.0, 0.3);
  auto r = classify_region(solve_xi(c), 1.25);
  REQUIRE(r.region == Region::III);
  auto full = impurity_driving_h0(BoundConfig::TypeII, r, c).charge;
  ChargeDriving z = full, rest = full;
  z.a_terms.clear();
  z.g_terms.clear();
  rest.z_term.reset();
  ChargeSolution sf(host.kernel, full), sz(host.kernel, z), sr(host.kernel, rest);
  CHECK_THAT(sf.integral(), WithinAbs(sz.integral() + sr.integral(), 1e-12));
  for (double k : {0.0, 0.6, 1.4}) CHECK_THAT(sf.value(k), WithinAbs(sz.value(k) + sr.value(k), 1e-12));
}

TEST_CASE("spin density integral matches direct quadrature", "[thermo]") {
  auto d = solve_densities(5.0, 2.0, 0.3, 0.5);
  boost::math::quadrature::sinh_sinh<double> ss(8);
  double direct = ss.integrate([&](double l) { return d.impurity.spin(l); }, 1e-10);
  CHECK_THAT(d.impurity.spin_integral(), WithinAbs(direct, 1e-9));
  double direct_b = ss.integrate([&](double l) { return d.boundary.spin(l); }, 1e-10);
  CHECK_THAT(d.boundary.spin_integral(), WithinAbs(direct_b, 1e-9));
}

TEST_CASE("zero-field magnetizations vanish", "[thermo][property]") {
  for (double p : {0.7, 1.8, 3.5, 6.0}) {
    auto o = observables(solve_densities(5.0, p, 0.3, 0.7));
    CHECK(std::abs(o.m_i) < 1e-12);
    CHECK(std::abs(o.m_b) < 1e-12);
    CHECK(std::abs(o.m_inf) < 1e-14);
    CHECK_THAT(o.n_inf, WithinAbs(0.7, 1e-12));
  }
}

TEST_CASE("step terms follow the region", "[thermo]") {
  auto o1 = observables(solve_densities(5.0, 0.7, 0.3, 0.7));
  CHECK(o1.steps.H_xi_1 == 0.0);
  auto o4 = observables(solve_densities(5.0, 6.0, 0.3, 0.7));
  CHECK(o4.steps.H_xi_1 == 1.0);
  CHECK(o4.steps.H_xi_xi1 == 1.0);
  CHECK(o4.steps.H_xi_xi2 == 1.0);
  auto d = solve_densities(5.0, 6.0, 0.3, 0.7);
  CHECK_THAT(o4.n_i, WithinAbs(0.5 * d.impurity.charge.integral() + 2.0, 1e-15));
}

TEST_CASE("impurity occupation approaches one in Region II at low density", "[thermo]") {
  double prev = 0.0;
  for (double n : {0.3, 0.1, 0.02}) {
    double ni = observables(solve_densities(5.0, 1.8, 0.3, n)).n_i;
    CHECK(ni > prev);
    prev = ni;
  }
  CHECK(prev > 0.9);
  CHECK(prev < 1.0);
}

TEST_CASE("impurity energy through the dressed energy", "[thermo]") {
  auto host = solve_host_h0(0.7, 1.25);
  auto c = derive_couplings(5.0, 1.8, 0.3);
  auto r = classify_region(solve_xi(c), 1.25);
  auto rep = impurity_energy(host, c, r);
  for (BoundConfig cfg : {BoundConfig::None, BoundConfig::TypeI}) {
    auto f = impurity_driving_h0(cfg, r, c).charge;
    double via_eps = 0.5 * integrate_pieces([&](double k) { return f(k) * host.dressed_energy(k); }, f.breakpoints(host.Q));
    double expect = rep.eps(cfg) - (cfg == BoundConfig::TypeI ? rep.E1 : 0.0);
    CHECK_THAT(via_eps, WithinAbs(expect, 1e-11));
  }
  auto b = boundary_driving_h0(1.25).charge;
  double eb = 0.5 * integrate_pieces([&](double k) { return b(k) * host.dressed_energy(k); }, {-host.Q, 0.0, host.Q});
  CHECK_THAT(eb - 0.5 * (host.mu - 2.0), WithinAbs(rep.eps_b, 1e-11));
}

TEST_CASE("bound-state energy constants", "[thermo]") {
  CHECK_THAT(bound_energy_E1(2.0, 0.3), WithinAbs(-2.5 + 0.3, 1e-15));
  CHECK_THAT(bound_energy_E2(2.0, 1.0, 0.0), WithinAbs(-2.0, 1e-15));
}

TEST_CASE("impurity energy ordering switches at the thresholds", "[thermo]") {
  double U = 5.0, phi = 0.3, u = U / 4.0;
  auto th = region_thresholds(u);
  auto host = solve_host_h0(0.7, u);
  auto argmin = [&](double p) {
    auto c = derive_couplings(U, p, phi);
    return impurity_energy(host, c, classify_region(solve_xi(c), u)).argmin;
  };
  CHECK(argmin(0.95) == BoundConfig::None);
  CHECK(argmin(1.05) == BoundConfig::TypeI);
  CHECK(argmin(th.xi1 - 0.02) == BoundConfig::TypeI);
  CHECK(argmin(th.xi1 + 0.02) == BoundConfig::TypeII);
  CHECK(argmin(th.xi2 - 0.02) == BoundConfig::TypeII);
  CHECK(argmin(th.xi2 + 0.02) == BoundConfig::TypeIII);
}

TEST_CASE("Z pole on the integration path is reported", "[thermo][errors]") {
  auto c = derive_couplings(5.0, 1.0, 0.3);
  auto r = classify_region(solve_xi(c), 1.25);
  CHECK_THROWS_AS(impurity_driving_h0(BoundConfig::None, r, c), pole_error);
  CHECK_THROWS_AS(impurity_driving_h0(BoundConfig::TypeII, classify_region(2.0, 1.25), derive_couplings(5.0, 2.0, 0.3)),
                  validation_error);
  CHECK_THROWS_AS(solve_host_h0(1.2, 1.0), validation_error);
  CHECK_THROWS_AS(solve_host_h0(0.0, 1.0), validation_error);
}

TEST_CASE("doubling the Nystrom nodes leaves scalars unchanged", "[thermo][convergence]") {
  for (double p : {0.7, 1.8, 3.5, 6.0}) {
    auto a = observables(solve_densities(5.0, p, 0.3, 0.7, 257));
    auto b = observables(solve_densities(5.0, p, 0.3, 0.7, 513));
    CHECK_THAT(a.n_i, WithinRel(b.n_i, 1e-9));
    CHECK_THAT(a.n_b, WithinRel(b.n_b, 1e-9));
  }
}
