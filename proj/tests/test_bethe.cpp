#include <catch_amalgamated.hpp>

#include <algorithm>

#include <hubbard_impurity/bethe.hpp>

using namespace hubimp;
using Catch::Matchers::WithinAbs;

namespace {

ModelParams sector(int L, double U, double p, double phi, int N, int M) {
  ModelParams m;
  m.L = L;
  m.U = U;
  m.p = p;
  m.phi = phi;
  m.N = N;
  m.M = M;
  return m;
}

}  // namespace

TEST_CASE("free point: charge roots are pi m / (L + 1)", "[bethe]") {
  // spin rapidities need U > 0, so the free check uses the fully polarized sector
  ModelParams m = sector(5, 0.0, 0.0, 0.0, 3, 0);
  BaeOptions opt;
  opt.strict = false;
  BetheState st = solve_bae(m, RootConfig::AllReal, nullptr, std::nullopt, opt);
  std::vector<double> k;
  for (const cplx& z : st.charge_roots) k.push_back(z.real());
  std::sort(k.begin(), k.end());
  for (int j = 0; j < 3; ++j) CHECK_THAT(k[j], WithinAbs(pi * (j + 1) / 6.0, 1e-10));
  double e = 0.0;
  for (double x : k) e -= 2.0 * std::cos(x);
  CHECK_THAT(st.energy, WithinAbs(e, 1e-10));
}

TEST_CASE("ground-state BAE energies match ED in every region", "[bethe][ed]") {
  for (double p : {0.7, 1.3, 2.3, 3.0}) {
    ModelParams m = sector(4, 2.0, p, 0.5, 0, 0);
    auto rep = verify_against_ed(m, {{1, 0}, {1, 1}, {2, 1}, {2, 2}});
    CHECK(rep.max_diff < 1e-8);
  }
}

TEST_CASE("ground configuration follows the region", "[bethe]") {
  ModelParams m = sector(4, 2.0, 1.3, 0.5, 4, 2);
  BetheState st = solve_ground_state(m);
  CHECK(st.config == RootConfig::OneImagK);
  CHECK(st.charge_roots.back().imag() > 0.0);
  CHECK(std::abs(st.charge_roots.back().real()) < 1e-6);
  m.p = 0.7;
  CHECK(solve_ground_state(m).config == RootConfig::AllReal);
}

TEST_CASE("solutions satisfy the product-form equations", "[bethe][property]") {
  ModelParams m = sector(6, 5.0, 3.0, 0.3, 4, 2);
  BetheState st = solve_ground_state(m);
  for (double r : bae_residual(st, m)) CHECK(r < 1e-9);
  CHECK(check_state(st, 1e-10).ok);
}

TEST_CASE("chemical potential and field enter the energy additively", "[bethe][property]") {
  ModelParams m = sector(4, 2.0, 1.3, 0.5, 3, 1);
  double e0 = solve_ground_state(m).energy;
  m.mu = 0.3;
  m.h = 0.2;
  double e1 = solve_ground_state(m).energy;
  CHECK_THAT(e1 - e0, WithinAbs(0.3 * 3 - 0.1 * (3 - 2), 1e-10));
}

TEST_CASE("bound-state deviation shrinks with L", "[bethe]") {
  double prev = 1e300;
  for (int L : {6, 10, 14}) {
    ModelParams m = sector(L, 2.0, 1.3, 0.5, L, L / 2);
    BetheState st = solve_bae(m, RootConfig::OneImagK);
    double d = std::abs(st.charge_roots.back().imag() - std::log(1.3));
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("configuration names round-trip", "[bethe]") {
  for (RootConfig c : {RootConfig::AllReal, RootConfig::OneImagK, RootConfig::ImagKPlusSpinString, RootConfig::TwoImagK})
    CHECK(root_config_from_string(to_string(c)) == c);
  CHECK_THROWS_AS(root_config_from_string("bogus"), validation_error);
}

TEST_CASE("unavailable or malformed requests are rejected", "[bethe][errors]") {
  ModelParams m = sector(4, 2.0, 1.3, 0.5, 5, 1);
  CHECK_THROWS_AS(solve_ground_state(m), validation_error);
  m.N = 4;
  QuantumNumberSet q;
  q.charge = {1};
  CHECK_THROWS_AS(solve_bae(m, RootConfig::AllReal, nullptr, q), validation_error);
  CHECK_THROWS_AS(verify_against_ed(sector(8, 2.0, 1.3, 0.5, 0, 0), {{1, 1}}), validation_error);
}
