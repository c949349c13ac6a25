#ifndef HUBBARD_IMPURITY_KERNELS_HPP
#define HUBBARD_IMPURITY_KERNELS_HPP

#include <cmath>
#include <complex>

#include "errors.hpp"
#include "model.hpp"
#include "special.hpp"

namespace hubimp {

namespace detail {

// Re[psi(a + i y) - psi(b + i y)]. For large |y| the two digammas cancel, so the
// difference is taken term by term in the asymptotic series.
inline double digamma_diff_re(double a, double b, double y) {
  if (std::abs(y) < 25.0) return (digamma(cplx(a, y)) - digamma(cplx(b, y))).real();
  cplx za(a, y), zb(b, y);
  cplx d = (a - b) / zb;
  // Re log(1 + d)
  double lg = 0.5 * std::log1p(2.0 * d.real() + std::norm(d));
  cplx half = (a - b) / (2.0 * za * zb);
  static constexpr double bern[] = {1.0 / 12.0, -1.0 / 120.0, 1.0 / 252.0, -1.0 / 240.0, 1.0 / 132.0};
  cplx wa = 1.0 / (za * za), wb = 1.0 / (zb * zb), pa = wa, pb = wb, series = 0.0;
  for (double c : bern) {
    series += c * (pa - pb);
    pa *= wa;
    pb *= wb;
  }
  return lg + half.real() - series.real();
}

}  // namespace detail

// Lorentzian a_n(x) = (1/2pi) n / (x^2 + n^2/4), n > 0.
inline double kernel_a(double n, double x) {
  if (!(n > 0.0)) throw validation_error("kernel_a: n must be positive");
  return n / (2.0 * pi * (x * x + 0.25 * n * n));
}

// Signed extension sign(n) a_|n|, used where drivings carry a_n with n < 0.
inline double kernel_a_signed(double n, double x) {
  if (n == 0.0) throw pole_error("kernel_a_signed: a_0 is a delta function");
  return n / (2.0 * pi * (x * x + 0.25 * n * n));
}

inline double kernel_a_fourier(double n, double omega) { return std::exp(-0.5 * n * std::abs(omega)); }

// G_n(x) = (1/2pi) int e^{-i w x} e^{-n u |w|} / (2 cosh u w) dw, closed form via digamma.
inline double kernel_G(double n, double x, double u) {
  if (!(u > 0.0)) throw validation_error("kernel_G: u must be positive");
  if (!(n > -1.0)) throw validation_error("kernel_G: G_n is not integrable for n <= -1");
  if (n == 0.0) {
    double y = std::abs(pi * x / (2.0 * u));
    double e = std::exp(-y);
    return e / (2.0 * u * (1.0 + e * e));
  }
  double y = 0.25 * x / u;
  return detail::digamma_diff_re(0.25 * (n + 3.0), 0.25 * (n + 1.0), y) / (4.0 * pi * u);
}

inline double kernel_G_fourier(double n, double omega, double u) {
  double a = u * std::abs(omega);
  // e^{-n a} / (2 cosh a) without overflow
  return std::exp(-(n + 1.0) * a) / (1.0 + std::exp(-2.0 * a));
}

// Wiener-Hopf factor of [1 - G1~(w)]^{-1}; G-(w) = G+(-w).
inline cplx G_plus(cplx omega, double u) {
  if (!(u > 0.0)) throw validation_error("G_plus: u must be positive");
  cplx s = cplx(0.0, -1.0) * u * omega / pi;  // -i u w / pi
  cplx arg = 0.5 + s;
  if (std::abs(arg.imag()) < 1e-300 && arg.real() <= 0.0 && arg.real() == std::floor(arg.real()))
    throw pole_error("G_plus: Gamma pole");
  cplx power = std::abs(s) == 0.0 ? cplx(1.0) : std::exp(s * std::log(s / std::exp(1.0)));
  return std::sqrt(2.0 * pi) * std::exp(-lgamma(arg)) * power;
}

inline cplx G_minus(cplx omega, double u) { return G_plus(-omega, u); }

}  // namespace hubimp

#endif
