#ifndef HUBBARD_IMPURITY_MODEL_HPP
#define HUBBARD_IMPURITY_MODEL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace hubimp {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;

struct ModelParams {
  int L = 4;
  double U = 2.0;
  double p = 1.0;
  double phi = 0.0;
  double mu = 0.0;
  double h = 0.0;
  int N = 0;
  int M = 0;

  double u() const { return U / 4.0; }
};

struct DerivedCouplings {
  cplx V{0.0, 0.0};
  double gamma = 1.0;
  double eps1 = 0.0;
  double eps2 = 0.0;
  double delta = 0.0;

  // |V|^2 - eps1*eps2, the combination entering Z(k) and the cubic.
  double W() const { return std::norm(V) - eps1 * eps2; }
};

// Largest |phi| with gamma = 1 - 2 sinh^2(phi) > 0.
inline double phi_max() { return std::asinh(1.0 / std::sqrt(2.0)); }

inline double p_threshold(double U, double phi) {
  double s = std::sinh(2.0 * phi);
  return 0.25 * U * s * s;
}

inline double sqrt_argument(double U, double phi) {
  double s = std::sinh(2.0 * phi);
  return 1.0 - U * U / 16.0 * s * s;
}

// Coupling feasibility. Strict mode enforces the model invariants;
// relaxed mode admits the free limits U = 0 and p = (U/4) sinh^2(2 phi).
inline void validate_couplings(double U, double p, double phi, bool strict = true) {
  std::ostringstream os;
  if (!std::isfinite(U) || !std::isfinite(p) || !std::isfinite(phi))
    throw validation_error("non-finite coupling parameter");
  if (strict ? !(U > 0.0) : !(U >= 0.0)) {
    os << "U must be " << (strict ? "> 0" : ">= 0") << ", got " << U;
    throw validation_error(os.str());
  }
  if (!(std::abs(phi) < phi_max())) {
    os << "|phi| must be < asinh(1/sqrt 2) = " << phi_max() << ", got " << phi;
    throw validation_error(os.str());
  }
  double pt = p_threshold(U, phi);
  if (strict ? !(p > pt) : !(p >= pt)) {
    os << "p must be " << (strict ? "> " : ">= ") << "(U/4) sinh^2(2 phi) = " << pt << ", got " << p;
    throw validation_error(os.str());
  }
  if (sqrt_argument(U, phi) < 0.0) {
    os << "1 - (U^2/16) sinh^2(2 phi) = " << sqrt_argument(U, phi) << " is negative";
    throw validation_error(os.str());
  }
}

inline void validate_sector(const ModelParams& m) {
  std::ostringstream os;
  if (m.L < 1) throw validation_error("L must be positive");
  if (m.N < 1 || m.N > m.L) {
    os << "need 1 <= N <= L, got N=" << m.N << " L=" << m.L;
    throw validation_error(os.str());
  }
  if (m.M < 0 || m.M > m.N / 2) {
    os << "need 0 <= M <= floor(N/2), got M=" << m.M << " N=" << m.N;
    throw validation_error(os.str());
  }
  if (!(m.h >= 0.0)) throw validation_error("h must be >= 0");
  if (!std::isfinite(m.mu)) throw validation_error("mu must be finite");
}

inline DerivedCouplings derive_couplings(double U, double p, double phi, bool strict = true) {
  validate_couplings(U, p, phi, strict);
  double sh = std::sinh(phi), ch = std::cosh(phi);
  double root = std::sqrt(sqrt_argument(U, phi));
  DerivedCouplings c;
  c.V = cplx(-1.0 / ch - p * 0.5 * U * sh * sh / ch, p * sh / (ch * ch) * root);
  c.gamma = 1.0 - 2.0 * sh * sh;
  c.eps1 = U * sh * sh - p / (ch * ch);
  c.eps2 = -p * std::tanh(phi) * std::tanh(phi);
  c.delta = p * U * sh * sh / ch;
  return c;
}

inline DerivedCouplings derive_couplings(const ModelParams& m, bool strict = true) {
  return derive_couplings(m.U, m.p, m.phi, strict);
}

// P(z) = -eps2 z^3 + (W-1) z^2 - (eps1+eps2) z - 1, so that the Z-factor
// denominator is D(k) = P(e^{ik}) and Z(k) = P(e^{-ik}) / P(e^{ik}).
// Its roots are the reciprocals of the roots of the xi cubic.
class BoundaryPolynomial {
 public:
  explicit BoundaryPolynomial(const DerivedCouplings& c) {
    coef_ = {-1.0, -(c.eps1 + c.eps2), c.W() - 1.0, -c.eps2};
    scale_ = 0.0;
    for (double a : coef_) scale_ = std::max(scale_, std::abs(a));
    degree_ = 3;
    while (degree_ > 0 && std::abs(coef_[degree_]) <= 1e-14 * scale_) --degree_;
    if (degree_ > 0) {
      Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(degree_, degree_);
      for (int i = 1; i < degree_; ++i) comp(i, i - 1) = 1.0;
      for (int i = 0; i < degree_; ++i) comp(i, degree_ - 1) = -coef_[i] / coef_[degree_];
      Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
      for (int i = 0; i < degree_; ++i) roots_.push_back(polish(es.eigenvalues()(i)));
    }
  }

  int degree() const { return degree_; }
  const std::array<double, 4>& coefficients() const { return coef_; }
  const std::vector<cplx>& roots() const { return roots_; }
  double lead() const { return coef_[degree_]; }
  double scale() const { return scale_; }

  template <class T>
  T value(const T& z) const {
    T r = T(coef_[3]);
    for (int i = 2; i >= 0; --i) r = r * z + T(coef_[i]);
    return r;
  }

  cplx derivative(cplx z) const { return (3.0 * coef_[3] * z + 2.0 * coef_[2]) * z + coef_[1]; }

  // Continuous phase Phi(k) = -i ln Z(k) for real k, Phi(0) = 0, odd in k.
  double phase(double k) const {
    double s = 0.0;
    cplx e = std::polar(1.0, k);
    for (const cplx& r : roots_) {
      if (std::abs(r) < 1.0)
        s += k + std::arg(1.0 - r / e) - std::arg(1.0 - r);
      else
        s += std::arg(1.0 - e / r) - std::arg(1.0 - 1.0 / r);
    }
    return -2.0 * s;
  }

  // dPhi/dk for real k.
  double phase_derivative(double k) const {
    cplx z = std::polar(1.0, k);
    return -2.0 * std::real(z * derivative(z) / value(z));
  }

 private:
  cplx polish(cplx z) const {
    for (int it = 0; it < 4; ++it) {
      cplx d = derivative(z);
      if (std::abs(d) == 0.0) break;
      cplx dz = value(z) / d;
      z -= dz;
      if (std::abs(dz) <= 1e-16 * std::max(1.0, std::abs(z))) break;
    }
    return z;
  }

  std::array<double, 4> coef_{};
  double scale_ = 0.0;
  int degree_ = 0;
  std::vector<cplx> roots_;
};

// Z(k) = D(-k)/D(k) with D(k) = e^{2ik}(W - 2 eps2 cos k) - e^{ik}(eps1 + 2 cos k).
inline cplx reflection_factor_Z(cplx k, const DerivedCouplings& c) {
  BoundaryPolynomial P(c);
  cplx z = std::exp(cplx(0.0, 1.0) * k);
  cplx den = P.value(z);
  double scale = 0.0;
  for (double a : P.coefficients()) scale += std::abs(a);
  scale *= std::max({1.0, std::abs(z), std::pow(std::abs(z), 3)});
  if (std::abs(den) <= 1e-14 * scale) throw pole_error("reflection factor Z(k): denominator vanishes");
  return P.value(1.0 / z) / den;
}

// d/dk ln Z(k) from the analytic derivative of the rational form.
inline cplx dlnZ(cplx k, const DerivedCouplings& c) {
  BoundaryPolynomial P(c);
  const cplx I(0.0, 1.0);
  cplx z = std::exp(I * k), w = 1.0 / z;
  cplx dz = P.value(z), dw = P.value(w);
  if (std::abs(dz) == 0.0 || std::abs(dw) == 0.0) throw pole_error("d ln Z/dk: pole");
  return -I * (w * P.derivative(w) / dw + z * P.derivative(z) / dz);
}

}  // namespace hubimp

#endif
