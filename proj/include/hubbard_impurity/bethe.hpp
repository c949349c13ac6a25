#ifndef HUBBARD_IMPURITY_BETHE_HPP
#define HUBBARD_IMPURITY_BETHE_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "dual.hpp"
#include "errors.hpp"
#include "exact_diag.hpp"
#include "model.hpp"
#include "region.hpp"

namespace hubimp {

enum class RootConfig { AllReal, OneImagK, ImagKPlusSpinString, TwoImagK };

inline const char* to_string(RootConfig c) {
  switch (c) {
    case RootConfig::AllReal: return "AllReal";
    case RootConfig::OneImagK: return "OneImagK";
    case RootConfig::ImagKPlusSpinString: return "ImagKPlusSpinString";
    case RootConfig::TwoImagK: return "TwoImagK";
  }
  return "?";
}

inline RootConfig root_config_from_string(const std::string& s) {
  for (RootConfig c : {RootConfig::AllReal, RootConfig::OneImagK, RootConfig::ImagKPlusSpinString, RootConfig::TwoImagK})
    if (s == to_string(c)) return c;
  if (s == "real") return RootConfig::AllReal;
  if (s == "one") return RootConfig::OneImagK;
  if (s == "string") return RootConfig::ImagKPlusSpinString;
  if (s == "two") return RootConfig::TwoImagK;
  throw validation_error("unknown root configuration: " + s);
}

struct ConfigShape {
  int n_imag_k;
  bool string;
};

inline ConfigShape shape_of(RootConfig c) {
  switch (c) {
    case RootConfig::AllReal: return {0, false};
    case RootConfig::OneImagK: return {1, false};
    case RootConfig::ImagKPlusSpinString: return {1, true};
    case RootConfig::TwoImagK: return {2, true};
  }
  return {0, false};
}

// Whether the thermodynamic string values exist for this xi.
inline bool config_available(RootConfig c, const RegionReport& r) {
  switch (c) {
    case RootConfig::AllReal: return true;
    case RootConfig::OneImagK: return r.xi > 1.0;
    case RootConfig::ImagKPlusSpinString: return r.xi > r.xi1;
    case RootConfig::TwoImagK: return r.xi > r.xi2;
  }
  return false;
}

inline RootConfig config_for_region(Region r) {
  switch (r) {
    case Region::I: return RootConfig::AllReal;
    case Region::II: return RootConfig::OneImagK;
    case Region::III: return RootConfig::ImagKPlusSpinString;
    case Region::IV: return RootConfig::TwoImagK;
  }
  return RootConfig::AllReal;
}

struct QuantumNumberSet {
  std::vector<int> charge;
  std::vector<int> spin;
};

// Charge roots: real ones (ascending), then k_{N-1} = i eta (TwoImagK), then k_N = i kappa.
// Spin roots: real ones (ascending), then lambda_M = i Lambda for string configurations.
// Imaginary roots are stored as thermodynamic value plus deviation, which keeps
// exponentially small deviations resolvable at large L.
struct BetheState {
  RootConfig config = RootConfig::AllReal;
  std::vector<cplx> charge_roots;
  std::vector<cplx> spin_roots;
  QuantumNumberSet quantum_numbers;
  double kappa0 = 0.0, eta0 = 0.0, Lambda0 = 0.0;
  cplx dkappa{0.0}, deta{0.0}, dLambda{0.0};  // k_N = i kappa0 + dkappa, etc.
  double residual = std::numeric_limits<double>::infinity();
  double energy = std::numeric_limits<double>::quiet_NaN();

  int n_real_charge() const { return static_cast<int>(charge_roots.size()) - shape_of(config).n_imag_k; }
  int n_real_spin() const { return static_cast<int>(spin_roots.size()) - (shape_of(config).string ? 1 : 0); }
  // |Im k_N - ln xi| for bound-state configurations.
  double bound_state_deviation() const { return std::abs(dkappa.imag()); }
};

struct BaeOptions {
  double tol = 1e-10;
  int max_newton = 100;
  int max_halvings = 40;
  int seed_sweeps = 8;
  bool strict = true;
};

namespace detail {

inline double log_abs(double x) { return std::log(std::abs(x)); }
inline Dual<double> log_abs(const Dual<double>& x) { return {std::log(std::abs(x.v)), x.d / x.v}; }
inline double sgn(double x) { return x < 0.0 ? -1.0 : 1.0; }
inline double sgn(const Dual<double>& x) { return sgn(x.v); }

// asinh(a + d) - asinh(a) without cancellation for small d.
template <class T>
T asinh_shift(double a, const T& d) {
  using std::sqrt;
  using std::log1p;
  double r0 = std::sqrt(a * a + 1.0);
  T r1 = sqrt((a + d) * (a + d) + 1.0);
  T num = d + d * (2.0 * a + d) / (r1 + r0);
  return log1p(num / (a + r0));
}

inline double reduce_2pi(double x) { return x - 2.0 * pi * std::round(x / (2.0 * pi)); }

}  // namespace detail

// Equations of one (N, M, configuration) problem.
class BaeSystem {
 public:
  BaeSystem(const ModelParams& m, RootConfig cfg, bool strict = true)
      : m_(m), cfg_(cfg), shape_(shape_of(cfg)), c_(derive_couplings(m, strict)), P_(c_) {
    validate_sector(m);
    u_ = m.u();
    nr_ = m.N - shape_.n_imag_k;
    mr_ = m.M - (shape_.string ? 1 : 0);
    if (nr_ < 0 || mr_ < 0) throw validation_error("configuration needs more roots than N, M provide");
    if (u_ <= 0.0 && m.M > 0) throw validation_error("spin roots need U > 0");
    xi_ = solve_xi(c_);
    region_ = classify_region(xi_, u_ > 0.0 ? u_ : 1e-300);
    if (!config_available(cfg, region_)) {
      std::ostringstream os;
      os << "configuration " << to_string(cfg) << " unavailable at xi = " << xi_;
      throw validation_error(os.str());
    }
    if (shape_.n_imag_k >= 1) {
      kappa0_ = std::log(xi_);
      z1_ = 1.0 / xi_;
      // P(y) = (y - z1) Q(y), synthetic division.
      int d = P_.degree();
      const auto& a = P_.coefficients();
      q_.assign(d, 0.0);
      q_[d - 1] = a[d];
      for (int i = d - 1; i >= 1; --i) q_[i - 1] = a[i] + z1_ * q_[i];
    }
    double t = 0.5 * (xi_ - 1.0 / xi_);
    if (shape_.string) Lambda0_ = t - u_;
    if (shape_.n_imag_k == 2) eta0_ = std::asinh(Lambda0_ - u_);
  }

  const ModelParams& params() const { return m_; }
  RootConfig config() const { return cfg_; }
  const DerivedCouplings& couplings() const { return c_; }
  const RegionReport& region() const { return region_; }
  int n_real_charge() const { return nr_; }
  int n_real_spin() const { return mr_; }
  double kappa0() const { return kappa0_; }
  double eta0() const { return eta0_; }
  double Lambda0() const { return Lambda0_; }

  // ---------------------------------------------------------------- real stage
  // Unknowns: [k_1..k_nr | lambda_1..lambda_mr | a_kappa | a_eta | a_Lambda] where
  // a = log|v| of the vanishing factor v attached to each imaginary root.
  int n_unknowns() const { return nr_ + mr_ + shape_.n_imag_k + (shape_.string ? 1 : 0); }
  int idx_kappa() const { return nr_ + mr_; }
  int idx_eta() const { return nr_ + mr_ + 1; }
  int idx_Lambda() const { return nr_ + mr_ + shape_.n_imag_k; }

  struct Signs {
    double s1 = 1.0, s2 = 1.0, s3 = 1.0;
  };

  template <class T>
  struct Imag {
    T kappa, eta, Lambda;  // full values
    T dk, deta, dLam;      // deviations from kappa0, eta0, Lambda0
  };

  template <class T>
  Imag<T> imag_values(const std::vector<T>& x, const Signs& sg) const {
    using std::exp;
    using std::log1p;
    using std::sinh;
    using std::cosh;
    Imag<T> im{T(0.0), T(0.0), T(0.0), T(0.0), T(0.0), T(0.0)};
    if (shape_.n_imag_k >= 1) {
      T v1 = sg.s1 * exp(x[idx_kappa()]);
      im.dk = -log1p(v1 * std::exp(kappa0_));
      im.kappa = kappa0_ + im.dk;
    }
    if (shape_.string) {
      T v2 = sg.s2 * exp(x[idx_Lambda()]);
      im.dLam = 2.0 * cosh(kappa0_ + 0.5 * im.dk) * sinh(0.5 * im.dk) - v2;
      im.Lambda = Lambda0_ + im.dLam;
    }
    if (shape_.n_imag_k == 2) {
      T v3 = sg.s3 * exp(x[idx_eta()]);
      im.deta = detail::asinh_shift(std::sinh(eta0_), v3 + im.dLam);
      im.eta = eta0_ + im.deta;
    }
    return im;
  }

  template <class T>
  T phase_T(const T& k) const {
    if constexpr (std::is_same_v<T, double>)
      return P_.phase(k);
    else
      return T(P_.phase(k.v), P_.phase_derivative(k.v) * k.d);
  }

  template <class T>
  T poly(const std::vector<double>& coef, const T& y) const {
    T r = T(coef.back());
    for (int i = static_cast<int>(coef.size()) - 2; i >= 0; --i) r = r * y + T(coef[i]);
    return r;
  }
  template <class T>
  T Pval(const T& y) const {
    const auto& a = P_.coefficients();
    return ((T(a[3]) * y + T(a[2])) * y + T(a[1])) * y + T(a[0]);
  }

  // Equation i of the real stage. Returns the value; sign mismatch of a
  // product equation is reported through ok = false.
  template <class T>
  T equation(int i, const std::vector<T>& x, const Signs& sg, const QuantumNumberSet& qn, bool* ok = nullptr) const {
    using std::atan;
    using std::sin;
    using std::sinh;
    using std::exp;
    using std::log;
    const double u = u_;
    const int L = m_.L;
    Imag<T> im = imag_values(x, sg);
    std::vector<T> sig;
    if (shape_.n_imag_k >= 1) sig.push_back(sinh(im.kappa));
    if (shape_.n_imag_k == 2) sig.push_back(sinh(im.eta));
    if (i < nr_) {
      const T& k = x[i];
      T s = sin(k);
      T f = 2.0 * (L + 1) * k + phase_T(k);
      for (int a = 0; a < mr_; ++a) {
        const T& lam = x[nr_ + a];
        f += 2.0 * (atan((s + lam) / u) + atan((s - lam) / u));
      }
      if (shape_.string) f += 2.0 * (atan(s / (u + im.Lambda)) + atan(s / (u - im.Lambda)));
      return f - 2.0 * pi * qn.charge[i];
    }
    if (i < nr_ + mr_) {
      int al = i - nr_;
      const T& lam = x[i];
      T g = T(0.0);
      for (int j = 0; j < nr_; ++j) {
        T s = sin(x[j]);
        g += 2.0 * (atan((lam - s) / u) + atan((lam + s) / u));
      }
      for (const T& sg_ : sig) g += 2.0 * (atan(lam / (u - sg_)) + atan(lam / (u + sg_)));
      for (int b = 0; b < mr_; ++b) {
        if (b == al) continue;
        const T& lb = x[nr_ + b];
        g -= 2.0 * (atan((lam - lb) / (2.0 * u)) + atan((lam + lb) / (2.0 * u)));
      }
      if (shape_.string) g -= 2.0 * (atan(lam / (2.0 * u - im.Lambda)) + atan(lam / (2.0 * u + im.Lambda)));
      return g - 2.0 * pi * qn.spin[al];
    }
    double sL = 1.0, sR = 1.0;
    T lhs = T(0.0), rhs = T(0.0);
    auto addL = [&](const T& v) {
      lhs += detail::log_abs(v);
      sL *= detail::sgn(v);
    };
    auto addR = [&](const T& v) {
      rhs += detail::log_abs(v);
      sR *= detail::sgn(v);
    };
    if (i == idx_kappa()) {
      const T& kap = im.kappa;
      T sgm = sig[0];
      lhs += -2.0 * (L + 1) * kap;
      addL(Pval(exp(kap)));
      rhs += x[idx_kappa()];
      sR *= sg.s1;
      addR(poly(q_, exp(-kap)));
      for (int a = 0; a < mr_; ++a) {
        const T& lam = x[nr_ + a];
        lhs += log((sgm - u) * (sgm - u) + lam * lam);
        rhs += log((sgm + u) * (sgm + u) + lam * lam);
      }
      if (shape_.string) {
        addL(sgm + im.Lambda - u);
        lhs += x[idx_Lambda()];
        sL *= sg.s2;
        addR(sgm + im.Lambda + u);
        addR(sgm - im.Lambda + u);
      }
    } else if (shape_.n_imag_k == 2 && i == idx_eta()) {
      const T& eta = im.eta;
      T sgm = sig[1];
      lhs += -2.0 * (L + 1) * eta;
      addL(Pval(exp(eta)));
      for (int a = 0; a < mr_; ++a) {
        const T& lam = x[nr_ + a];
        lhs += log((sgm - u) * (sgm - u) + lam * lam);
        rhs += log((sgm + u) * (sgm + u) + lam * lam);
      }
      addL(sgm + im.Lambda - u);
      addL(sgm - im.Lambda - u);
      addR(Pval(exp(-eta)));
      addR(sgm + im.Lambda + u);
      rhs += x[idx_eta()];
      sR *= sg.s3;
    } else {
      const T& Lam = im.Lambda;
      for (int j = 0; j < nr_; ++j) {
        T s = sin(x[j]);
        lhs += log((Lam + u) * (Lam + u) + s * s);
        rhs += log((Lam - u) * (Lam - u) + s * s);
      }
      for (int b = 0; b < mr_; ++b) {
        const T& lb = x[nr_ + b];
        lhs += log((Lam - 2.0 * u) * (Lam - 2.0 * u) + lb * lb);
        rhs += log((Lam + 2.0 * u) * (Lam + 2.0 * u) + lb * lb);
      }
      // kappa: (Lambda - sigma + u) = -v2
      lhs += x[idx_Lambda()];
      sL *= -sg.s2;
      addL(Lam + sig[0] + u);
      addR(Lam - sig[0] - u);
      addR(Lam + sig[0] - u);
      if (shape_.n_imag_k == 2) {
        addL(Lam - sig[1] + u);
        addL(Lam + sig[1] + u);
        rhs += x[idx_eta()];
        sR *= -sg.s3;
        addR(Lam + sig[1] - u);
      }
    }
    if (ok) *ok = (sL == sR);
    return lhs - rhs;
  }

  // Sign needed on the vanishing factor of equation i to make both sides agree,
  // and the log-magnitude solving the equation, with everything else fixed.
  void explicit_update(int i, std::vector<double>& x, Signs& sg, const QuantumNumberSet& qn) const {
    double& s = i == idx_kappa() ? sg.s1 : (shape_.n_imag_k == 2 && i == idx_eta()) ? sg.s3 : sg.s2;
    bool ok = true;
    double g = equation(i, x, sg, qn, &ok);
    if (!ok) s = -s;
    // g is affine in x[i] with unit coefficient on one side.
    double coef = (i == idx_Lambda()) ? 1.0 : -1.0;
    x[i] -= g / coef;
  }

  // Thermodynamic seed: free-chain momenta and string values.
  std::vector<double> seed(const QuantumNumberSet& qn) const {
    std::vector<double> x(n_unknowns(), 0.0);
    for (int j = 0; j < nr_; ++j) x[j] = pi * qn.charge[j] / (m_.L + 1.0);
    for (int a = 0; a < mr_; ++a) x[nr_ + a] = mr_ == 1 ? 0.5 : 0.2 + 0.8 * a / (mr_ - 1.0);
    for (int i = nr_ + mr_; i < n_unknowns(); ++i) x[i] = -30.0;
    return x;
  }

  QuantumNumberSet default_quantum_numbers(int shift_charge = 0, int shift_spin = 0) const {
    QuantumNumberSet q;
    for (int j = 0; j < nr_; ++j) q.charge.push_back(j + 1 + shift_charge);
    for (int a = 0; a < mr_; ++a) q.spin.push_back(a + 1 + shift_spin);
    return q;
  }

  struct RealResult {
    std::vector<double> x;
    Signs signs;
    double residual = std::numeric_limits<double>::infinity();
    bool converged = false;
  };

  RealResult solve_real(const QuantumNumberSet& qn, std::optional<std::vector<double>> start, const BaeOptions& opt,
                        Signs start_signs) const {
    const int n = n_unknowns();
    RealResult r;
    std::vector<double> x = start ? *start : seed(qn);
    Signs sg = start_signs;
    auto finite = [](const std::vector<double>& v) {
      for (double a : v)
        if (!std::isfinite(a)) return false;
      return true;
    };
    auto update_imag = [&]() {
      // Order matters: eta feeds Lambda feeds kappa.
      if (shape_.n_imag_k == 2) explicit_update(idx_eta(), x, sg, qn);
      if (shape_.string) explicit_update(idx_Lambda(), x, sg, qn);
      if (shape_.n_imag_k >= 1) explicit_update(idx_kappa(), x, sg, qn);
      // Keep the kappa deviation finite: |v1| e^{kappa0} < 1.
      if (shape_.n_imag_k >= 1 && sg.s1 < 0.0) x[idx_kappa()] = std::min(x[idx_kappa()], std::log(0.9) - kappa0_);
    };
    if (!start) {
      for (int sweep = 0; sweep < opt.seed_sweeps; ++sweep) {
        if (n > nr_ + mr_) {
          for (int rep = 0; rep < 3; ++rep) update_imag();
        }
        for (int i = 0; i < nr_ + mr_; ++i) {
          double lo = i < nr_ ? 1e-9 : 1e-9, hi = i < nr_ ? pi - 1e-9 : 20.0;
          auto g = [&](double v) {
            std::vector<double> y = x;
            y[i] = v;
            return equation(i, y, sg, qn);
          };
          double glo = g(lo), ghi = g(hi);
          if (!std::isfinite(glo) || !std::isfinite(ghi) || glo * ghi > 0.0) continue;
          boost::uintmax_t it = 100;
          auto tol = boost::math::tools::eps_tolerance<double>(50);
          try {
            auto br = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi, tol, it);
            x[i] = 0.5 * (br.first + br.second);
          } catch (...) {
          }
        }
      }
      if (n > nr_ + mr_)
        for (int rep = 0; rep < 3; ++rep) update_imag();
    }
    auto F = [&](const std::vector<double>& y, bool* signs_ok = nullptr) {
      Eigen::VectorXd f(n);
      bool all = true;
      for (int i = 0; i < n; ++i) {
        bool ok = true;
        f(i) = equation(i, y, sg, qn, &ok);
        all = all && ok;
      }
      if (signs_ok) *signs_ok = all;
      return f;
    };
    Eigen::VectorXd f = F(x);
    for (int it = 0; it < opt.max_newton && finite(x); ++it) {
      double fn = f.norm();
      if (!std::isfinite(fn)) break;
      if (f.cwiseAbs().maxCoeff() < 1e-13) break;
      Eigen::MatrixXd J(n, n);
      for (int col = 0; col < n; ++col) {
        std::vector<Dual<double>> xd(n);
        for (int i = 0; i < n; ++i) xd[i] = Dual<double>(x[i], i == col ? 1.0 : 0.0);
        for (int i = 0; i < n; ++i) J(i, col) = equation(i, xd, sg, qn).d;
      }
      Eigen::VectorXd rs = J.cwiseAbs().rowwise().maxCoeff();
      for (int i = 0; i < n; ++i)
        if (rs(i) == 0.0) rs(i) = 1.0;
      Eigen::MatrixXd Js = rs.cwiseInverse().asDiagonal() * J;
      Eigen::VectorXd dx = Js.fullPivLu().solve(-(f.cwiseQuotient(rs)));
      if (!dx.allFinite()) break;
      double t = 1.0;
      bool accepted = false;
      for (int h = 0; h <= opt.max_halvings; ++h, t *= 0.5) {
        std::vector<double> y = x;
        for (int i = 0; i < n; ++i) y[i] += t * dx(i);
        if (!finite(y)) continue;
        if (shape_.n_imag_k >= 1) {
          auto im = imag_values(y, sg);
          if (!std::isfinite(im.kappa)) continue;
        }
        Eigen::VectorXd fy = F(y);
        if (fy.allFinite() && fy.norm() < fn) {
          x = y;
          f = fy;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    bool signs_ok = true;
    f = F(x, &signs_ok);
    r.x = x;
    r.signs = sg;
    r.residual = f.allFinite() ? f.cwiseAbs().maxCoeff() : std::numeric_limits<double>::infinity();
    r.converged = signs_ok && r.residual < 1e-11;
    return r;
  }

  // ------------------------------------------------------------- complex stage
  // Unknowns: [k real..| lambda real..| dkappa | deta | dLambda] as complex numbers;
  // equations are log(LHS/RHS) of the product form, reduced mod 2 pi i.
  template <class C>
  std::vector<C> complex_equations(const std::vector<C>& z) const {
    using std::sin;
    using std::cos;
    using std::exp;
    using std::log;
    using std::sinh;
    using std::cosh;
    const cplx I(0.0, 1.0);
    const cplx iu = I * u_, i2u = 2.0 * I * u_;
    const int L = m_.L;
    const int nk = shape_.n_imag_k;
    const bool str = shape_.string;
    std::vector<C> k(z.begin(), z.begin() + nr_);
    std::vector<C> lam(z.begin() + nr_, z.begin() + nr_ + mr_);
    C dk = nk >= 1 ? z[idx_kappa()] : C(0.0);
    C de = nk == 2 ? z[idx_eta()] : C(0.0);
    C dl = str ? z[idx_Lambda()] : C(0.0);
    // Full root lists; remember which are the special ones.
    int jeta = -1, jkap = -1, astr = -1;
    if (nk == 2) {
      jeta = static_cast<int>(k.size());
      k.push_back(I * eta0_ + de);
    }
    if (nk >= 1) {
      jkap = static_cast<int>(k.size());
      k.push_back(I * kappa0_ + dk);
    }
    if (str) {
      astr = static_cast<int>(lam.size());
      lam.push_back(I * Lambda0_ + dl);
    }
    // Vanishing factors, cancellation-free.
    C V1 = C(0.0), V2 = C(0.0), V3 = C(0.0);
    if (nk >= 1) V1 = std::exp(-kappa0_) * exp(0.5 * I * dk) * (2.0 * I) * sin(0.5 * dk);
    if (str) {
      C sh = sin(0.5 * dk);
      V2 = -2.0 * I * std::sinh(kappa0_) * sh * sh + std::cosh(kappa0_) * sin(dk) - dl;
    }
    if (nk == 2) {
      C sh = sin(0.5 * de);
      V3 = -2.0 * I * std::sinh(eta0_) * sh * sh + std::cosh(eta0_) * sin(de) - dl;
    }
    std::vector<C> s(k.size());
    for (std::size_t j = 0; j < k.size(); ++j) s[j] = sin(k[j]);
    std::vector<C> out;
    out.reserve(z.size());
    auto charge_eq = [&](int j) {
      C g = 2.0 * I * (L + 1.0) * k[j];
      C e = exp(I * k[j]);
      g += log(Pval(C(1.0) / e));
      if (j == jkap)
        g -= log(V1) + log(poly(q_, e));
      else
        g -= log(Pval(e));
      for (int a = 0; a < static_cast<int>(lam.size()); ++a) {
        C l = lam[a];
        C f1 = s[j] - l - iu;
        C f2 = s[j] - l + iu;
        if (a == astr && j == jkap) f1 = V2;
        if (a == astr && j == jeta) f2 = V3;
        g += log(s[j] + l - iu) + log(f1) - log(s[j] + l + iu) - log(f2);
      }
      return g;
    };
    auto spin_eq = [&](int a) {
      C g = C(0.0);
      C l = lam[a];
      for (int j = 0; j < static_cast<int>(k.size()); ++j) {
        C f1 = l - s[j] + iu;
        C f2 = l - s[j] - iu;
        if (a == astr && j == jkap) f1 = -V2;
        if (a == astr && j == jeta) f2 = -V3;
        g += log(f1) + log(l + s[j] + iu) - log(f2) - log(l + s[j] - iu);
      }
      for (int b = 0; b < static_cast<int>(lam.size()); ++b) {
        if (b == a) continue;
        C lb = lam[b];
        g += log(l - lb - i2u) + log(l + lb - i2u) - log(l - lb + i2u) - log(l + lb + i2u);
      }
      return g;
    };
    for (int j = 0; j < nr_; ++j) out.push_back(charge_eq(j));
    for (int a = 0; a < mr_; ++a) out.push_back(spin_eq(a));
    if (nk >= 1) out.push_back(charge_eq(jkap));
    if (nk == 2) out.push_back(charge_eq(jeta));
    if (str) out.push_back(spin_eq(astr));
    return out;
  }

  static double reduced_abs(cplx g) { return std::abs(cplx(g.real(), detail::reduce_2pi(g.imag()))); }

  double complex_residual(const std::vector<cplx>& z) const {
    double r = 0.0;
    for (const cplx& g : complex_equations(z)) r = std::max(r, reduced_abs(g));
    return r;
  }

  // Newton polish on the complex product form; real parts of imaginary roots are free.
  std::vector<cplx> polish(std::vector<cplx> z, int max_iter = 20) const {
    const int n = static_cast<int>(z.size());
    auto reduced = [&](const std::vector<cplx>& y) {
      auto g = complex_equations(y);
      Eigen::VectorXcd v(n);
      for (int i = 0; i < n; ++i) v(i) = cplx(g[i].real(), detail::reduce_2pi(g[i].imag()));
      return v;
    };
    Eigen::VectorXcd g = reduced(z);
    for (int it = 0; it < max_iter; ++it) {
      double gn = g.norm();
      if (!std::isfinite(gn) || g.cwiseAbs().maxCoeff() < 1e-15) break;
      Eigen::MatrixXcd J(n, n);
      for (int col = 0; col < n; ++col) {
        std::vector<Dual<cplx>> zd(n);
        for (int i = 0; i < n; ++i) zd[i] = Dual<cplx>(z[i], i == col ? cplx(1.0) : cplx(0.0));
        auto gd = complex_equations(zd);
        for (int i = 0; i < n; ++i) J(i, col) = gd[i].d;
      }
      Eigen::VectorXd cs = J.cwiseAbs().colwise().maxCoeff();
      for (int i = 0; i < n; ++i)
        if (cs(i) == 0.0) cs(i) = 1.0;
      Eigen::MatrixXcd Js = J * cs.cwiseInverse().asDiagonal();
      Eigen::VectorXcd dz = Js.fullPivLu().solve(-g).cwiseQuotient(cs.cast<cplx>());
      if (!dz.allFinite()) break;
      double t = 1.0;
      bool accepted = false;
      for (int h = 0; h < 30; ++h, t *= 0.5) {
        std::vector<cplx> y = z;
        for (int i = 0; i < n; ++i) y[i] += t * dz(i);
        Eigen::VectorXcd gy = reduced(y);
        if (gy.allFinite() && gy.norm() < gn) {
          z = y;
          g = gy;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    return z;
  }

  // Real-stage vector to complex-stage unknowns.
  std::vector<cplx> to_complex(const RealResult& r) const {
    std::vector<cplx> z;
    for (int i = 0; i < nr_ + mr_; ++i) z.push_back(r.x[i]);
    auto im = imag_values(r.x, r.signs);
    const cplx I(0.0, 1.0);
    if (shape_.n_imag_k >= 1) z.push_back(I * im.dk);
    if (shape_.n_imag_k == 2) z.push_back(I * im.deta);
    if (shape_.string) z.push_back(I * im.dLam);
    return z;
  }

  BetheState to_state(const std::vector<cplx>& z, const QuantumNumberSet& qn) const {
    BetheState st;
    st.config = cfg_;
    st.quantum_numbers = qn;
    st.kappa0 = kappa0_;
    st.eta0 = eta0_;
    st.Lambda0 = Lambda0_;
    const cplx I(0.0, 1.0);
    for (int j = 0; j < nr_; ++j) st.charge_roots.push_back(z[j]);
    for (int a = 0; a < mr_; ++a) st.spin_roots.push_back(z[nr_ + a]);
    if (shape_.n_imag_k == 2) {
      st.deta = z[idx_eta()];
      st.charge_roots.push_back(I * eta0_ + st.deta);
    }
    if (shape_.n_imag_k >= 1) {
      st.dkappa = z[idx_kappa()];
      st.charge_roots.push_back(I * kappa0_ + st.dkappa);
    }
    if (shape_.string) {
      st.dLambda = z[idx_Lambda()];
      st.spin_roots.push_back(I * Lambda0_ + st.dLambda);
    }
    st.residual = complex_residual(z);
    return st;
  }

  std::vector<cplx> unknowns_of(const BetheState& st) const {
    std::vector<cplx> z;
    for (int j = 0; j < nr_; ++j) z.push_back(st.charge_roots[j]);
    for (int a = 0; a < mr_; ++a) z.push_back(st.spin_roots[a]);
    if (shape_.n_imag_k >= 1) z.push_back(st.dkappa);
    if (shape_.n_imag_k == 2) z.push_back(st.deta);
    if (shape_.string) z.push_back(st.dLambda);
    return z;
  }

  std::vector<double> real_unknowns_of(const BetheState& st, Signs* sg) const {
    std::vector<double> x;
    for (int j = 0; j < nr_; ++j) x.push_back(st.charge_roots[j].real());
    for (int a = 0; a < mr_; ++a) x.push_back(st.spin_roots[a].real());
    x.resize(n_unknowns(), 0.0);
    double dk = st.dkappa.imag(), dl = st.dLambda.imag(), de = st.deta.imag();
    if (shape_.n_imag_k >= 1) {
      double v1 = std::exp(-kappa0_) * std::expm1(-dk);
      sg->s1 = detail::sgn(v1);
      x[idx_kappa()] = std::log(std::abs(v1));
    }
    if (shape_.string) {
      double v2 = 2.0 * std::cosh(kappa0_ + 0.5 * dk) * std::sinh(0.5 * dk) - dl;
      sg->s2 = detail::sgn(v2);
      x[idx_Lambda()] = std::log(std::abs(v2));
    }
    if (shape_.n_imag_k == 2) {
      double v3 = 2.0 * std::cosh(eta0_ + 0.5 * de) * std::sinh(0.5 * de) - dl;
      sg->s3 = detail::sgn(v3);
      x[idx_eta()] = std::log(std::abs(v3));
    }
    return x;
  }

 private:
  ModelParams m_;
  RootConfig cfg_;
  ConfigShape shape_;
  DerivedCouplings c_;
  BoundaryPolynomial P_;
  double u_ = 0.0;
  int nr_ = 0, mr_ = 0;
  double xi_ = 0.0;
  RegionReport region_;
  double kappa0_ = 0.0, eta0_ = 0.0, Lambda0_ = 0.0;
  double z1_ = 0.0;
  std::vector<double> q_;
};

inline double energy_of_state(const BetheState& st, const ModelParams& m) {
  double e = 0.0;
  for (const cplx& k : st.charge_roots) e -= 2.0 * std::cos(k).real();
  int N = static_cast<int>(st.charge_roots.size()), M = static_cast<int>(st.spin_roots.size());
  return e + m.mu * N - 0.5 * m.h * (N - 2 * M);
}

// Componentwise |log(LHS/RHS)| mod 2 pi i of the product-form equations.
inline std::vector<double> bae_residual(const BetheState& st, const ModelParams& m, bool strict = true) {
  ModelParams mm = m;
  mm.N = static_cast<int>(st.charge_roots.size());
  mm.M = static_cast<int>(st.spin_roots.size());
  BaeSystem sys(mm, st.config, strict);
  auto g = sys.complex_equations(sys.unknowns_of(st));
  std::vector<double> r;
  for (const cplx& v : g) r.push_back(BaeSystem::reduced_abs(v));
  return r;
}

// Free-momentum seed with thermodynamic imaginary roots.
inline BetheState initial_guess(RootConfig cfg, const ModelParams& m, const RegionReport& region) {
  ConfigShape sh = shape_of(cfg);
  BetheState st;
  st.config = cfg;
  int nr = m.N - sh.n_imag_k, mr = m.M - (sh.string ? 1 : 0);
  const cplx I(0.0, 1.0);
  for (int j = 0; j < nr; ++j) {
    st.charge_roots.push_back(pi * (j + 1) / (m.L + 1.0));
    st.quantum_numbers.charge.push_back(j + 1);
  }
  for (int a = 0; a < mr; ++a) {
    st.spin_roots.push_back(mr == 1 ? 0.5 : 0.2 + 0.8 * a / (mr - 1.0));
    st.quantum_numbers.spin.push_back(a + 1);
  }
  if (sh.n_imag_k >= 1) st.kappa0 = std::log(region.xi);
  if (sh.string) st.Lambda0 = region.t - region.u;
  if (sh.n_imag_k == 2) {
    st.eta0 = std::asinh(st.Lambda0 - region.u);
    st.charge_roots.push_back(I * st.eta0);
  }
  if (sh.n_imag_k >= 1) st.charge_roots.push_back(I * st.kappa0);
  if (sh.string) st.spin_roots.push_back(I * st.Lambda0);
  return st;
}

struct StateCheck {
  bool ok = true;
  std::string reason;
};

inline StateCheck check_state(const BetheState& st, double tol) {
  StateCheck c;
  auto fail = [&](const std::string& why) {
    c.ok = false;
    c.reason = why;
    return c;
  };
  if (!(st.residual <= tol)) return fail("residual above tolerance");
  ConfigShape sh = shape_of(st.config);
  int nr = st.n_real_charge(), mr = st.n_real_spin();
  for (int j = 0; j < nr; ++j) {
    cplx k = st.charge_roots[j];
    if (std::abs(k.imag()) > 1e-8) return fail("real charge root acquired an imaginary part");
    if (!(k.real() > 1e-6 && k.real() < pi - 1e-6)) return fail("real charge root outside (0, pi)");
  }
  for (int a = 0; a < mr; ++a) {
    cplx l = st.spin_roots[a];
    if (std::abs(l.imag()) > 1e-8) return fail("real spin root acquired an imaginary part");
    if (!(l.real() > 1e-6 && l.real() < 1e4)) return fail("real spin root at 0 or runaway");
  }
  auto collide = [](const std::vector<cplx>& v, int n) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (std::abs(v[i] - v[j]) < 1e-10) return true;
    return false;
  };
  if (collide(st.charge_roots, static_cast<int>(st.charge_roots.size()))) return fail("charge root collision");
  if (collide(st.spin_roots, static_cast<int>(st.spin_roots.size()))) return fail("spin root collision");
  const std::size_t N = st.charge_roots.size();
  if (sh.n_imag_k >= 1) {
    cplx k = st.charge_roots[N - 1];
    if (std::abs(k.real()) > 1e-8 || !(k.imag() > 1e-8)) return fail("k_N not purely imaginary with Im > 0");
  }
  if (sh.n_imag_k == 2) {
    cplx k = st.charge_roots[N - 2];
    if (std::abs(k.real()) > 1e-8 || !(k.imag() > 1e-8)) return fail("k_{N-1} not purely imaginary with Im > 0");
  }
  if (sh.string) {
    cplx l = st.spin_roots.back();
    if (std::abs(l.real()) > 1e-8 || !(l.imag() > 1e-8)) return fail("spin string not purely imaginary with Im > 0");
  }
  return c;
}

// Solves one configuration with given quantum numbers (defaults: consecutive from 1).
inline BetheState solve_bae(const ModelParams& m, RootConfig cfg, const BetheState* seed = nullptr,
                            std::optional<QuantumNumberSet> qn = std::nullopt, const BaeOptions& opt = {}) {
  BaeSystem sys(m, cfg, opt.strict);
  QuantumNumberSet q = qn ? *qn : (seed && !seed->quantum_numbers.charge.empty() ? seed->quantum_numbers
                                                                                  : sys.default_quantum_numbers());
  if (static_cast<int>(q.charge.size()) != sys.n_real_charge() || static_cast<int>(q.spin.size()) != sys.n_real_spin())
    throw validation_error("quantum number counts do not match the configuration");
  std::optional<std::vector<double>> start;
  BaeSystem::Signs sg;
  if (seed && seed->config == cfg && seed->charge_roots.size() == static_cast<std::size_t>(m.N) &&
      seed->spin_roots.size() == static_cast<std::size_t>(m.M))
    start = sys.real_unknowns_of(*seed, &sg);
  auto rr = sys.solve_real(q, start, opt, sg);
  BetheState st;
  if (rr.converged || rr.residual < 1e-6) {
    auto z = sys.polish(sys.to_complex(rr));
    st = sys.to_state(z, q);
  } else {
    st = sys.to_state(sys.to_complex(rr), q);
  }
  st.energy = energy_of_state(st, m);
  if (!(st.residual <= opt.tol)) {
    std::ostringstream os;
    os << "BAE solve (" << to_string(cfg) << ") did not converge: residual " << st.residual;
    throw convergence_error(os.str());
  }
  return st;
}

// Lowest-energy valid state over the configurations available at this xi
// and a few quantum-number offset families.
inline BetheState solve_ground_state(const ModelParams& m, const BaeOptions& opt = {}) {
  validate_sector(m);
  RegionReport reg = region_of(m, opt.strict);
  std::optional<BetheState> best;
  std::string last_error = "no configuration attempted";
  for (RootConfig cfg : {RootConfig::AllReal, RootConfig::OneImagK, RootConfig::ImagKPlusSpinString, RootConfig::TwoImagK}) {
    if (!config_available(cfg, reg)) continue;
    ConfigShape sh = shape_of(cfg);
    if (m.N - sh.n_imag_k < 0 || m.M - (sh.string ? 1 : 0) < 0) continue;
    if (sh.string && m.U <= 0.0) continue;
    BaeSystem sys(m, cfg, opt.strict);
    for (int sc : {0, 1})
      for (int ss : {0, -1, 1}) {
        if (ss != 0 && sys.n_real_spin() == 0) continue;
        if (sc != 0 && sys.n_real_charge() == 0) continue;
        try {
          BetheState st = solve_bae(m, cfg, nullptr, sys.default_quantum_numbers(sc, ss), opt);
          if (!check_state(st, opt.tol).ok) continue;
          if (!best || st.energy < best->energy - 1e-12) best = st;
        } catch (const std::exception& e) {
          last_error = e.what();
        }
      }
  }
  if (!best) throw convergence_error("no valid Bethe state found: " + last_error);
  return *best;
}

struct EdMatch {
  int n_up = 0, n_down = 0;
  double e_bae = 0.0;
  double e_ed = 0.0;
  double diff = 0.0;
  RootConfig config = RootConfig::AllReal;
};

struct EdComparison {
  std::vector<EdMatch> matches;
  double max_diff = 0.0;
};

// Ground energies of each sector from the Bethe ansatz and from ED.
inline EdComparison verify_against_ed(const ModelParams& m, const std::vector<std::pair<int, int>>& sectors,
                                      double tol = 1e-8, const BaeOptions& opt = {}) {
  if (m.L > 6) throw validation_error("verify_against_ed requires L <= 6");
  EdComparison rep;
  for (auto [nu, nd] : sectors) {
    if (nd > nu) throw validation_error("sectors must have n_down <= n_up");
    ModelParams mm = m;
    mm.N = nu + nd;
    mm.M = nd;
    BetheState st = solve_ground_state(mm, opt);
    double eed = sector_spectrum(mm, nu, nd, 1, opt.strict).eigenvalues[0];
    EdMatch e{nu, nd, st.energy, eed, std::abs(st.energy - eed), st.config};
    rep.max_diff = std::max(rep.max_diff, e.diff);
    rep.matches.push_back(e);
  }
  if (rep.max_diff > tol) {
    std::ostringstream os;
    os << "ground-state mismatch between BAE and ED: " << rep.max_diff;
    throw convergence_error(os.str());
  }
  return rep;
}

}  // namespace hubimp

#endif
