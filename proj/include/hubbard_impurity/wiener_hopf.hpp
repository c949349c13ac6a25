#ifndef HUBBARD_IMPURITY_WIENER_HOPF_HPP
#define HUBBARD_IMPURITY_WIENER_HOPF_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "errors.hpp"
#include "kernels.hpp"
#include "model.hpp"
#include "region.hpp"
#include "special.hpp"
#include "thermo.hpp"

namespace hubimp {

struct WeakFieldOptions {
  int nodes = default_nodes;
  int laguerre_nodes = 64;
  double damping = 0.5;
  int max_iter = 200;
  double tol = 1e-10;
  // Solve the impurity self-consistency for C_i in closed form (it is linear);
  // false runs the damped loop instead.
  bool closed_form_ci = true;
};

// Lower and upper ends of the weak-field window in units of h0.
inline constexpr double weak_field_min = 1e-8;
inline double weak_field_max() { return std::exp(-1.0); }

// pi A = -2u ln(h/h0) + (u/2)/ln(h/h0)
inline double boundary_A(double h, double h0, double u) {
  double l = std::log(h / h0);
  return (-2.0 * u * l + 0.5 * u / l) / pi;
}

inline double h0_from_C(double C, double u) { return -(C / (2.0 * u)) * std::sqrt(2.0 * pi / std::exp(1.0)); }

namespace detail {

inline const QuadratureRule& laguerre_rule(int n) {
  static thread_local int cached_n = 0;
  static thread_local QuadratureRule rule;
  if (n != cached_n) {
    rule = gauss_laguerre(n);
    cached_n = n;
  }
  return rule;
}

}  // namespace detail

// int_0^inf e^{-2Ax} / (x + pi/2u) dx and int_0^inf x e^{-2Ax} / (x + pi/2u) dx,
// by Gauss-Laguerre after x -> x / 2A.
struct ExpIntegrals {
  double plain;
  double weighted;
};

inline ExpIntegrals exp_integrals(double A, double u, int n = 64) {
  if (!(A > 0.0)) throw validation_error("exp_integrals: A must be positive");
  const QuadratureRule& r = detail::laguerre_rule(n);
  double a = pi * A / u, s0 = 0.0, s1 = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    s0 += r.w[i] / (r.x[i] + a);
    s1 += r.w[i] * r.x[i] / (r.x[i] + a);
  }
  return {s0, s1 / (2.0 * A)};
}

struct WeakFieldState {
  double h = 0.0;
  double n_target = 0.0;
  double u = 0.0;
  double A = 0.0;
  double C = 0.0;
  double h0 = 0.0;
  double Q = 0.0;
  double mu = 0.0;
  double C_inf = 0.0;  // int e^{pi sin k / 2u} rho_c^inf
  int iterations = 0;
  std::shared_ptr<const ChargeKernel> kernel;
  Eigen::VectorXd eps;      // dressed charge energy on the nodes
  Eigen::VectorXd rho_inf;  // host charge density on the nodes

  double decay() const { return std::exp(-pi * A / (2.0 * u)); }
  double log_factor() const { return 1.0 + u / (2.0 * pi * A); }
};

namespace detail {

inline Eigen::VectorXd exp_weight(const ChargeKernel& K) {
  Eigen::VectorXd e(K.size());
  for (int j = 0; j < K.size(); ++j) e(j) = K.weight(j) * std::exp(pi * K.sin_k()(j) / (2.0 * K.u()));
  return e;
}

inline Eigen::VectorXd cosh_driving(const ChargeKernel& K) {
  Eigen::VectorXd d(K.size());
  for (int j = 0; j < K.size(); ++j) d(j) = K.cos_k()(j) * std::cosh(pi * K.sin_k()(j) / (2.0 * K.u()));
  return d;
}

struct HostWeak {
  Eigen::VectorXd rho;
  double C_inf;
};

// rho = 1/pi + K rho - alpha cos k cosh(pi sin k/2u) int e^{pi sin k'/2u} rho, closed form in the rank-one term.
inline HostWeak host_weak(const ChargeKernel& K, double A) {
  double u = K.u();
  double alpha = std::exp(-pi * A / u) / (2.0 * std::exp(1.0) * u);
  Eigen::VectorXd r1 = K.solve_density(Eigen::VectorXd::Constant(K.size(), 1.0 / pi));
  Eigen::VectorXd r3 = K.solve_density(cosh_driving(K));
  Eigen::VectorXd ew = exp_weight(K);
  double c1 = ew.dot(r1), c3 = ew.dot(r3);
  double c = c1 / (1.0 + alpha * c3);
  return {r1 - alpha * c * r3, c};
}

inline double half_weight(const ChargeKernel& K, const Eigen::VectorXd& v) {
  double s = 0.0;
  for (int j = 0; j < K.size(); ++j) s += K.weight(j) * v(j);
  return 0.5 * s;
}

// Q with (1/2) int rho_inf = n at fixed A; secant from Q0, toms748 fallback.
inline std::shared_ptr<const ChargeKernel> pin_Q(double n, double u, double A, double Q0, int nodes) {
  if (n >= 1.0 - 1e-14) return std::make_shared<const ChargeKernel>(pi, u, nodes);
  auto F = [&](double Q) {
    ChargeKernel K(Q, u, nodes);
    return half_weight(K, host_weak(K, A).rho) - n;
  };
  double q0 = Q0, f0 = F(q0);
  if (std::abs(f0) > 1e-15) {
    double q1 = std::min(pi, q0 * (1.0 + 1e-6) + 1e-9), f1 = F(q1);
    bool ok = false;
    for (int it = 0; it < 30; ++it) {
      if (f1 == f0) break;
      double q2 = q1 - f1 * (q1 - q0) / (f1 - f0);
      if (!(q2 > 0.0) || q2 > pi) break;
      q0 = q1;
      f0 = f1;
      q1 = q2;
      f1 = F(q1);
      if (std::abs(f1) <= 1e-15 || std::abs(q1 - q0) <= 1e-15 * q1) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      double lo = 1e-6, hi = pi, flo = F(lo), fhi = F(hi);
      if (!(flo < 0.0 && fhi > 0.0)) throw convergence_error("weak field: Q bracket failure");
      std::uintmax_t mi = 200;
      auto tol = [](double a, double b) { return std::abs(b - a) <= 4e-16 * std::max(1.0, std::abs(a)); };
      auto br = boost::math::tools::toms748_solve(F, lo, hi, flo, fhi, tol, mi);
      q1 = 0.5 * (br.first + br.second);
    }
    Q0 = q1;
  }
  return std::make_shared<const ChargeKernel>(Q0, u, nodes);
}

}  // namespace detail

// Self-consistent weak-field dressed charge energy: C -> h0 -> A -> y+(i pi/2u) -> eps_c -> C.
inline WeakFieldState solve_dressed_charge(double n_target, double u, double h, const WeakFieldOptions& opt = {}) {
  if (!(h > 0.0)) throw validation_error("solve_dressed_charge: h must be positive");
  if (!(n_target > 0.0) || !(n_target < 1.0)) throw validation_error("solve_dressed_charge: density must lie in (0, 1)");
  HostSolution host = solve_host_h0(n_target, u, opt.nodes);
  WeakFieldState s;
  s.h = h;
  s.n_target = n_target;
  s.u = u;
  s.Q = host.Q;
  s.kernel = host.kernel;
  s.C = detail::exp_weight(*host.kernel).dot(host.kernel->cos_k().cwiseProduct(host.eps));
  if (!(s.C < 0.0)) throw convergence_error("solve_dressed_charge: C must be negative for h0 > 0");
  double h0_start = h0_from_C(s.C, u);
  if (h < weak_field_min * h0_start || h > weak_field_max() * h0_start) {
    std::ostringstream os;
    os << "solve_dressed_charge: h = " << h << " outside the weak-field window [" << weak_field_min * h0_start << ", "
       << weak_field_max() * h0_start << "]";
    throw validation_error(os.str());
  }
  const double sq = std::sqrt(pi / std::exp(1.0));
  for (int it = 1; it <= opt.max_iter; ++it) {
    s.h0 = h0_from_C(s.C, u);
    if (!(h < s.h0)) throw convergence_error("solve_dressed_charge: h reached h0 during iteration");
    s.A = boundary_A(h, s.h0, u);
    s.kernel = detail::pin_Q(n_target, u, s.A, s.Q, opt.nodes);
    s.Q = s.kernel->Q();
    const ChargeKernel& K = *s.kernel;
    ExpIntegrals I = exp_integrals(s.A, u, opt.laguerre_nodes);
    double dec = s.decay();
    double y1 = 0.5 * sq * (2.0 * std::sqrt(2.0) * u * h / pi + (s.C / pi) * sq * dec);
    double y2 = (u * h / (std::sqrt(2.0) * pi)) * sq * I.plain;
    double feed = dec * (y1 + y2) / u;
    // eps = mu e1 + e2 - feed e3
    Eigen::VectorXd ch(K.size());
    for (int j = 0; j < K.size(); ++j) ch(j) = std::cosh(pi * K.sin_k()(j) / (2.0 * u));
    Eigen::VectorXd e1 = K.solve_dressed(Eigen::VectorXd::Ones(K.size()));
    Eigen::VectorXd e2 = K.solve_dressed(-2.0 * K.cos_k() - feed * ch);
    auto at_Q = [&](const Eigen::VectorXd& e, double drive) {
      return drive + K.convolve_nodes(s.Q, Eigen::VectorXd(K.cos_k().cwiseProduct(e)));
    };
    double v1 = at_Q(e1, 1.0);
    double v2 = at_Q(e2, -2.0 * std::cos(s.Q) - feed * std::cosh(pi * std::sin(s.Q) / (2.0 * u)));
    s.mu = -v2 / v1;
    s.eps = s.mu * e1 + e2;
    double C_new = detail::exp_weight(K).dot(K.cos_k().cwiseProduct(s.eps));
    double dC = C_new - s.C;
    s.C += opt.damping * dC;
    s.iterations = it;
    if (std::abs(dC) < opt.tol) {
      s.C = C_new;
      s.h0 = h0_from_C(s.C, u);
      s.A = boundary_A(h, s.h0, u);
      detail::HostWeak hw = detail::host_weak(K, s.A);
      s.rho_inf = hw.rho;
      s.C_inf = hw.C_inf;
      return s;
    }
  }
  throw convergence_error("solve_dressed_charge: fixed point did not converge in max_iter iterations");
}

inline int theta_of(Region r) { return (r == Region::II || r == Region::III) ? 1 : 0; }

struct WeakFieldImpurity {
  ChargeSolution rho_c;  // driving part; the feedback enters through feedback * r3
  Eigen::VectorXd rho;   // full impurity density on the nodes
  double C_i = 0.0;
  double X = 0.0;  // C_i + 2 Theta cos(pi t / 2u)
  int Theta = 0;
  double integral = 0.0;  // int rho_c^i
  int iterations = 0;
};

// Weak-field impurity density in the region's ground configuration.
inline WeakFieldImpurity solve_impurity_weakfield(const RegionReport& r, const DerivedCouplings& c,
                                                  const WeakFieldState& s, const WeakFieldOptions& opt = {}) {
  if (std::abs(s.u - r.u) > 1e-14 * std::max(1.0, r.u)) throw validation_error("state and region disagree on u");
  const ChargeKernel& K = *s.kernel;
  WeakFieldImpurity w;
  w.Theta = theta_of(r.region);
  double T = w.Theta ? 2.0 * std::cos(pi * r.t / (2.0 * r.u)) : 0.0;
  w.rho_c = ChargeSolution(s.kernel, impurity_driving_h0(ground_config(r.region), r, c).charge);
  Eigen::VectorXd r3 = K.solve_density(detail::cosh_driving(K));
  Eigen::VectorXd ew = detail::exp_weight(K);
  double c0 = w.rho_c.integrate([&](double k) { return std::exp(pi * std::sin(k) / (2.0 * r.u)); });
  double c3 = ew.dot(r3);
  ExpIntegrals I = exp_integrals(s.A, s.u, opt.laguerre_nodes);
  double dec = s.decay();
  double e = std::exp(1.0);
  // g+(i pi/2u) = X * gamma
  double gamma = dec * (1.0 / (2.0 * e) + (s.u / (pi * std::sqrt(pi * e))) * std::sqrt(pi / e) * I.weighted);
  double beta = dec * gamma / s.u;
  if (opt.closed_form_ci) {
    w.C_i = (c0 - beta * T * c3) / (1.0 + beta * c3);
    w.iterations = 1;
  } else {
    double Ci = c0;
    bool done = false;
    for (int it = 1; it <= opt.max_iter; ++it) {
      double next = c0 - beta * (Ci + T) * c3;
      double d = next - Ci;
      Ci += opt.damping * d;
      w.iterations = it;
      if (std::abs(d) < opt.tol) {
        Ci = next;
        done = true;
        break;
      }
    }
    if (!done) throw convergence_error("solve_impurity_weakfield: C_i loop did not converge");
    w.C_i = Ci;
  }
  w.X = w.C_i + T;
  w.rho = w.rho_c.rho() - beta * w.X * r3;
  double sig = 0.0;
  for (int j = 0; j < K.size(); ++j) sig += K.weight(j) * r3(j);
  w.integral = w.rho_c.integral() - beta * w.X * sig;
  return w;
}

inline double impurity_magnetization(const WeakFieldState& s, const WeakFieldImpurity& w) {
  return w.X * s.decay() * s.log_factor() / std::sqrt(2.0 * pi * std::exp(1.0));
}

inline double bulk_magnetization(const WeakFieldState& s) {
  return s.C_inf * s.decay() * s.log_factor() / std::sqrt(2.0 * pi * std::exp(1.0));
}

// n^i along the weak-field path, with the same step terms as at h = 0.
inline double impurity_density_weakfield(const RegionReport& r, const WeakFieldImpurity& w) {
  return 0.5 * w.integral + heaviside(r.xi - 1.0) + heaviside(r.xi - r.xi2);
}

struct SusceptibilityReport {
  std::vector<double> h_grid;
  std::vector<double> m_i, m_inf;
  std::vector<double> chi_i, chi_inf;  // central differences at h_grid
  double chi_i_zero = 0.0;             // Richardson on the two smallest h
  double chi_inf_zero = 0.0;
  double ratio = 0.0;  // chi_i_zero / chi_inf_zero
  double chi_i_limit = 0.0;  // analytic h -> 0 limit -u X / (pi C)
  double chi_inf_limit = 0.0;
  RegionReport region;
};

inline constexpr double chi_step_ratio = 1.1;

// h values in units of the zero-field h0.
inline std::vector<double> default_h_ratios() { return {1e-6, 1e-5}; }

// Host weak-field states at h/r, h, h r for each h.
struct WeakFieldStencil {
  std::vector<double> h_grid;
  std::vector<std::array<WeakFieldState, 3>> states;
  double h0_zero = 0.0;  // h0 at zero field
  double C_zero = 0.0;
  HostSolution host;     // zero-field host
};

inline WeakFieldStencil host_stencil(double n_target, double u, const std::vector<double>& h_ratios,
                                     const WeakFieldOptions& opt = {}) {
  if (h_ratios.size() < 2) throw validation_error("susceptibility: need at least two field values");
  require_increasing(h_ratios, "h");
  WeakFieldStencil st;
  st.host = solve_host_h0(n_target, u, opt.nodes);
  const HostSolution& host = st.host;
  st.C_zero = detail::exp_weight(*host.kernel).dot(host.kernel->cos_k().cwiseProduct(host.eps));
  st.h0_zero = h0_from_C(st.C_zero, u);
  for (double r : h_ratios) {
    if (r / chi_step_ratio < weak_field_min || r * chi_step_ratio > weak_field_max())
      throw validation_error("susceptibility: h grid leaves the weak-field window");
    double h = r * st.h0_zero;
    st.h_grid.push_back(h);
    st.states.push_back({solve_dressed_charge(n_target, u, h / chi_step_ratio, opt), solve_dressed_charge(n_target, u, h, opt),
                         solve_dressed_charge(n_target, u, h * chi_step_ratio, opt)});
  }
  return st;
}

inline SusceptibilityReport susceptibility(const WeakFieldStencil& st, const RegionReport& r, const DerivedCouplings& c,
                                           const WeakFieldOptions& opt = {}) {
  SusceptibilityReport rep;
  rep.region = r;
  rep.h_grid = st.h_grid;
  for (std::size_t i = 0; i < st.h_grid.size(); ++i) {
    double h = st.h_grid[i];
    std::array<double, 3> mi{}, mf{};
    for (int j = 0; j < 3; ++j) {
      const WeakFieldState& s = st.states[i][j];
      WeakFieldImpurity w = solve_impurity_weakfield(r, c, s, opt);
      mi[j] = impurity_magnetization(s, w);
      mf[j] = bulk_magnetization(s);
    }
    double dh = h * chi_step_ratio - h / chi_step_ratio;
    rep.m_i.push_back(mi[1]);
    rep.m_inf.push_back(mf[1]);
    rep.chi_i.push_back((mi[2] - mi[0]) / dh);
    rep.chi_inf.push_back((mf[2] - mf[0]) / dh);
    if (!(mf[0] > 0.0 && mf[2] > mf[0])) throw convergence_error("susceptibility: m_inf not increasing; left the window");
  }
  double h1 = rep.h_grid[0], h2 = rep.h_grid[1];
  auto extrap = [&](const std::vector<double>& v) { return (h2 * v[0] - h1 * v[1]) / (h2 - h1); };
  rep.chi_i_zero = extrap(rep.chi_i);
  rep.chi_inf_zero = extrap(rep.chi_inf);
  rep.ratio = rep.chi_i_zero / rep.chi_inf_zero;
  // zero-field limit from the h = 0 pieces
  {
    const HostSolution& host = st.host;
    ChargeSolution s0(host.kernel, impurity_driving_h0(ground_config(r.region), r, c).charge);
    double Ci = s0.integrate([&](double k) { return std::exp(pi * std::sin(k) / (2.0 * r.u)); });
    double X0 = Ci + (theta_of(r.region) ? 2.0 * std::cos(pi * r.t / (2.0 * r.u)) : 0.0);
    double Cinf = detail::exp_weight(*host.kernel).dot(host.rho);
    rep.chi_i_limit = -r.u * X0 / (pi * st.C_zero);
    rep.chi_inf_limit = -r.u * Cinf / (pi * st.C_zero);
  }
  return rep;
}

inline SusceptibilityReport susceptibility_sweep(double U, double p, double phi, double n_target,
                                                 const std::vector<double>& h_ratios = default_h_ratios(),
                                                 const WeakFieldOptions& opt = {}) {
  DerivedCouplings c = derive_couplings(U, p, phi);
  RegionReport r = classify_region(solve_xi(c), U / 4.0);
  return susceptibility(host_stencil(n_target, r.u, h_ratios, opt), r, c, opt);
}

struct ChiPeak {
  double chi = 0.0;
  double p = 0.0;
};

// Largest zero-field chi^i over Region II at the stencil's density: grid scan,
// then golden section around the best node. The scan starts at xi = 1 + 1e-5: closer
// to the pole the driving needs very deep adaptive refinement, while chi^i has
// already reached its edge value to about 1e-5 relative.
inline ChiPeak region2_chi_peak(const WeakFieldStencil& st, double U, double phi, int grid = 24) {
  double u = U / 4.0, lo = 1.0 + 1e-5, hi = region_thresholds(u).xi1;
  auto chi = [&](double p) {
    auto cp = derive_couplings(U, p, phi);
    return susceptibility(st, classify_region(solve_xi(cp), u), cp).chi_i_zero;
  };
  int best = 0;
  double bv = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= grid; ++i) {
    double v = chi(lo + (hi - lo) * i / grid);
    if (v > bv) {
      bv = v;
      best = i;
    }
  }
  double a = lo + (hi - lo) * std::max(0, best - 1) / grid, b = lo + (hi - lo) * std::min(grid, best + 1) / grid;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - g * (b - a), x2 = a + g * (b - a), f1 = chi(x1), f2 = chi(x2);
  for (int it = 0; it < 30; ++it) {
    if (f1 > f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = chi(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = chi(x2);
    }
  }
  ChiPeak pk{bv, lo + (hi - lo) * best / grid};
  if (f1 > pk.chi) pk = {f1, x1};
  if (f2 > pk.chi) pk = {f2, x2};
  return pk;
}

}  // namespace hubimp

#endif
