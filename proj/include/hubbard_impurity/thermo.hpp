#ifndef HUBBARD_IMPURITY_THERMO_HPP
#define HUBBARD_IMPURITY_THERMO_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "errors.hpp"
#include "kernels.hpp"
#include "model.hpp"
#include "region.hpp"
#include "special.hpp"

namespace hubimp {

inline constexpr int default_nodes = 257;

// Nystrom discretization of the h = 0 charge kernel cos k G1(sin k - sin k') on [-Q, Q].
class ChargeKernel {
 public:
  ChargeKernel(double Q, double u, int nodes = default_nodes) : Q_(Q), u_(u) {
    if (!(Q > 0.0) || Q > pi + 1e-12) throw validation_error("ChargeKernel: Q must lie in (0, pi]");
    if (!(u > 0.0)) throw validation_error("ChargeKernel: u must be positive");
    rule_ = gauss_legendre(nodes, -Q, Q);
    int n = nodes;
    s_.resize(n);
    c_.resize(n);
    for (int i = 0; i < n; ++i) {
      s_(i) = std::sin(rule_.x[i]);
      c_(i) = std::cos(rule_.x[i]);
    }
    G_.resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) G_(i, j) = G_(j, i) = kernel_G(1.0, s_(i) - s_(j), u);
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(rule_.w.data(), n);
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    // density: K_ij = cos k_i G1 w_j;  dressed energy: K_ij = G1 cos k_j w_j
    lu_rho_.compute(I - c_.asDiagonal() * G_ * w.asDiagonal());
    lu_eps_.compute(I - G_ * (c_.cwiseProduct(w)).asDiagonal());
  }

  double Q() const { return Q_; }
  double u() const { return u_; }
  int size() const { return static_cast<int>(rule_.size()); }
  const QuadratureRule& rule() const { return rule_; }
  const Eigen::VectorXd& sin_k() const { return s_; }
  const Eigen::VectorXd& cos_k() const { return c_; }
  double node(int i) const { return rule_.x[i]; }
  double weight(int i) const { return rule_.w[i]; }

  Eigen::VectorXd solve_density(const Eigen::VectorXd& b) const { return lu_rho_.solve(b); }
  Eigen::VectorXd solve_dressed(const Eigen::VectorXd& b) const { return lu_eps_.solve(b); }

  // sum_j w_j G1(sin k - sin k_j) v_j over the Nystrom nodes.
  double convolve_nodes(double k, const Eigen::VectorXd& v) const {
    double sk = std::sin(k), s = 0.0;
    for (int j = 0; j < size(); ++j) s += rule_.w[j] * kernel_G(1.0, sk - s_(j), u_) * v(j);
    return s;
  }

  // sum_m w_m G1(sin k - sin x_m) g_m over an arbitrary rule.
  double convolve_rule(double k, const QuadratureRule& r, const std::vector<double>& g) const {
    double sk = std::sin(k), s = 0.0;
    for (std::size_t m = 0; m < r.size(); ++m) s += r.w[m] * kernel_G(1.0, sk - std::sin(r.x[m]), u_) * g[m];
    return s;
  }

 private:
  double Q_, u_;
  QuadratureRule rule_;
  Eigen::VectorXd s_, c_;
  Eigen::MatrixXd G_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_rho_, lu_eps_;
};

struct KernelTerm {
  double coef;
  double n;
};

// Driving term of a charge density equation:
// constant + [Z-term] + cos k sum c a_n(sin k) + cos k sum c G_n(sin k).
struct ChargeDriving {
  double u = 1.0;
  double constant = 0.0;
  std::optional<BoundaryPolynomial> z_term;
  std::vector<KernelTerm> a_terms;
  std::vector<KernelTerm> g_terms;

  double operator()(double k) const {
    double v = constant;
    if (z_term) v += z_term->phase_derivative(k) / (2.0 * pi);
    if (!a_terms.empty() || !g_terms.empty()) {
      double s = std::sin(k), c = std::cos(k), acc = 0.0;
      for (const auto& t : a_terms) acc += t.coef * kernel_a_signed(t.n, s);
      for (const auto& t : g_terms) acc += t.coef * kernel_G(t.n, s, u);
      v += c * acc;
    }
    return v;
  }

  bool empty() const { return constant == 0.0 && !z_term && a_terms.empty() && g_terms.empty(); }

  // Panel breaks: the interval ends, k = 0 and the angles of near-circle Z poles.
  std::vector<double> breakpoints(double Q) const {
    std::vector<double> b{-Q, 0.0, Q};
    if (z_term)
      for (const cplx& r : z_term->roots()) {
        double a = std::arg(r);
        if (std::abs(a) < Q) b.push_back(a);
      }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
  }
};

// Spin driving sum c G_n(lambda); each G_n integrates to 1/2.
struct SpinDriving {
  double u = 1.0;
  std::vector<KernelTerm> g_terms;

  double operator()(double lambda) const {
    double v = 0.0;
    for (const auto& t : g_terms) v += t.coef * kernel_G(t.n, lambda, u);
    return v;
  }
  double integral() const {
    double s = 0.0;
    for (const auto& t : g_terms) s += 0.5 * t.coef;
    return s;
  }
};

// Solution of rho = f + K rho split as rho = f + sigma with sigma smooth;
// f is resolved on its own adaptive rule.
class ChargeSolution {
 public:
  ChargeSolution() = default;
  ChargeSolution(std::shared_ptr<const ChargeKernel> kernel, ChargeDriving f, double tol = 1e-13)
      : kernel_(std::move(kernel)), driving_(std::move(f)) {
    const ChargeKernel& K = *kernel_;
    int n = K.size();
    if (!driving_.empty()) {
      fine_ = adaptive_rule([&](double k) { return driving_(k); }, driving_.breakpoints(K.Q()), tol);
      f_fine_.resize(fine_.size());
      for (std::size_t m = 0; m < fine_.size(); ++m) f_fine_[m] = driving_(fine_.x[m]);
    }
    Eigen::VectorXd Kf(n), fn(n);
    for (int i = 0; i < n; ++i) {
      Kf(i) = fine_.size() ? K.cos_k()(i) * K.convolve_rule(K.node(i), fine_, f_fine_) : 0.0;
      fn(i) = driving_.empty() ? 0.0 : driving_(K.node(i));
    }
    sigma_ = K.solve_density(Kf);
    rho_ = fn + sigma_;
  }

  const ChargeKernel& kernel() const { return *kernel_; }
  const ChargeDriving& driving() const { return driving_; }
  const Eigen::VectorXd& rho() const { return rho_; }
  const Eigen::VectorXd& sigma() const { return sigma_; }

  // int_{-Q}^{Q} g(k) rho(k) dk
  template <class G>
  double integrate(G&& g) const {
    double s = 0.0;
    for (std::size_t m = 0; m < fine_.size(); ++m) s += fine_.w[m] * g(fine_.x[m]) * f_fine_[m];
    for (int j = 0; j < kernel_->size(); ++j) s += kernel_->weight(j) * g(kernel_->node(j)) * sigma_(j);
    return s;
  }
  double integral() const {
    return integrate([](double) { return 1.0; });
  }

  // Nystrom interpolation at arbitrary k in [-Q, Q].
  double value(double k) const {
    double v = driving_.empty() ? 0.0 : driving_(k);
    double conv = kernel_->convolve_nodes(k, sigma_);
    if (fine_.size()) conv += kernel_->convolve_rule(k, fine_, f_fine_);
    return v + std::cos(k) * conv;
  }

  // int G0(lambda - sin k) rho(k) dk, the charge feed of the h = 0 spin density.
  double spin_feed(double lambda) const {
    double u = kernel_->u();
    return integrate([&](double k) { return kernel_G(0.0, lambda - std::sin(k), u); });
  }

 private:
  std::shared_ptr<const ChargeKernel> kernel_;
  ChargeDriving driving_;
  QuadratureRule fine_;
  std::vector<double> f_fine_;
  Eigen::VectorXd sigma_, rho_;
};

struct HostSolution {
  double n_target = 0.0;
  double u = 0.0;
  double Q = 0.0;
  double mu = 0.0;
  std::shared_ptr<const ChargeKernel> kernel;
  Eigen::VectorXd rho;  // host charge density on the nodes
  Eigen::VectorXd eps;  // h = 0 dressed charge energy on the nodes, eps(Q) = 0

  double density(double k) const { return 1.0 / pi + std::cos(k) * kernel->convolve_nodes(k, rho); }
  double dressed_energy(double k) const {
    return mu - 2.0 * std::cos(k) + kernel->convolve_nodes(k, Eigen::VectorXd(kernel->cos_k().cwiseProduct(eps)));
  }
  double integral() const {
    double s = 0.0;
    for (int j = 0; j < kernel->size(); ++j) s += kernel->weight(j) * rho(j);
    return s;
  }
  // int g(k) rho(k) dk
  template <class G>
  double integrate(G&& g) const {
    double s = 0.0;
    for (int j = 0; j < kernel->size(); ++j) s += kernel->weight(j) * g(kernel->node(j)) * rho(j);
    return s;
  }
};

namespace detail {

inline Eigen::VectorXd host_density(const ChargeKernel& K) {
  return K.solve_density(Eigen::VectorXd::Constant(K.size(), 1.0 / pi));
}

inline double half_integral(const ChargeKernel& K, const Eigen::VectorXd& rho) {
  double s = 0.0;
  for (int j = 0; j < K.size(); ++j) s += K.weight(j) * rho(j);
  return 0.5 * s;
}

}  // namespace detail

// Host density at h = 0 with Q fixed by (1/2) int rho = n_target; mu from eps(Q) = 0.
inline HostSolution solve_host_h0(double n_target, double u, int nodes = default_nodes) {
  if (!(n_target > 0.0) || n_target > 1.0) throw validation_error("solve_host_h0: density must lie in (0, 1]");
  if (!(u > 0.0)) throw validation_error("solve_host_h0: u must be positive");
  if (nodes < 8) throw validation_error("solve_host_h0: need at least 8 nodes");
  HostSolution h;
  h.n_target = n_target;
  h.u = u;
  if (n_target >= 1.0 - 1e-14) {
    h.Q = pi;
  } else {
    auto G = [&](double Q) {
      ChargeKernel K(Q, u, nodes);
      return detail::half_integral(K, detail::host_density(K)) - n_target;
    };
    double lo = 1e-6, hi = pi;
    double flo = G(lo), fhi = G(hi);
    if (!(flo < 0.0 && fhi > 0.0)) throw convergence_error("solve_host_h0: Q bracket failure");
    std::uintmax_t it = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 4e-16 * std::max(1.0, std::abs(a)); };
    auto br = boost::math::tools::toms748_solve(G, lo, hi, flo, fhi, tol, it);
    h.Q = 0.5 * (br.first + br.second);
  }
  auto K = std::make_shared<const ChargeKernel>(h.Q, u, nodes);
  h.kernel = K;
  h.rho = detail::host_density(*K);
  if (std::abs(detail::half_integral(*K, h.rho) - n_target) > 1e-9)
    throw convergence_error("solve_host_h0: density constraint not met");
  // eps = mu e1 + e2 with e1 = 1 + K e1, e2 = -2 cos k + K e2
  Eigen::VectorXd e1 = K->solve_dressed(Eigen::VectorXd::Ones(K->size()));
  Eigen::VectorXd e2 = K->solve_dressed(-2.0 * K->cos_k());
  Eigen::VectorXd ce1 = K->cos_k().cwiseProduct(e1), ce2 = K->cos_k().cwiseProduct(e2);
  double v1 = 1.0 + K->convolve_nodes(h.Q, ce1);
  double v2 = -2.0 * std::cos(h.Q) + K->convolve_nodes(h.Q, ce2);
  h.mu = -v2 / v1;
  h.eps = h.mu * e1 + e2;
  return h;
}

enum class BoundConfig { None, TypeI, TypeII, TypeIII };

inline const char* to_string(BoundConfig c) {
  switch (c) {
    case BoundConfig::None: return "none";
    case BoundConfig::TypeI: return "I";
    case BoundConfig::TypeII: return "II";
    case BoundConfig::TypeIII: return "III";
  }
  return "?";
}

inline constexpr std::array<BoundConfig, 4> all_bound_configs{BoundConfig::None, BoundConfig::TypeI, BoundConfig::TypeII,
                                                              BoundConfig::TypeIII};

// Ground-state bound configuration of each region.
inline BoundConfig ground_config(Region r) {
  switch (r) {
    case Region::I: return BoundConfig::None;
    case Region::II: return BoundConfig::TypeI;
    case Region::III: return BoundConfig::TypeII;
    case Region::IV: return BoundConfig::TypeIII;
  }
  return BoundConfig::None;
}

// Type I needs xi > 1, Type II a positive string centre, Type III a real eta.
inline bool config_available(BoundConfig c, const RegionReport& r) {
  switch (c) {
    case BoundConfig::None: return true;
    case BoundConfig::TypeI: return r.xi > 1.0;
    case BoundConfig::TypeII: return r.xi > r.xi1;
    case BoundConfig::TypeIII: return r.xi > r.xi2;
  }
  return false;
}

namespace detail {

// Appends coef * F^{(m)}_n.
inline void push_F(std::vector<KernelTerm>& out, double coef, int m, double n) {
  if (n < 1.0)
    out.push_back({coef, m - n});
  else if (n > 1.0)
    out.push_back({-coef, n - 2.0 + m});
}

}  // namespace detail

struct ImpurityDriving {
  ChargeDriving charge;
  SpinDriving spin;
};

// h = 0 impurity drivings for a bound-state configuration. The Z-term is always
// present; the string contributes the a_{2t}, a_{4u-2t} charge terms.
inline ImpurityDriving impurity_driving_h0(BoundConfig cfg, const RegionReport& r, const DerivedCouplings& c) {
  if (!config_available(cfg, r)) throw validation_error(std::string("configuration ") + to_string(cfg) + " unavailable");
  double u = r.u;
  ImpurityDriving d;
  d.charge.u = d.spin.u = u;
  d.charge.z_term.emplace(c);
  // A root on the unit circle puts a pole of dPhi/dk on the integration path.
  for (const cplx& z : d.charge.z_term->roots())
    if (std::abs(std::abs(z) - 1.0) < 1e-10) throw pole_error("impurity driving: Z has a pole on the real k axis (xi = 1)");
  if (cfg == BoundConfig::None) return d;
  double t = r.t, n = t / u;
  auto& cg = d.charge.g_terms;
  auto& sg = d.spin.g_terms;
  switch (cfg) {
    case BoundConfig::TypeI:
      cg.push_back({1.0, n + 1.0});
      detail::push_F(cg, 1.0, 1, n);
      sg.push_back({1.0, n});
      detail::push_F(sg, 1.0, 0, n);
      break;
    case BoundConfig::TypeII:
      d.charge.a_terms = {{1.0, 2.0 * t}, {1.0, 4.0 * u - 2.0 * t}};
      cg.push_back({-1.0, n - 1.0});
      detail::push_F(cg, -1.0, 1, n - 2.0);
      sg.push_back({-1.0, n - 2.0});
      detail::push_F(sg, -1.0, 0, n - 2.0);
      break;
    case BoundConfig::TypeIII:
      d.charge.a_terms = {{1.0, 2.0 * t}, {1.0, 4.0 * u - 2.0 * t}};
      break;
    default: break;
  }
  return d;
}

inline ImpurityDriving impurity_driving_h0(const RegionReport& r, const DerivedCouplings& c) {
  return impurity_driving_h0(ground_config(r.region), r, c);
}

// Boundary drivings at h = 0: charge 1/pi - cos k G0(sin k), spin G1.
inline ImpurityDriving boundary_driving_h0(double u) {
  ImpurityDriving d;
  d.charge.u = d.spin.u = u;
  d.charge.constant = 1.0 / pi;
  d.charge.g_terms = {{-1.0, 0.0}};
  d.spin.g_terms = {{1.0, 1.0}};
  return d;
}

struct SplitDensity {
  ChargeSolution charge;
  SpinDriving spin_driving;

  // rho_s(lambda) = driving + int G0(lambda - sin k) rho_c(k) dk
  double spin(double lambda) const { return spin_driving(lambda) + charge.spin_feed(lambda); }
  double spin_integral() const { return spin_driving.integral() + 0.5 * charge.integral(); }
};

inline SplitDensity solve_split(const HostSolution& host, const ImpurityDriving& d) {
  return {ChargeSolution(host.kernel, d.charge), d.spin};
}

inline SplitDensity solve_impurity_h0(const HostSolution& host, BoundConfig cfg, const RegionReport& r,
                                      const DerivedCouplings& c) {
  if (std::abs(host.u - r.u) > 1e-14 * std::max(1.0, r.u)) throw validation_error("host and region disagree on u");
  return solve_split(host, impurity_driving_h0(cfg, r, c));
}

struct DensitySolution {
  HostSolution host;
  SplitDensity boundary;
  SplitDensity impurity;
  RegionReport region;
  BoundConfig config = BoundConfig::None;
  double A = std::numeric_limits<double>::infinity();
};

inline DensitySolution solve_densities(double U, double p, double phi, double n_target, int nodes = default_nodes) {
  DerivedCouplings c = derive_couplings(U, p, phi);
  RegionReport r = classify_region(solve_xi(c), U / 4.0);
  DensitySolution s;
  s.host = solve_host_h0(n_target, r.u, nodes);
  s.region = r;
  s.config = ground_config(r.region);
  s.boundary = solve_split(s.host, boundary_driving_h0(r.u));
  s.impurity = solve_impurity_h0(s.host, s.config, r, c);
  return s;
}

struct HeavisideTerms {
  double H_xi_1 = 0.0;
  double H_xi_xi1 = 0.0;
  double H_xi_xi2 = 0.0;
};

inline double heaviside(double x) { return x > 0.0 ? 1.0 : 0.0; }

struct ObservableDecomposition {
  double n_inf = 0.0, n_b = 0.0, n_i = 0.0;
  double m_inf = 0.0, m_b = 0.0, m_i = 0.0;
  HeavisideTerms steps;
};

inline ObservableDecomposition observables(const DensitySolution& d) {
  ObservableDecomposition o;
  const RegionReport& r = d.region;
  o.steps = {heaviside(r.xi - 1.0), heaviside(r.xi - r.xi1), heaviside(r.xi - r.xi2)};
  double Ic_inf = d.host.integral();
  double Ic_b = d.boundary.charge.integral(), Is_b = d.boundary.spin_integral();
  double Ic_i = d.impurity.charge.integral(), Is_i = d.impurity.spin_integral();
  // h = 0: the host spin density integrates to half the charge integral.
  double Is_inf = 0.5 * Ic_inf;
  o.n_inf = 0.5 * Ic_inf;
  o.n_b = 0.5 * Ic_b - 0.5;
  o.n_i = 0.5 * Ic_i + o.steps.H_xi_1 + o.steps.H_xi_xi2;
  o.m_inf = 0.25 * Ic_inf - 0.5 * Is_inf;
  o.m_b = 0.25 * Ic_b - 0.5 * Is_b + 0.25;
  o.m_i = 0.25 * Ic_i - 0.5 * Is_i + 0.5 * o.steps.H_xi_1 - o.steps.H_xi_xi1 + 0.5 * o.steps.H_xi_xi2;
  return o;
}

struct ImpurityEnergyReport {
  static constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::array<double, 4> eps_imp{nan, nan, nan, nan};  // indexed by BoundConfig
  std::array<bool, 4> available{false, false, false, false};
  double E1 = nan;
  double E2 = nan;
  double mu = nan;
  double eps0 = nan;   // host energy per site
  double eps_b = nan;  // boundary energy
  BoundConfig argmin = BoundConfig::None;
  RegionReport region;

  double eps(BoundConfig c) const { return eps_imp[static_cast<int>(c)]; }
};

inline double bound_energy_E1(double xi, double mu, double h = 0.0) { return -xi - 1.0 / xi + mu - 0.5 * h; }
inline double bound_energy_E2(double t, double u, double mu, double h = 0.0) {
  return -2.0 * std::sqrt(1.0 + (t - 2.0 * u) * (t - 2.0 * u)) + mu - 0.5 * h;
}

// h = 0 impurity energy of each available configuration at the host's density.
inline ImpurityEnergyReport impurity_energy(const HostSolution& host, const DerivedCouplings& c, const RegionReport& r) {
  ImpurityEnergyReport rep;
  rep.region = r;
  rep.mu = host.mu;
  double mu = host.mu;
  auto e0 = [mu](double k) { return mu - 2.0 * std::cos(k); };
  rep.eps0 = 0.5 * host.integrate(e0);
  ChargeSolution b(host.kernel, boundary_driving_h0(r.u).charge);
  rep.eps_b = 0.5 * b.integrate(e0) - 0.5 * e0(0.0);
  if (r.xi > 1.0) rep.E1 = bound_energy_E1(r.xi, mu);
  if (r.xi > 1.0) rep.E2 = bound_energy_E2(r.t, r.u, mu);
  double best = std::numeric_limits<double>::infinity();
  for (BoundConfig cfg : all_bound_configs) {
    int i = static_cast<int>(cfg);
    if (!config_available(cfg, r)) continue;
    ChargeSolution s(host.kernel, impurity_driving_h0(cfg, r, c).charge);
    double e = 0.5 * s.integrate(e0);
    if (cfg == BoundConfig::TypeI || cfg == BoundConfig::TypeII) e += rep.E1;
    if (cfg == BoundConfig::TypeIII) e += rep.E1 + rep.E2;
    rep.available[i] = true;
    rep.eps_imp[i] = e;
    if (e < best) {
      best = e;
      rep.argmin = cfg;
    }
  }
  return rep;
}

inline ImpurityEnergyReport impurity_energy(double U, double p, double phi, double n_target, int nodes = default_nodes) {
  DerivedCouplings c = derive_couplings(U, p, phi);
  RegionReport r = classify_region(solve_xi(c), U / 4.0);
  return impurity_energy(solve_host_h0(n_target, r.u, nodes), c, r);
}

}  // namespace hubimp

#endif
