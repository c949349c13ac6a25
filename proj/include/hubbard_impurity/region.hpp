#ifndef HUBBARD_IMPURITY_REGION_HPP
#define HUBBARD_IMPURITY_REGION_HPP

#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "model.hpp"

namespace hubimp {

enum class Region { I = 1, II = 2, III = 3, IV = 4 };

inline const char* to_string(Region r) {
  switch (r) {
    case Region::I: return "I";
    case Region::II: return "II";
    case Region::III: return "III";
    case Region::IV: return "IV";
  }
  return "?";
}

struct RegionReport {
  double xi = 0.0;
  double xi1 = 1.0;
  double xi2 = 1.0;
  Region region = Region::I;
  double u = 0.0;
  // NaN where undefined for the region.
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double t = std::numeric_limits<double>::quiet_NaN();
  double Lambda = std::numeric_limits<double>::quiet_NaN();
  double eta = std::numeric_limits<double>::quiet_NaN();

  bool has_bound_state() const { return region != Region::I; }
  bool has_string() const { return region == Region::III || region == Region::IV; }
  bool has_two_particle() const { return region == Region::IV; }
};

struct Thresholds {
  double xi1;
  double xi2;
};

inline Thresholds region_thresholds(double u) {
  return {u + std::sqrt(u * u + 1.0), 2.0 * u + std::sqrt(4.0 * u * u + 1.0)};
}

// Coefficients of xi^3 + (eps1+eps2) xi^2 - (W-1) xi + eps2, lowest order first.
inline std::array<double, 4> xi_cubic(const DerivedCouplings& c) {
  return {c.eps2, -(c.W() - 1.0), c.eps1 + c.eps2, 1.0};
}

inline double cubic_value(const std::array<double, 4>& a, double x) {
  return ((a[3] * x + a[2]) * x + a[1]) * x + a[0];
}

// All roots of the xi cubic from the companion matrix, Newton-polished.
inline std::vector<cplx> xi_cubic_roots(const DerivedCouplings& c) {
  auto a = xi_cubic(c);
  Eigen::Matrix3d comp = Eigen::Matrix3d::Zero();
  comp(1, 0) = 1.0;
  comp(2, 1) = 1.0;
  for (int i = 0; i < 3; ++i) comp(i, 2) = -a[i];
  Eigen::EigenSolver<Eigen::Matrix3d> es(comp, false);
  std::vector<cplx> r;
  for (int i = 0; i < 3; ++i) {
    cplx z = es.eigenvalues()(i);
    for (int it = 0; it < 4; ++it) {
      cplx f = ((a[3] * z + a[2]) * z + a[1]) * z + a[0];
      cplx d = (3.0 * a[3] * z + 2.0 * a[2]) * z + a[1];
      if (std::abs(d) == 0.0) break;
      z -= f / d;
    }
    r.push_back(z);
  }
  return r;
}

// Residual scale for the cubic at x.
inline double cubic_scale(const std::array<double, 4>& a, double x) {
  double s = 0.0, xp = 1.0;
  for (int i = 0; i < 4; ++i, xp *= std::abs(x)) s += std::abs(a[i]) * xp;
  return std::max(1.0, s);
}

// Unique real root of the xi cubic. Throws anomaly_error if more than one
// distinct real root exists.
inline double solve_xi(const DerivedCouplings& c) {
  auto a = xi_cubic(c);
  auto roots = xi_cubic_roots(c);
  std::vector<double> real;
  for (const cplx& z : roots) {
    double tol = 1e-7 * std::max(1.0, std::abs(z));
    if (std::abs(z.imag()) <= tol) {
      // Confirm by a sign-change-free Newton residual on the real axis.
      double x = z.real();
      for (int it = 0; it < 4; ++it) {
        double d = (3.0 * a[3] * x + 2.0 * a[2]) * x + a[1];
        if (d == 0.0) break;
        x -= cubic_value(a, x) / d;
      }
      if (std::abs(cubic_value(a, x)) <= 1e-10 * cubic_scale(a, x)) real.push_back(x);
    }
  }
  std::vector<double> distinct;
  for (double x : real) {
    bool dup = false;
    for (double y : distinct)
      if (std::abs(x - y) <= 1e-6 * std::max(1.0, std::abs(y))) dup = true;
    if (!dup) distinct.push_back(x);
  }
  if (distinct.size() != 1) {
    std::ostringstream os;
    os << "xi cubic has " << distinct.size() << " distinct real roots (eps1=" << c.eps1 << " eps2=" << c.eps2
       << " |V|^2=" << std::norm(c.V) << ")";
    throw anomaly_error(os.str());
  }
  double x = distinct[0];
  if (std::abs(cubic_value(a, x)) > 1e-12 * cubic_scale(a, x)) {
    // Bisection fallback on a bracket around x; the cubic is monotone locally.
    double lo = x - 1e-6 * std::max(1.0, std::abs(x)), hi = x + 1e-6 * std::max(1.0, std::abs(x));
    double flo = cubic_value(a, lo);
    if (flo * cubic_value(a, hi) < 0.0) {
      for (int it = 0; it < 200 && hi - lo > 1e-17 * std::max(1.0, std::abs(x)); ++it) {
        double mid = 0.5 * (lo + hi), fm = cubic_value(a, mid);
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      x = 0.5 * (lo + hi);
    }
  }
  return x;
}

inline RegionReport classify_region(double xi, double u) {
  RegionReport r;
  auto th = region_thresholds(u);
  r.xi = xi;
  r.xi1 = th.xi1;
  r.xi2 = th.xi2;
  r.u = u;
  if (xi <= 1.0)
    r.region = Region::I;
  else if (xi <= th.xi1)
    r.region = Region::II;
  else if (xi <= th.xi2)
    r.region = Region::III;
  else
    r.region = Region::IV;
  if (r.region != Region::I) {
    r.kappa = std::log(xi);
    r.t = 0.5 * (xi - 1.0 / xi);
  }
  if (r.has_string()) r.Lambda = r.t - u;
  if (r.has_two_particle()) r.eta = std::asinh(r.Lambda - u);
  return r;
}

inline RegionReport region_of(const ModelParams& m, bool strict = true) {
  return classify_region(solve_xi(derive_couplings(m, strict)), m.u());
}

struct PhaseGrid {
  double phi = 0.0;
  std::vector<double> p_axis;
  std::vector<double> U_axis;
  // Row-major over (p, U): index i * U_axis.size() + j.
  std::vector<double> xi_values;
  std::vector<Region> region_labels;
  std::vector<bool> feasible_mask;

  std::size_t index(std::size_t i, std::size_t j) const { return i * U_axis.size() + j; }
};

inline bool feasible_cell(double U, double p, double phi) {
  return U > 0.0 && std::abs(phi) < phi_max() && p > p_threshold(U, phi) && sqrt_argument(U, phi) >= 0.0;
}

inline std::vector<double> linspace(double a, double b, int n) {
  if (n < 1) throw validation_error("range needs at least one point");
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

inline void require_increasing(const std::vector<double>& v, const char* name) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) throw validation_error(std::string(name) + " axis must be strictly increasing");
}

// Second axis holds the bare U; infeasible cells keep NaN xi and Region I.
inline PhaseGrid scan_phase_diagram(double phi, const std::vector<double>& p_axis, const std::vector<double>& U_axis) {
  require_increasing(p_axis, "p");
  require_increasing(U_axis, "U");
  PhaseGrid g;
  g.phi = phi;
  g.p_axis = p_axis;
  g.U_axis = U_axis;
  std::size_t n = p_axis.size() * U_axis.size();
  g.xi_values.assign(n, std::numeric_limits<double>::quiet_NaN());
  g.region_labels.assign(n, Region::I);
  g.feasible_mask.assign(n, false);
  for (std::size_t i = 0; i < p_axis.size(); ++i)
    for (std::size_t j = 0; j < U_axis.size(); ++j) {
      double p = p_axis[i], U = U_axis[j];
      if (!feasible_cell(U, p, phi)) continue;
      std::size_t k = g.index(i, j);
      double xi = solve_xi(derive_couplings(U, p, phi));
      g.xi_values[k] = xi;
      g.region_labels[k] = classify_region(xi, U / 4.0).region;
      g.feasible_mask[k] = true;
    }
  return g;
}

}  // namespace hubimp

#endif
