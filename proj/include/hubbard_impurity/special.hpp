#ifndef HUBBARD_IMPURITY_SPECIAL_HPP
#define HUBBARD_IMPURITY_SPECIAL_HPP

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "model.hpp"

namespace hubimp {

// Complex digamma. Recurrence up to Re z >= 12, then the asymptotic series;
// reflection for Re z < 0.5.
inline cplx digamma(cplx z) {
  if (z.real() < 0.5) {
    if (z.imag() == 0.0 && z.real() == std::floor(z.real())) throw pole_error("digamma: pole at non-positive integer");
    return digamma(1.0 - z) - pi / std::tan(pi * z);
  }
  cplx acc = 0.0;
  while (z.real() < 12.0) {
    acc -= 1.0 / z;
    z += 1.0;
  }
  cplx w = 1.0 / (z * z);
  // Bernoulli terms B_2k / (2k).
  cplx series = w * (1.0 / 12.0 -
                     w * (1.0 / 120.0 -
                          w * (1.0 / 252.0 - w * (1.0 / 240.0 - w * (1.0 / 132.0 - w * (691.0 / 32760.0 - w / 12.0))))));
  return acc + std::log(z) - 0.5 / z - series;
}

// Principal-branch log Gamma.
inline cplx lgamma(cplx z) {
  if (z.real() < 0.5) {
    if (z.imag() == 0.0 && z.real() == std::floor(z.real())) throw pole_error("lgamma: pole at non-positive integer");
    // log(pi / sin(pi z)) - lgamma(1 - z)
    return std::log(pi) - std::log(std::sin(pi * z)) - lgamma(1.0 - z);
  }
  cplx shift = 0.0;
  while (z.real() < 12.0) {
    shift += std::log(z);
    z += 1.0;
  }
  cplx w = 1.0 / (z * z);
  cplx series = (1.0 / 12.0 - w * (1.0 / 360.0 - w * (1.0 / 1260.0 - w * (1.0 / 1680.0 - w * (1.0 / 1188.0)))))
                / z;
  return (z - 0.5) * std::log(z) - z + 0.5 * std::log(2.0 * pi) + series - shift;
}

inline cplx gamma(cplx z) { return std::exp(lgamma(z)); }

struct QuadratureRule {
  std::vector<double> x;
  std::vector<double> w;

  std::size_t size() const { return x.size(); }
  template <class F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f(x[i]);
    return s;
  }
  void append(const QuadratureRule& o) {
    x.insert(x.end(), o.x.begin(), o.x.end());
    w.insert(w.end(), o.w.begin(), o.w.end());
  }
};

// Gauss-Legendre on [a, b] by Newton iteration on P_n.
inline QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0) {
  if (n < 1) throw validation_error("gauss_legendre: n must be positive");
  QuadratureRule r;
  r.x.resize(n);
  r.w.resize(n);
  double c = 0.5 * (b - a), m = 0.5 * (b + a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) {
        // one more pass for the derivative at the converged node
        p0 = 1.0;
        p1 = x;
        for (int k = 2; k <= n; ++k) {
          double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        if (n == 1) p0 = 1.0;
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        break;
      }
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.x[i] = m - c * x;
    r.x[n - 1 - i] = m + c * x;
    r.w[i] = r.w[n - 1 - i] = c * w;
  }
  return r;
}

// Gauss-Laguerre for weight e^{-x} on [0, inf), Golub-Welsch.
inline QuadratureRule gauss_laguerre(int n) {
  if (n < 1) throw validation_error("gauss_laguerre: n must be positive");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    J(i, i) = 2.0 * i + 1.0;
    if (i + 1 < n) J(i, i + 1) = J(i + 1, i) = i + 1.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  QuadratureRule r;
  for (int i = 0; i < n; ++i) {
    double v = es.eigenvectors()(0, i);
    r.x.push_back(es.eigenvalues()(i));
    r.w.push_back(v * v);
  }
  return r;
}

// Composite Gauss-Legendre rule adapted to f: panels are bisected until the
// order-n and two-half-panel estimates agree to tol * scale.
inline QuadratureRule adaptive_rule(const std::function<double(double)>& f, std::vector<double> breaks, double tol = 1e-14,
                                    int order = 16, int max_depth = 60) {
  QuadratureRule ref = gauss_legendre(order, 0.0, 1.0);
  QuadratureRule out;
  struct Panel {
    double a, b, est;
    int depth;
  };
  auto panel_rule = [&](double a, double b) {
    QuadratureRule r;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      r.x.push_back(a + (b - a) * ref.x[i]);
      r.w.push_back((b - a) * ref.w[i]);
    }
    return r;
  };
  auto integ = [&](const QuadratureRule& r, double* absval) {
    double s = 0.0, sa = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      double v = f(r.x[i]);
      s += r.w[i] * v;
      sa += r.w[i] * std::abs(v);
    }
    if (absval) *absval = sa;
    return s;
  };
  std::vector<Panel> stack;
  double scale = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (!(breaks[i + 1] > breaks[i])) continue;
    double sa = 0.0;
    double e = integ(panel_rule(breaks[i], breaks[i + 1]), &sa);
    scale += sa;
    stack.push_back({breaks[i], breaks[i + 1], e, 0});
  }
  scale = std::max(scale, 1e-300);
  while (!stack.empty()) {
    Panel p = stack.back();
    stack.pop_back();
    double mid = 0.5 * (p.a + p.b);
    double l = integ(panel_rule(p.a, mid), nullptr), r = integ(panel_rule(mid, p.b), nullptr);
    if (std::abs(l + r - p.est) <= tol * scale || p.depth >= max_depth) {
      out.append(panel_rule(p.a, mid));
      out.append(panel_rule(mid, p.b));
    } else {
      stack.push_back({p.a, mid, l, p.depth + 1});
      stack.push_back({mid, p.b, r, p.depth + 1});
    }
  }
  return out;
}

}  // namespace hubimp

#endif
