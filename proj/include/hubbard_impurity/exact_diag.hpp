#ifndef HUBBARD_IMPURITY_EXACT_DIAG_HPP
#define HUBBARD_IMPURITY_EXACT_DIAG_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "errors.hpp"
#include "model.hpp"

namespace hubimp {

// Fixed (n_up, n_down) sector. Mode order: up sites 1..L, then down sites 1..L;
// a basis state packs the up string in bits [0, L) and the down string in [L, 2L).
class SectorBasis {
 public:
  SectorBasis(int L, int n_up, int n_down) : L_(L), n_up_(n_up), n_down_(n_down) {
    if (L < 1 || L > 14) throw validation_error("ED requires 1 <= L <= 14");
    if (n_up < 0 || n_up > L || n_down < 0 || n_down > L) throw validation_error("sector out of range");
    std::vector<std::uint32_t> ups = strings(n_up), downs = strings(n_down);
    double dim = double(ups.size()) * double(downs.size());
    if (dim > 4.0e6) throw validation_error("sector dimension too large for ED");
    states_.reserve(static_cast<std::size_t>(dim));
    for (std::uint32_t d : downs)
      for (std::uint32_t up : ups) states_.push_back(std::uint64_t(up) | (std::uint64_t(d) << L));
    for (std::size_t i = 0; i < states_.size(); ++i) index_.emplace(states_[i], i);
  }

  int L() const { return L_; }
  int n_up() const { return n_up_; }
  int n_down() const { return n_down_; }
  std::size_t size() const { return states_.size(); }
  std::uint64_t state(std::size_t i) const { return states_[i]; }
  const std::vector<std::uint64_t>& states() const { return states_; }

  std::ptrdiff_t find(std::uint64_t s) const {
    auto it = index_.find(s);
    return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
  }

  // Mode index of site j (1-based) and spin (0 up, 1 down).
  int mode(int site, int spin) const { return spin * L_ + site - 1; }

 private:
  std::vector<std::uint32_t> strings(int n) const {
    std::vector<std::uint32_t> r;
    for (std::uint32_t s = 0; s < (1u << L_); ++s)
      if (std::popcount(s) == n) r.push_back(s);
    return r;
  }

  int L_, n_up_, n_down_;
  std::vector<std::uint64_t> states_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

using SparseHamiltonian = Eigen::SparseMatrix<cplx, Eigen::ColMajor>;

namespace detail {

inline bool occupied(std::uint64_t s, int m) { return (s >> m) & 1u; }

// Applies c^dag_a c_b to s; returns false if the result vanishes.
inline bool hop(std::uint64_t s, int a, int b, std::uint64_t& out, double& sign) {
  if (!occupied(s, b)) return false;
  if (a != b && occupied(s, a)) return false;
  std::uint64_t t = s & ~(std::uint64_t(1) << b);
  int lo = std::min(a, b), hi = std::max(a, b);
  std::uint64_t between = hi - lo > 1 ? ((std::uint64_t(1) << hi) - 1) & ~((std::uint64_t(1) << (lo + 1)) - 1) : 0;
  sign = (std::popcount(t & between) % 2) ? -1.0 : 1.0;
  out = t | (std::uint64_t(1) << a);
  return true;
}

}  // namespace detail

// H = -sum_{j=2}^{L-1} hops + U sum_{j>=2} n_up n_dn + gamma U n_1up n_1dn + eps1 n_1 + eps2 n_2
//     + sum_s (V c+_1s c_2s + V* c+_2s c_1s) + Delta sum_s n_{1,-s}(c+_1s c_2s + h.c.)
//     + mu N - (h/2)(N_up - N_dn)
inline SparseHamiltonian build_hamiltonian(const ModelParams& m, const DerivedCouplings& c, const SectorBasis& basis) {
  const int L = basis.L();
  std::vector<Eigen::Triplet<cplx>> trip;
  std::unordered_map<std::size_t, cplx> row;
  for (std::size_t col = 0; col < basis.size(); ++col) {
    std::uint64_t s = basis.state(col);
    row.clear();
    auto add = [&](std::uint64_t target, cplx amp) {
      std::ptrdiff_t r = basis.find(target);
      if (r < 0) throw validation_error("internal: hop left the sector");
      row[static_cast<std::size_t>(r)] += amp;
    };
    auto n = [&](int site, int spin) { return detail::occupied(s, basis.mode(site, spin)) ? 1.0 : 0.0; };

    double diag = 0.0;
    for (int j = 1; j <= L; ++j) {
      double nn = n(j, 0) * n(j, 1);
      diag += (j == 1 ? c.gamma * m.U : m.U) * nn;
      diag += m.mu * (n(j, 0) + n(j, 1)) - 0.5 * m.h * (n(j, 0) - n(j, 1));
    }
    diag += c.eps1 * (n(1, 0) + n(1, 1));
    if (L >= 2) diag += c.eps2 * (n(2, 0) + n(2, 1));
    if (diag != 0.0) row[col] += diag;

    for (int spin = 0; spin < 2; ++spin) {
      std::uint64_t t;
      double sg;
      for (int j = 2; j <= L - 1; ++j) {
        int a = basis.mode(j, spin), b = basis.mode(j + 1, spin);
        if (detail::hop(s, a, b, t, sg)) add(t, -sg);
        if (detail::hop(s, b, a, t, sg)) add(t, -sg);
      }
      if (L >= 2) {
        int a = basis.mode(1, spin), b = basis.mode(2, spin);
        double other = detail::occupied(s, basis.mode(1, 1 - spin)) ? 1.0 : 0.0;
        if (detail::hop(s, a, b, t, sg)) add(t, sg * (c.V + c.delta * other));
        if (detail::hop(s, b, a, t, sg)) add(t, sg * (std::conj(c.V) + c.delta * other));
      }
    }
    for (const auto& [r, v] : row)
      if (v != cplx(0.0)) trip.emplace_back(static_cast<int>(r), static_cast<int>(col), v);
  }
  SparseHamiltonian H(basis.size(), basis.size());
  H.setFromTriplets(trip.begin(), trip.end());
  H.makeCompressed();
  return H;
}

inline SparseHamiltonian build_hamiltonian(const ModelParams& m, const SectorBasis& basis, bool strict = true) {
  return build_hamiltonian(m, derive_couplings(m, strict), basis);
}

inline double hermiticity_residual(const SparseHamiltonian& H) {
  SparseHamiltonian d = SparseHamiltonian(H.adjoint()) - H;
  return d.norm();
}

struct SpectrumResult {
  std::vector<double> eigenvalues;
  Eigen::MatrixXcd eigenvectors;  // columns, possibly empty
  int n_up = 0;
  int n_down = 0;
};

struct DiagOptions {
  bool vectors = false;
  std::size_t dense_threshold = 4096;
  int max_restarts = 500;
  double tol = 1e-11;
  unsigned seed = 12345;
};

namespace detail {

inline SpectrumResult dense_lowest(const SparseHamiltonian& H, int k, bool vectors) {
  Eigen::MatrixXcd D = Eigen::MatrixXcd(H);
  D = 0.5 * (D + D.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(D, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  SpectrumResult r;
  for (int i = 0; i < k; ++i) r.eigenvalues.push_back(es.eigenvalues()(i));
  if (vectors) r.eigenvectors = es.eigenvectors().leftCols(k);
  return r;
}

// Thick-restart Lanczos with full reorthogonalization.
inline SpectrumResult lanczos_lowest(const SparseHamiltonian& H, int k, const DiagOptions& opt) {
  const Eigen::Index n = H.rows();
  const int m = static_cast<int>(std::min<Eigen::Index>(n, std::max(2 * k + 30, 60)));
  const int keep = std::max(k + 5, m / 2);
  Eigen::MatrixXcd V(n, m + 1);
  Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(m, m);
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx(g(rng), g(rng));
  V.col(0) = v.normalized();
  int start = 0;
  Eigen::VectorXd theta;
  Eigen::MatrixXcd Y;
  for (int restart = 0; restart < opt.max_restarts; ++restart) {
    int j = start;
    double beta = 0.0;
    for (; j < m; ++j) {
      Eigen::VectorXcd w = H * V.col(j);
      Eigen::VectorXcd hcol = V.leftCols(j + 1).adjoint() * w;
      w -= V.leftCols(j + 1) * hcol;
      Eigen::VectorXcd h2 = V.leftCols(j + 1).adjoint() * w;
      w -= V.leftCols(j + 1) * h2;
      hcol += h2;
      for (int i = 0; i <= j; ++i) {
        T(i, j) = hcol(i);
        T(j, i) = std::conj(hcol(i));
      }
      T(j, j) = hcol(j).real();
      beta = w.norm();
      if (beta < 1e-13 * std::max(1.0, std::abs(T(j, j)))) {
        // Invariant subspace found; continue with a fresh orthogonal direction.
        if (j + 1 >= n) {
          ++j;
          beta = 0.0;
          break;
        }
        for (Eigen::Index i = 0; i < n; ++i) w(i) = cplx(g(rng), g(rng));
        for (int pass = 0; pass < 2; ++pass) w -= V.leftCols(j + 1) * (V.leftCols(j + 1).adjoint() * w);
        V.col(j + 1) = w.normalized();
        beta = 0.0;
        continue;
      }
      V.col(j + 1) = w / beta;
    }
    int msize = j;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(T.topLeftCorner(msize, msize));
    theta = es.eigenvalues();
    Y = es.eigenvectors();
    bool done = msize >= n;
    if (!done) {
      done = true;
      for (int i = 0; i < k; ++i) {
        double res = beta * std::abs(Y(msize - 1, i));
        if (res > opt.tol * std::max(1.0, std::abs(theta(i)))) done = false;
      }
    }
    if (done || restart + 1 == opt.max_restarts) {
      if (!done) throw convergence_error("Lanczos did not converge within the restart cap");
      SpectrumResult r;
      for (int i = 0; i < k; ++i) r.eigenvalues.push_back(theta(i));
      if (opt.vectors) {
        r.eigenvectors = V.leftCols(msize) * Y.leftCols(k);
        for (int i = 0; i < k; ++i) r.eigenvectors.col(i).normalize();
      }
      return r;
    }
    // Thick restart: keep the lowest Ritz vectors plus the residual direction.
    int l = std::min(keep, msize - 1);
    Eigen::MatrixXcd Vk = V.leftCols(msize) * Y.leftCols(l);
    Eigen::VectorXcd next = V.col(msize);
    T.setZero();
    for (int i = 0; i < l; ++i) {
      V.col(i) = Vk.col(i);
      T(i, i) = theta(i);
      cplx s = beta * Y(msize - 1, i);
      T(i, l) = std::conj(s);
      T(l, i) = s;
    }
    V.col(l) = next;
    // Column l is rebuilt by the projection loop, which recomputes its couplings.
    start = l;
  }
  throw convergence_error("Lanczos did not converge");
}

}  // namespace detail

inline SpectrumResult diagonalize(const SparseHamiltonian& H, int k_lowest, const DiagOptions& opt = {}) {
  if (k_lowest < 1 || H.rows() < k_lowest) throw validation_error("diagonalize: need dim >= k >= 1");
  if (static_cast<std::size_t>(H.rows()) <= opt.dense_threshold) return detail::dense_lowest(H, k_lowest, opt.vectors);
  return detail::lanczos_lowest(H, k_lowest, opt);
}

struct LocalObservables {
  std::vector<double> n_up;    // site 1..L at index 0..L-1
  std::vector<double> n_down;
  double double_occupancy_1 = 0.0;
};

inline LocalObservables local_observables(const Eigen::VectorXcd& state, const SectorBasis& basis) {
  LocalObservables o;
  const int L = basis.L();
  o.n_up.assign(L, 0.0);
  o.n_down.assign(L, 0.0);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    double w = std::norm(state(static_cast<Eigen::Index>(i)));
    std::uint64_t s = basis.state(i);
    for (int j = 1; j <= L; ++j) {
      if (detail::occupied(s, basis.mode(j, 0))) o.n_up[j - 1] += w;
      if (detail::occupied(s, basis.mode(j, 1))) o.n_down[j - 1] += w;
    }
    if (detail::occupied(s, basis.mode(1, 0)) && detail::occupied(s, basis.mode(1, 1))) o.double_occupancy_1 += w;
  }
  return o;
}

// Lowest k energies of a sector.
inline SpectrumResult sector_spectrum(const ModelParams& m, int n_up, int n_down, int k, bool strict = true,
                                      DiagOptions opt = {}) {
  SectorBasis b(m.L, n_up, n_down);
  if (b.size() == 0) throw validation_error("empty sector");
  auto H = build_hamiltonian(m, b, strict);
  auto r = diagonalize(H, std::min<int>(k, static_cast<int>(b.size())), opt);
  r.n_up = n_up;
  r.n_down = n_down;
  return r;
}

}  // namespace hubimp

#endif
