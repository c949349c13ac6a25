#ifndef HUBBARD_IMPURITY_INTEGRABILITY_HPP
#define HUBBARD_IMPURITY_INTEGRABILITY_HPP

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "errors.hpp"
#include "model.hpp"

namespace hubimp {

using OperatorMatrix = Eigen::MatrixXcd;

// Principal-branch solution of sinh(2h) = (U/4) sin(2 theta).
inline cplx h_tilde(cplx theta, double U) { return 0.5 * std::asinh(0.25 * U * std::sin(2.0 * theta)); }

namespace detail {

inline Eigen::Matrix2cd pauli_z() {
  Eigen::Matrix2cd m;
  m << 1, 0, 0, -1;
  return m;
}
inline Eigen::Matrix2cd sigma_plus() {
  Eigen::Matrix2cd m;
  m << 0, 1, 0, 0;
  return m;
}
inline Eigen::Matrix2cd sigma_minus() { return sigma_plus().transpose(); }

inline OperatorMatrix kron(const OperatorMatrix& a, const OperatorMatrix& b) {
  OperatorMatrix r(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return r;
}

inline OperatorMatrix kron4(const OperatorMatrix& a, const OperatorMatrix& b, const OperatorMatrix& c,
                            const OperatorMatrix& d) {
  return kron(kron(kron(a, b), c), d);
}

// Spin-chain L-operator for one species. slot = 0 acts on sigma, 1 on tau,
// inside the ordering (1 sigma, 1 tau, 2 sigma, 2 tau).
inline OperatorMatrix L_species(cplx th, int slot) {
  OperatorMatrix I = OperatorMatrix::Identity(2, 2);
  OperatorMatrix z = pauli_z(), sp = sigma_plus(), sm = sigma_minus();
  auto place = [&](const OperatorMatrix& a, const OperatorMatrix& b) {
    return slot == 0 ? kron4(a, I, b, I) : kron4(I, a, I, b);
  };
  cplx c = std::cos(th), s = std::sin(th);
  return 0.5 * (c + s) * OperatorMatrix::Identity(16, 16) + 0.5 * (c - s) * place(z, z) + place(sp, sm) +
         place(sm, sp);
}

inline double rel_norm(const OperatorMatrix& lhs, const OperatorMatrix& rhs) {
  return (lhs - rhs).norm() / std::max(lhs.norm(), 1.0);
}

}  // namespace detail

// Tensor ordering: (space 1 sigma) x (space 1 tau) x (space 2 sigma) x (space 2 tau).
inline OperatorMatrix build_R(cplx t1, cplx t2, double U) {
  cplx c = std::cos(t1 + t2);
  if (std::abs(c) < 1e-14) throw pole_error("build_R: cos(theta1 + theta2) = 0");
  cplx dh = h_tilde(t1, U) - h_tilde(t2, U);
  OperatorMatrix I = OperatorMatrix::Identity(2, 2);
  OperatorMatrix z = detail::pauli_z();
  OperatorMatrix S1 = detail::kron4(z, z, I, I);
  OperatorMatrix a = detail::L_species(t1 - t2, 0) * detail::L_species(t1 - t2, 1);
  OperatorMatrix b = detail::L_species(t1 + t2, 0) * detail::L_species(t1 + t2, 1) * S1;
  return std::cosh(dh) * a + (std::cos(t1 - t2) / c) * std::sinh(dh) * b;
}

// Swap of the two four-dimensional spaces.
inline OperatorMatrix swap_spaces() {
  OperatorMatrix P = OperatorMatrix::Zero(16, 16);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) P(j * 4 + i, i * 4 + j) = 1.0;
  return P;
}

struct KMatrices {
  OperatorMatrix Kplus;
  OperatorMatrix Kminus;
};

inline KMatrices build_K(cplx theta, double p) {
  KMatrices k;
  k.Kplus = OperatorMatrix::Identity(4, 4);
  k.Kminus = OperatorMatrix::Identity(4, 4);
  const double s[4] = {2.0, 0.0, 0.0, -2.0};
  for (int i = 0; i < 4; ++i) k.Kminus(i, i) = 1.0 - p * s[i] * theta;
  return k;
}

// Embed a 16x16 operator acting on four-dimensional spaces (a, b) into n spaces.
inline OperatorMatrix embed_pair(const OperatorMatrix& M, int a, int b, int n) {
  Eigen::Index d = 1;
  for (int i = 0; i < n; ++i) d *= 4;
  auto stride = [&](int s) {
    Eigen::Index r = 1;
    for (int i = s + 1; i < n; ++i) r *= 4;
    return r;
  };
  Eigen::Index sa = stride(a), sb = stride(b);
  OperatorMatrix full = OperatorMatrix::Zero(d, d);
  for (Eigen::Index row = 0; row < d; ++row) {
    int ia = static_cast<int>((row / sa) % 4), ib = static_cast<int>((row / sb) % 4);
    Eigen::Index base = row - ia * sa - ib * sb;
    for (int ja = 0; ja < 4; ++ja)
      for (int jb = 0; jb < 4; ++jb) {
        cplx v = M(ia * 4 + ib, ja * 4 + jb);
        if (v != cplx(0.0)) full(row, base + ja * sa + jb * sb) += v;
      }
  }
  return full;
}

// R12(1,2) R13(1,3) R23(2,3) vs R23 R13 R12 on the 64-dimensional triple space.
inline double check_ybe(cplx t1, cplx t2, cplx t3, double U) {
  OperatorMatrix r12 = embed_pair(build_R(t1, t2, U), 0, 1, 3);
  OperatorMatrix r13 = embed_pair(build_R(t1, t3, U), 0, 2, 3);
  OperatorMatrix r23 = embed_pair(build_R(t2, t3, U), 1, 2, 3);
  return detail::rel_norm(r12 * r13 * r23, r23 * r13 * r12);
}

// R12(t1,t2) K1(t1) R21(t2,-t1) K2(t2) = K2(t2) R12(t1,-t2) K1(t1) R21(-t2,-t1), with R21 = P R P.
inline double check_reflection(cplx t1, cplx t2, double U, double p) {
  OperatorMatrix P = swap_spaces();
  OperatorMatrix I4 = OperatorMatrix::Identity(4, 4);
  OperatorMatrix K1 = detail::kron(build_K(t1, p).Kminus, I4);
  OperatorMatrix K2 = detail::kron(I4, build_K(t2, p).Kminus);
  auto R21 = [&](cplx a, cplx b) { return OperatorMatrix(P * build_R(a, b, U) * P); };
  OperatorMatrix lhs = build_R(t1, t2, U) * K1 * R21(t2, -t1) * K2;
  OperatorMatrix rhs = K2 * build_R(t1, -t2, U) * K1 * R21(-t2, -t1);
  return detail::rel_norm(lhs, rhs);
}

// Dual reflection equation with K+ = 1:
// R21(t2,t1) R12(-t1-pi,t2) = R21(-t2-pi,t1) R12(-t1,-t2). Optional diagnostic.
inline double check_reflection_plus(cplx t1, cplx t2, double U) {
  OperatorMatrix P = swap_spaces();
  auto R21 = [&](cplx a, cplx b) { return OperatorMatrix(P * build_R(a, b, U) * P); };
  OperatorMatrix lhs = R21(t2, t1) * build_R(-t1 - pi, t2, U);
  OperatorMatrix rhs = R21(-t2 - pi, t1) * build_R(-t1, -t2, U);
  return detail::rel_norm(lhs, rhs);
}

// Double-row transfer matrix t(theta) = str_0[T(theta) K-(theta) T^{-1}(-theta)]
// with T(theta) = R_{0L}(theta,0) ... R_{01}(theta,varphi); the supertrace
// carries the sigma^z tau^z grading of the auxiliary space.
inline OperatorMatrix transfer_matrix(cplx theta, cplx varphi, int L, double U, double p) {
  if (L < 1 || L > 4) throw validation_error("transfer_matrix: L must be in 1..4");
  int n = L + 1;
  Eigen::Index d = 1;
  for (int i = 0; i < L; ++i) d *= 4;
  auto mono = [&](cplx t) {
    OperatorMatrix M = OperatorMatrix::Identity(4 * d, 4 * d);
    for (int j = L; j >= 1; --j) M = M * embed_pair(build_R(t, j == 1 ? varphi : cplx(0.0), U), 0, j, n);
    return M;
  };
  OperatorMatrix K = detail::kron(build_K(theta, p).Kminus, OperatorMatrix::Identity(d, d));
  OperatorMatrix Tm = mono(-theta);
  Eigen::PartialPivLU<OperatorMatrix> lu(Tm);
  OperatorMatrix prod = mono(theta) * K * lu.inverse();
  const double grade[4] = {1.0, -1.0, -1.0, 1.0};
  OperatorMatrix t = OperatorMatrix::Zero(d, d);
  for (int a = 0; a < 4; ++a) t += grade[a] * prod.block(a * d, a * d, d, d);
  return t;
}

inline double check_transfer_commutativity(cplx t1, cplx t2, cplx varphi, int L, double U, double p) {
  if (L < 2 || L > 3) throw validation_error("check_transfer_commutativity: L must be 2 or 3");
  OperatorMatrix A = transfer_matrix(t1, varphi, L, U, p);
  OperatorMatrix B = transfer_matrix(t2, varphi, L, U, p);
  double scale = std::max(A.norm() * B.norm(), 1e-300);
  return (A * B - B * A).norm() / scale;
}

}  // namespace hubimp

#endif
