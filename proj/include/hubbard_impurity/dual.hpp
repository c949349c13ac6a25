#ifndef HUBBARD_IMPURITY_DUAL_HPP
#define HUBBARD_IMPURITY_DUAL_HPP

#include <cmath>
#include <complex>

namespace hubimp {

// Forward-mode dual number v + d*eps with eps^2 = 0. T is double or std::complex<double>;
// for complex T every function below is the holomorphic extension.
template <class T>
struct Dual {
  T v{};
  T d{};

  Dual() = default;
  Dual(T value) : v(value), d(T(0)) {}
  Dual(T value, T deriv) : v(value), d(deriv) {}
  template <class S, class = std::enable_if_t<std::is_arithmetic_v<S>>>
  Dual(S value) : v(T(value)), d(T(0)) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    d = d * o.v + v * o.d;
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    d = (d * o.v - v * o.d) / (o.v * o.v);
    v /= o.v;
    return *this;
  }
};

template <class T> Dual<T> operator+(Dual<T> a, const Dual<T>& b) { return a += b; }
template <class T> Dual<T> operator-(Dual<T> a, const Dual<T>& b) { return a -= b; }
template <class T> Dual<T> operator*(Dual<T> a, const Dual<T>& b) { return a *= b; }
template <class T> Dual<T> operator/(Dual<T> a, const Dual<T>& b) { return a /= b; }
template <class T> Dual<T> operator-(const Dual<T>& a) { return {-a.v, -a.d}; }

template <class T, class S, class = std::enable_if_t<std::is_arithmetic_v<S> || std::is_same_v<S, T>>>
Dual<T> operator+(Dual<T> a, S b) { a.v += T(b); return a; }
template <class T, class S, class = std::enable_if_t<std::is_arithmetic_v<S> || std::is_same_v<S, T>>>
Dual<T> operator+(S b, Dual<T> a) { a.v += T(b); return a; }
template <class T, class S, class = std::enable_if_t<std::is_arithmetic_v<S> || std::is_same_v<S, T>>>
Dual<T> operator-(Dual<T> a, S b) { a.v -= T(b); return a; }
template <class T, class S, class = std::enable_if_t<std::is_arithmetic_v<S> || std::is_same_v<S, T>>>
Dual<T> operator-(S b, const Dual<T>& a) { return {T(b) - a.v, -a.d}; }
template <class T, class S, class = std::enable_if_t<std::is_arithmetic_v<S> || std::is_same_v<S, T>>>
Dual<T> operator*(Dual<T> a, S b) { a.v *= T(b); a.d *= T(b); return a; }
template <class T, class S, class = std::enable_if_t<std::is_arithmetic_v<S> || std::is_same_v<S, T>>>
Dual<T> operator*(S b, Dual<T> a) { a.v *= T(b); a.d *= T(b); return a; }
template <class T, class S, class = std::enable_if_t<std::is_arithmetic_v<S> || std::is_same_v<S, T>>>
Dual<T> operator/(Dual<T> a, S b) { a.v /= T(b); a.d /= T(b); return a; }
template <class T, class S, class = std::enable_if_t<std::is_arithmetic_v<S> || std::is_same_v<S, T>>>
Dual<T> operator/(S b, const Dual<T>& a) { return Dual<T>(T(b)) / a; }

template <class T> Dual<T> sin(const Dual<T>& a) { using std::sin, std::cos; return {sin(a.v), cos(a.v) * a.d}; }
template <class T> Dual<T> cos(const Dual<T>& a) { using std::sin, std::cos; return {cos(a.v), -sin(a.v) * a.d}; }
template <class T> Dual<T> exp(const Dual<T>& a) { using std::exp; T e = exp(a.v); return {e, e * a.d}; }
template <class T> Dual<T> log(const Dual<T>& a) { using std::log; return {log(a.v), a.d / a.v}; }
template <class T> Dual<T> sinh(const Dual<T>& a) { using std::sinh, std::cosh; return {sinh(a.v), cosh(a.v) * a.d}; }
template <class T> Dual<T> cosh(const Dual<T>& a) { using std::sinh, std::cosh; return {cosh(a.v), sinh(a.v) * a.d}; }
template <class T> Dual<T> atan(const Dual<T>& a) { using std::atan; return {atan(a.v), a.d / (T(1) + a.v * a.v)}; }
template <class T> Dual<T> sqrt(const Dual<T>& a) { using std::sqrt; T r = sqrt(a.v); return {r, a.d / (T(2) * r)}; }
template <class T> Dual<T> log1p(const Dual<T>& a) { return {std::log1p(a.v), a.d / (T(1) + a.v)}; }

inline double value_of(double x) { return x; }
inline std::complex<double> value_of(std::complex<double> x) { return x; }
template <class T> T value_of(const Dual<T>& x) { return x.v; }

}  // namespace hubimp

#endif
