#pragma once

// Truncated Taylor jets in one or two variables.
//
// A Jet<V, N> stores the Taylor coefficients of a function of V variables up
// to total degree N around a base point. Arithmetic and the elementary
// functions propagate the truncated expansion exactly, so evaluating a generic
// expression on seeded jets yields its partial derivatives to machine
// precision. Metric components, profiles and cutoff functions in this library
// are written as generic callables and evaluated on jets.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <type_traits>

namespace anosov {

template <int V, int N>
class Jet {
  static_assert(V == 1 || V == 2, "jets support one or two variables");
  static_assert(N >= 0);

 public:
  static constexpr int kVars = V;
  static constexpr int kOrder = N;
  static constexpr int kSize = V == 1 ? N + 1 : (N + 1) * (N + 2) / 2;

  constexpr Jet() = default;
  constexpr Jet(double v) { c_[0] = v; }  // NOLINT: implicit constants are the point

  /// Independent variable `var` located at `at`.
  static constexpr Jet variable(double at, int var = 0) {
    Jet j(at);
    if constexpr (N >= 1) j.c_[index(var == 0 ? 1 : 0, var == 0 ? 0 : 1)] = 1.0;
    return j;
  }

  static constexpr int index(int a, int b) {
    if constexpr (V == 1) {
      return a;
    } else {
      const int d = a + b;
      return d * (d + 1) / 2 + b;
    }
  }
  static constexpr int degree_x(int idx) {
    if constexpr (V == 1) {
      return idx;
    } else {
      int d = 0;
      while ((d + 1) * (d + 2) / 2 <= idx) ++d;
      return d - (idx - d * (d + 1) / 2);
    }
  }
  static constexpr int degree_y(int idx) {
    if constexpr (V == 1) {
      return 0;
    } else {
      int d = 0;
      while ((d + 1) * (d + 2) / 2 <= idx) ++d;
      return idx - d * (d + 1) / 2;
    }
  }

  constexpr double value() const { return c_[0]; }
  constexpr double coeff(int a, int b = 0) const {
    if (a < 0 || b < 0 || a + b > N) return 0.0;
    if constexpr (V == 1) {
      if (b != 0) return 0.0;
    }
    return c_[index(a, b)];
  }
  constexpr double& coeff_ref(int a, int b = 0) { return c_[index(a, b)]; }

  /// Partial derivative d^{a+b} / dx^a dy^b at the base point.
  constexpr double d(int a, int b = 0) const {
    double f = 1.0;
    for (int k = 2; k <= a; ++k) f *= k;
    for (int k = 2; k <= b; ++k) f *= k;
    return coeff(a, b) * f;
  }

  constexpr const std::array<double, kSize>& coefficients() const { return c_; }
  constexpr std::array<double, kSize>& coefficients() { return c_; }

  Jet& operator+=(const Jet& o) {
    for (int i = 0; i < kSize; ++i) c_[i] += o.c_[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (int i = 0; i < kSize; ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Jet& operator*=(double s) {
    for (auto& x : c_) x *= s;
    return *this;
  }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }
  Jet& operator/=(const Jet& o) { return *this = *this / o; }
  Jet& operator+=(double s) {
    c_[0] += s;
    return *this;
  }
  Jet& operator-=(double s) {
    c_[0] -= s;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(Jet a) {
    for (auto& x : a.c_) x = -x;
    return a;
  }
  friend Jet operator+(Jet a, double s) { return a += s; }
  friend Jet operator+(double s, Jet a) { return a += s; }
  friend Jet operator-(Jet a, double s) { return a -= s; }
  friend Jet operator-(double s, const Jet& a) { return -a + s; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator/(Jet a, double s) { return a *= 1.0 / s; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r(0.0);
    if constexpr (V == 1) {
      for (int i = 0; i <= N; ++i) {
        if (a.c_[i] == 0.0) continue;
        for (int j = 0; i + j <= N; ++j) r.c_[i + j] += a.c_[i] * b.c_[j];
      }
    } else {
      for (int i = 0; i < kSize; ++i) {
        if (a.c_[i] == 0.0) continue;
        const int ai = degree_x(i), bi = degree_y(i);
        for (int j = 0; j < kSize; ++j) {
          const int aj = degree_x(j), bj = degree_y(j);
          if (ai + aj + bi + bj > N) continue;
          r.c_[index(ai + aj, bi + bj)] += a.c_[i] * b.c_[j];
        }
      }
    }
    return r;
  }

  /// Applies g given its Taylor coefficients t[k] = g^{(k)}(u0)/k! at u0 = value().
  Jet compose(const std::array<double, N + 1>& t) const {
    Jet delta = *this;
    delta.c_[0] = 0.0;
    Jet r(t[N]);
    for (int k = N - 1; k >= 0; --k) r = r * delta + t[k];
    return r;
  }

  friend Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
  friend Jet operator/(double s, const Jet& b) { return reciprocal(b) * s; }

  friend Jet reciprocal(const Jet& u) {
    std::array<double, N + 1> t{};
    const double x = u.value();
    double p = 1.0 / x;
    for (int k = 0; k <= N; ++k) {
      t[k] = (k % 2 == 0 ? 1.0 : -1.0) * p;
      p /= x;
    }
    return u.compose(t);
  }

  friend bool operator<(const Jet& a, const Jet& b) { return a.value() < b.value(); }
  friend bool operator>(const Jet& a, const Jet& b) { return a.value() > b.value(); }

 private:
  std::array<double, kSize> c_{};
};

namespace detail {

template <int N>
std::array<double, N + 1> inv_factorials() {
  std::array<double, N + 1> f{};
  f[0] = 1.0;
  for (int k = 1; k <= N; ++k) f[k] = f[k - 1] / k;
  return f;
}

}  // namespace detail

template <int V, int N>
Jet<V, N> exp(const Jet<V, N>& u) {
  const double e = std::exp(u.value());
  auto t = detail::inv_factorials<N>();
  for (auto& x : t) x *= e;
  return u.compose(t);
}

template <int V, int N>
Jet<V, N> expm1(const Jet<V, N>& u) {
  const double e = std::exp(u.value());
  auto t = detail::inv_factorials<N>();
  for (auto& x : t) x *= e;
  t[0] = std::expm1(u.value());
  return u.compose(t);
}

template <int V, int N>
Jet<V, N> sin(const Jet<V, N>& u) {
  auto t = detail::inv_factorials<N>();
  const double s = std::sin(u.value()), c = std::cos(u.value());
  const double cyc[4] = {s, c, -s, -c};
  for (int k = 0; k <= N; ++k) t[k] *= cyc[k % 4];
  return u.compose(t);
}

template <int V, int N>
Jet<V, N> cos(const Jet<V, N>& u) {
  auto t = detail::inv_factorials<N>();
  const double s = std::sin(u.value()), c = std::cos(u.value());
  const double cyc[4] = {c, -s, -c, s};
  for (int k = 0; k <= N; ++k) t[k] *= cyc[k % 4];
  return u.compose(t);
}

template <int V, int N>
Jet<V, N> sinh(const Jet<V, N>& u) {
  auto t = detail::inv_factorials<N>();
  const double s = std::sinh(u.value()), c = std::cosh(u.value());
  for (int k = 0; k <= N; ++k) t[k] *= (k % 2 == 0 ? s : c);
  return u.compose(t);
}

template <int V, int N>
Jet<V, N> cosh(const Jet<V, N>& u) {
  auto t = detail::inv_factorials<N>();
  const double s = std::sinh(u.value()), c = std::cosh(u.value());
  for (int k = 0; k <= N; ++k) t[k] *= (k % 2 == 0 ? c : s);
  return u.compose(t);
}

template <int V, int N>
Jet<V, N> tanh(const Jet<V, N>& u) {
  // d/dx P(T) = P'(T) (1 - T^2), starting from P_0(T) = T.
  const double T = std::tanh(u.value());
  std::array<double, N + 2> poly{};  // coefficients of P_k in powers of T
  poly[1] = 1.0;
  auto t = detail::inv_factorials<N>();
  for (int k = 0; k <= N; ++k) {
    double v = 0.0, p = 1.0;
    for (int i = 0; i < N + 2; ++i) {
      v += poly[i] * p;
      p *= T;
    }
    t[k] *= v;
    std::array<double, N + 2> next{};
    for (int i = 1; i < N + 2; ++i) {
      const double dp = i * poly[i];  // coefficient of T^{i-1} in P'
      if (i - 1 < N + 2) next[i - 1] += dp;
      if (i + 1 < N + 2) next[i + 1] -= dp;
    }
    poly = next;
  }
  return u.compose(t);
}

template <int V, int N>
Jet<V, N> log(const Jet<V, N>& u) {
  std::array<double, N + 1> t{};
  const double x = u.value();
  t[0] = std::log(x);
  double p = 1.0;
  for (int k = 1; k <= N; ++k) {
    p /= x;
    t[k] = (k % 2 == 1 ? 1.0 : -1.0) * p / k;
  }
  return u.compose(t);
}

template <int V, int N>
Jet<V, N> pow(const Jet<V, N>& u, double e) {
  std::array<double, N + 1> t{};
  const double x = u.value();
  double binom = 1.0;
  for (int k = 0; k <= N; ++k) {
    t[k] = binom * std::pow(x, e - k);
    binom *= (e - k) / (k + 1);
  }
  return u.compose(t);
}

template <int V, int N>
Jet<V, N> sqrt(const Jet<V, N>& u) {
  auto r = pow(u, 0.5);
  r.coeff_ref(0) = std::sqrt(u.value());
  return r;
}

template <int V, int N>
Jet<V, N> pow(const Jet<V, N>& u, const Jet<V, N>& e) {
  return exp(e * log(u));
}

/// Partial derivative of a bivariate jet; the result loses one order.
template <int N>
Jet<2, N - 1> partial(const Jet<2, N>& u, int var) {
  Jet<2, N - 1> r;
  for (int d = 0; d <= N - 1; ++d) {
    for (int b = 0; b <= d; ++b) {
      const int a = d - b;
      r.coeff_ref(a, b) = var == 0 ? (a + 1) * u.coeff(a + 1, b) : (b + 1) * u.coeff(a, b + 1);
    }
  }
  return r;
}

template <int M, int V, int N>
Jet<V, M> truncate(const Jet<V, N>& u) {
  static_assert(M <= N);
  Jet<V, M> r;
  for (int i = 0; i < Jet<V, M>::kSize; ++i) r.coefficients()[i] = u.coefficients()[i];
  return r;
}

template <class T>
struct is_jet : std::false_type {};
template <int V, int N>
struct is_jet<Jet<V, N>> : std::true_type {};

inline double value_of(double x) { return x; }
template <int V, int N>
double value_of(const Jet<V, N>& x) {
  return x.value();
}

/// Univariate Taylor coefficients of a generic callable at t0 up to order N.
template <int N, class F>
std::array<double, N + 1> taylor_coefficients(F&& f, double t0) {
  const Jet<1, N> r = f(Jet<1, N>::variable(t0));
  std::array<double, N + 1> out{};
  for (int k = 0; k <= N; ++k) out[k] = r.coeff(k);
  return out;
}

}  // namespace anosov
