#pragma once

// Truncated multivariate Taylor polynomials in four variables.
//
// Jet<K> holds all monomials of total degree <= K, ordered by degree. The
// geodesic integrators carry every state variable as a jet in the
// perturbation of the initial velocity, which yields coordinate derivatives
// of world-function quantities without finite differences.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "chlab/expr.hpp"

namespace chlab {

constexpr int binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return static_cast<int>(r);
}

using MultiIndex = std::array<int, 4>;

template <int K>
struct JetLayout {
  static constexpr int N = binomial(K + 4, 4);

  std::vector<MultiIndex> exps;
  std::vector<int> degree;
  std::vector<int> lookup;  // (K+1)^4 table, -1 where degree > K
  struct Triple {
    int i, j, k;
  };
  std::vector<Triple> mul;
  // derivative with respect to variable v: target index, source index, factor
  std::array<std::vector<Triple>, 4> deriv;

  int index(const MultiIndex& a) const {
    for (int v : a)
      if (v < 0 || v > K) return -1;
    return lookup[((a[0] * (K + 1) + a[1]) * (K + 1) + a[2]) * (K + 1) + a[3]];
  }

  static const JetLayout& get() {
    static const JetLayout layout;
    return layout;
  }

 private:
  JetLayout() {
    lookup.assign((K + 1) * (K + 1) * (K + 1) * (K + 1), -1);
    for (int d = 0; d <= K; ++d)
      for (int a = d; a >= 0; --a)
        for (int b = d - a; b >= 0; --b)
          for (int c = d - a - b; c >= 0; --c) {
            MultiIndex e{a, b, c, d - a - b - c};
            lookup[((e[0] * (K + 1) + e[1]) * (K + 1) + e[2]) * (K + 1) + e[3]] =
                static_cast<int>(exps.size());
            exps.push_back(e);
            degree.push_back(d);
          }
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        if (degree[i] + degree[j] > K) continue;
        MultiIndex s;
        for (int v = 0; v < 4; ++v) s[v] = exps[i][v] + exps[j][v];
        mul.push_back({i, j, index(s)});
      }
    for (int v = 0; v < 4; ++v)
      for (int i = 0; i < N; ++i) {
        if (exps[i][v] == 0) continue;
        MultiIndex s = exps[i];
        s[v] -= 1;
        deriv[v].push_back({index(s), i, exps[i][v]});
      }
  }
};

template <int K>
class Jet {
 public:
  static constexpr int N = JetLayout<K>::N;
  static constexpr int order = K;

  Jet() { c_.fill(0.0); }
  Jet(double v) {  // NOLINT: implicit promotion of scalars is intended
    c_.fill(0.0);
    c_[0] = v;
  }
  static Jet variable(int v, double value) {
    Jet j(value);
    MultiIndex e{0, 0, 0, 0};
    e[v] = 1;
    j.c_[JetLayout<K>::get().index(e)] = 1.0;
    return j;
  }

  double value() const { return c_[0]; }
  double& operator[](int i) { return c_[i]; }
  double operator[](int i) const { return c_[i]; }
  double coeff(const MultiIndex& a) const {
    int i = JetLayout<K>::get().index(a);
    return i < 0 ? 0.0 : c_[i];
  }
  // The partial derivative d/d(var) as a jet; the top-degree part becomes zero.
  Jet d(int var) const {
    Jet r;
    for (const auto& t : JetLayout<K>::get().deriv[var]) r.c_[t.i] = t.k * c_[t.j];
    return r;
  }
  // Value of the derivative of multi-index a (including the factorials).
  double derivative(const MultiIndex& a) const {
    double f = 1.0;
    for (int v : a)
      for (int k = 2; k <= v; ++k) f *= k;
    return coeff(a) * f;
  }
  // Evaluate the polynomial at a displacement.
  double at(const std::array<double, 4>& dx) const {
    const auto& L = JetLayout<K>::get();
    double s = 0.0;
    for (int i = 0; i < N; ++i) {
      double m = c_[i];
      for (int v = 0; v < 4; ++v)
        for (int p = 0; p < L.exps[i][v]; ++p) m *= dx[v];
      s += m;
    }
    return s;
  }

  Jet& operator+=(const Jet& o) {
    for (int i = 0; i < N; ++i) c_[i] += o.c_[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (int i = 0; i < N; ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Jet& operator*=(double s) {
    for (double& v : c_) v *= s;
    return *this;
  }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }
  Jet& operator/=(const Jet& o) { return *this = *this / o; }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(Jet a) {
    for (double& v : a.c_) v = -v;
    return a;
  }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    for (const auto& t : JetLayout<K>::get().mul) r.c_[t.k] += a.c_[t.i] * b.c_[t.j];
    return r;
  }
  friend Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

  // f(a0 + h) = sum_k f_k h^k with h nilpotent; f_k are Taylor coefficients at a0.
  static Jet compose(const std::array<double, K + 1>& f, const Jet& a) {
    Jet h = a;
    h.c_[0] = 0.0;
    Jet r(f[K]);
    for (int k = K - 1; k >= 0; --k) {
      r = r * h;
      r.c_[0] += f[k];
    }
    return r;
  }

  friend Jet reciprocal(const Jet& a) {
    double a0 = a.value();
    if (a0 == 0.0) throw DomainError("division by zero");
    std::array<double, K + 1> f;
    double p = 1.0 / a0;
    for (int k = 0; k <= K; ++k) {
      f[k] = (k % 2 ? -p : p);
      p /= a0;
    }
    return compose(f, a);
  }
  friend Jet exp(const Jet& a) {
    std::array<double, K + 1> f;
    double e = std::exp(a.value()), fact = 1.0;
    for (int k = 0; k <= K; ++k) {
      if (k) fact *= k;
      f[k] = e / fact;
    }
    return compose(f, a);
  }
  friend Jet checked_log(const Jet& a) {
    double a0 = a.value();
    if (!(a0 > 0.0)) throw DomainError("log of non-positive value");
    std::array<double, K + 1> f;
    f[0] = std::log(a0);
    double p = 1.0;
    for (int k = 1; k <= K; ++k) {
      p /= a0;
      f[k] = (k % 2 ? 1.0 : -1.0) * p / k;
    }
    return compose(f, a);
  }
  friend Jet checked_sqrt(const Jet& a) {
    double a0 = a.value();
    if (!(a0 > 0.0)) {
      if (a0 == 0.0 && K == 0) return Jet(0.0);
      throw DomainError("sqrt of non-positive value");
    }
    std::array<double, K + 1> f;
    double binom = 1.0, s = std::sqrt(a0), p = 1.0;
    for (int k = 0; k <= K; ++k) {
      f[k] = s * binom * p;
      binom *= (0.5 - k) / (k + 1);
      p /= a0;
    }
    return compose(f, a);
  }
  friend Jet checked_div(const Jet& a, const Jet& b) { return a / b; }
  friend Jet sin(const Jet& a) { return trig(a, false, false); }
  friend Jet cos(const Jet& a) { return trig(a, true, false); }
  friend Jet sinh(const Jet& a) { return trig(a, false, true); }
  friend Jet cosh(const Jet& a) { return trig(a, true, true); }
  friend Jet powi(const Jet& a, int n) {
    if (n < 0) return reciprocal(powi(a, -n));
    Jet r(1.0), b = a;
    while (n) {
      if (n & 1) r = r * b;
      n >>= 1;
      if (n) b = b * b;
    }
    return r;
  }

 private:
  static Jet trig(const Jet& a, bool cosine, bool hyperbolic) {
    double x = a.value();
    // derivatives cycle through (s, c, -s, -c) or (s, c, s, c)
    double s = hyperbolic ? std::sinh(x) : std::sin(x);
    double c = hyperbolic ? std::cosh(x) : std::cos(x);
    std::array<double, 4> cyc = hyperbolic ? std::array<double, 4>{s, c, s, c}
                                           : std::array<double, 4>{s, c, -s, -c};
    int shift = cosine ? 1 : 0;
    std::array<double, K + 1> f;
    double fact = 1.0;
    for (int k = 0; k <= K; ++k) {
      if (k) fact *= k;
      f[k] = cyc[(k + shift) % 4] / fact;
    }
    return compose(f, a);
  }

  std::array<double, N> c_;
};

}  // namespace chlab
