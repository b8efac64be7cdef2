#pragma once

// Chart-based Lorentzian geometry from closed-form metric components.
// Sign conventions: signature (-,+,+,+), Riemann R^a_{bcd} = d_c G^a_{db} - ...
// (Misner-Thorne-Wheeler), Ricci R_{bd} = R^a_{bad}, so de Sitter has R > 0.

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "chlab/expr.hpp"

namespace chlab {

struct Box {
  std::array<std::array<double, 2>, 4> range{};

  bool contains(const Point& p, double margin = 0.0) const {
    for (int i = 0; i < 4; ++i)
      if (p[i] < range[i][0] + margin || p[i] > range[i][1] - margin) return false;
    return true;
  }
  bool contains(const Box& b) const {
    for (int i = 0; i < 4; ++i)
      if (b.range[i][0] < range[i][0] || b.range[i][1] > range[i][1]) return false;
    return true;
  }
  Point center() const {
    Point c;
    for (int i = 0; i < 4; ++i) c[i] = 0.5 * (range[i][0] + range[i][1]);
    return c;
  }
  double width(int i) const { return range[i][1] - range[i][0]; }
};

template <class T>
using Mat4 = std::array<std::array<T, 4>, 4>;
template <class T>
using Vec4 = std::array<T, 4>;

// Inverse and determinant by Gauss-Jordan elimination, pivoting on the scalar
// part. Works for doubles and jets.
template <class T>
T invert4(const Mat4<T>& m, Mat4<T>& inv) {
  Mat4<T> a = m;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) inv[i][j] = T(i == j ? 1.0 : 0.0);
  T det(1.0);
  auto mag = [](const T& v) {
    if constexpr (std::is_same_v<T, double>) {
      return std::abs(v);
    } else {
      return std::abs(v.value());
    }
  };
  for (int c = 0; c < 4; ++c) {
    int p = c;
    for (int r = c + 1; r < 4; ++r)
      if (mag(a[r][c]) > mag(a[p][c])) p = r;
    if (mag(a[p][c]) == 0.0) throw DomainError("degenerate matrix");
    if (p != c) {
      std::swap(a[p], a[c]);
      std::swap(inv[p], inv[c]);
      det = -det;
    }
    det = det * a[c][c];
    T piv = T(1.0) / a[c][c];
    for (int j = 0; j < 4; ++j) {
      a[c][j] = a[c][j] * piv;
      inv[c][j] = inv[c][j] * piv;
    }
    for (int r = 0; r < 4; ++r) {
      if (r == c) continue;
      T f = a[r][c];
      for (int j = 0; j < 4; ++j) {
        a[r][j] = a[r][j] - f * a[c][j];
        inv[r][j] = inv[r][j] - f * inv[c][j];
      }
    }
  }
  return det;
}

// Local metric data at one point: g, its inverse, first and (optionally)
// second derivatives, Christoffel symbols G^a_{bc} and curvature.
template <class T>
struct LocalGeometry {
  Mat4<T> g, ginv;
  std::array<Mat4<T>, 4> dg;                    // dg[c][a][b] = d_c g_ab
  std::array<std::array<Mat4<T>, 4>, 4> ddg;   // ddg[c][d][a][b]
  std::array<Mat4<T>, 4> gamma;                 // gamma[a][b][c] = G^a_bc
  Vec4<T> contracted;                           // G^a_{ab} = d_b log sqrt|g|
  T det;
  std::array<std::array<Mat4<T>, 4>, 4> riemann;  // R^a_{bcd}
  Mat4<T> ricci;
  T R;
};

class Spacetime {
 public:
  Spacetime() = default;
  // Metric components are given for a <= b; the rest is filled by symmetry.
  Spacetime(std::string name, Box domain, Mat4<Expr> g, std::optional<Expr> conformal_factor = {},
            double patch_radius = 0.5);

  static Spacetime minkowski(Box domain);
  // g = omega^2 * diag(-1, 1, 1, 1)
  static Spacetime conformally_flat(std::string name, Box domain, Expr omega,
                                    double patch_radius = 0.5);

  const std::string& name() const { return name_; }
  const Box& domain() const { return domain_; }
  const Mat4<Expr>& metric() const { return g_; }
  const std::optional<Expr>& conformal_factor() const { return omega_; }
  double patch_radius() const { return patch_radius_; }
  bool is_flat() const { return flat_; }

  // The spacetime with metric lambda^-2 g on the same chart.
  Spacetime rescaled(double lambda) const;

  Mat4<double> metric_at(const Point& p) const;
  double sqrt_neg_det(const Point& p) const;
  // Throws DomainError unless the signature at p is (-,+,+,+).
  void check_signature(const Point& p) const;
  // Max deviation of g from omega^2 eta at p (0 when no factor is declared).
  double conformal_flatness_residual(const Point& p) const;

  // Level 1: g, ginv, dg, gamma, contracted. Level 2 adds ddg, Ricci and R;
  // level 3 adds the full Riemann tensor.
  // Conformally flat spacetimes use closed forms in omega below level 3
  // unless `generic` is set.
  template <class T>
  void local(std::span<const T, 4> x, LocalGeometry<T>& out, int level, bool generic = false) const;

 private:
  void compile();
  template <class T>
  void local_conformal(std::span<const T, 4> x, LocalGeometry<T>& out, int level) const;

  std::string name_;
  Box domain_;
  Mat4<Expr> g_;
  std::optional<Expr> omega_;
  double patch_radius_ = 0.5;
  bool flat_ = false;
  Tape tape1_;  // g, dg
  Tape tape2_;  // g, dg, ddg
  Tape tapew_;  // omega, d omega, dd omega
};

struct CurvatureBundle {
  Point point{};
  std::array<Mat4<double>, 4> gamma{};                 // G^a_bc
  std::array<std::array<Mat4<double>, 4>, 4> riemann{};  // R_abcd (all lowered)
  Mat4<double> ricci{};
  double R = 0.0;
  double W2 = 0.0;
};

CurvatureBundle curvature(const Spacetime& st, const Point& p);

// (-Box + R/6) f at p, from symbolic derivatives of f.
double wave_operator_apply(const Spacetime& st, const Expr& f, const Point& p);

// The same operator on a function known only through its Taylor data at p:
// value, gradient and Hessian in chart coordinates.
double wave_operator_from_jet(const LocalGeometry<double>& geo, double f, const Vec4<double>& df,
                              const Mat4<double>& ddf);

// ---------------------------------------------------------------------------

template <class T>
void Spacetime::local_conformal(std::span<const T, 4> x, LocalGeometry<T>& o, int level) const {
  thread_local std::vector<T> v(15);
  tapew_.eval<T>(x, std::span<T>(v.data(), 15));
  const T& w = v[0];
  T winv = T(1.0) / w;
  Vec4<T> L;  // d log omega
  for (int a = 0; a < 4; ++a) L[a] = v[1 + a] * winv;
  T w2 = w * w, w2inv = winv * winv;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      double eta = a == b ? (a == 0 ? -1.0 : 1.0) : 0.0;
      o.g[a][b] = eta * w2;
      o.ginv[a][b] = eta * w2inv;
    }
  for (int c = 0; c < 4; ++c)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) o.dg[c][a][b] = (2.0 * (a == b ? (a == 0 ? -1.0 : 1.0) : 0.0)) * w * v[1 + c];
  o.det = -(w2 * w2 * w2 * w2);
  // G^a_bc = delta^a_b L_c + delta^a_c L_b - eta_bc eta^aa L_a
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c) {
        T s(0.0);
        if (a == b) s = s + L[c];
        if (a == c) s = s + L[b];
        if (b == c) s = s - ((b == 0) == (a == 0) ? 1.0 : -1.0) * L[a];
        o.gamma[a][b][c] = s;
      }
  for (int b = 0; b < 4; ++b) o.contracted[b] = 4.0 * L[b];
  if (level < 2) return;
  // phi = log omega: R_ab = -2 (dd phi_ab - L_a L_b) - eta_ab (box phi + 2 (d phi)^2), flat contractions
  Mat4<T> ddphi;
  int k = 5;
  for (int a = 0; a < 4; ++a)
    for (int b = a; b < 4; ++b) {
      ddphi[a][b] = ddphi[b][a] = v[k++] * winv - L[a] * L[b];
    }
  T boxphi = -ddphi[0][0] + ddphi[1][1] + ddphi[2][2] + ddphi[3][3];
  T grad2 = -L[0] * L[0] + L[1] * L[1] + L[2] * L[2] + L[3] * L[3];
  T trace = boxphi + 2.0 * grad2;
  for (int a = 0; a < 4; ++a)
    for (int b = a; b < 4; ++b) {
      T r = -2.0 * (ddphi[a][b] - L[a] * L[b]);
      if (a == b) r = r - (a == 0 ? -1.0 : 1.0) * trace;
      o.ricci[a][b] = o.ricci[b][a] = r;
    }
  // R = -6 omega^-3 box_eta omega
  T boxw = -v[5] + v[9] + v[12] + v[14];
  o.R = -6.0 * boxw * winv * w2inv;
}

template <class T>
void Spacetime::local(std::span<const T, 4> x, LocalGeometry<T>& o, int level, bool generic) const {
  if (omega_ && !generic && level < 3) {
    local_conformal(x, o, level);
    return;
  }
  thread_local std::vector<T> v(150);
  if (level >= 2) {
    tape2_.eval<T>(x, std::span<T>(v.data(), 150));
  } else {
    tape1_.eval<T>(x, std::span<T>(v.data(), 50));
  }
  int k = 0;
  for (int a = 0; a < 4; ++a)
    for (int b = a; b < 4; ++b) o.g[a][b] = o.g[b][a] = v[k++];
  for (int c = 0; c < 4; ++c)
    for (int a = 0; a < 4; ++a)
      for (int b = a; b < 4; ++b) o.dg[c][a][b] = o.dg[c][b][a] = v[k++];
  if (level >= 2)
    for (int c = 0; c < 4; ++c)
      for (int d = c; d < 4; ++d)
        for (int a = 0; a < 4; ++a)
          for (int b = a; b < 4; ++b)
            o.ddg[c][d][a][b] = o.ddg[c][d][b][a] = o.ddg[d][c][a][b] = o.ddg[d][c][b][a] = v[k++];

  o.det = invert4(o.g, o.ginv);
  // lowered Christoffel symbols G_{e bc}
  std::array<Mat4<T>, 4> low;
  for (int e = 0; e < 4; ++e)
    for (int b = 0; b < 4; ++b)
      for (int c = b; c < 4; ++c)
        low[e][b][c] = low[e][c][b] = T(0.5) * (o.dg[b][e][c] + o.dg[c][e][b] - o.dg[e][b][c]);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = b; c < 4; ++c) {
        T s(0.0);
        for (int e = 0; e < 4; ++e) s = s + o.ginv[a][e] * low[e][b][c];
        o.gamma[a][b][c] = o.gamma[a][c][b] = s;
      }
  for (int b = 0; b < 4; ++b) {
    T s(0.0);
    for (int a = 0; a < 4; ++a) s = s + o.gamma[a][a][b];
    o.contracted[b] = s;
  }
  if (level < 2) return;

  // d_d G^a_bc = d_d g^{ae} G_ebc + g^{ae} d_d G_ebc, with d_d g^{ae} = -g^{af} d_d g_fh g^{he}
  std::array<std::array<Mat4<T>, 4>, 4> dgamma;  // dgamma[d][a][b][c]
  for (int d = 0; d < 4; ++d) {
    Mat4<T> dginv;
    for (int a = 0; a < 4; ++a)
      for (int e = a; e < 4; ++e) {
        T s(0.0);
        for (int f = 0; f < 4; ++f)
          for (int h = 0; h < 4; ++h) s = s + o.ginv[a][f] * o.dg[d][f][h] * o.ginv[h][e];
        dginv[a][e] = dginv[e][a] = -s;
      }
    std::array<Mat4<T>, 4> dlow;
    for (int e = 0; e < 4; ++e)
      for (int b = 0; b < 4; ++b)
        for (int c = b; c < 4; ++c)
          dlow[e][b][c] = dlow[e][c][b] =
              T(0.5) * (o.ddg[d][b][e][c] + o.ddg[d][c][e][b] - o.ddg[d][e][b][c]);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int c = b; c < 4; ++c) {
          T s(0.0);
          for (int e = 0; e < 4; ++e) s = s + dginv[a][e] * low[e][b][c] + o.ginv[a][e] * dlow[e][b][c];
          dgamma[d][a][b][c] = dgamma[d][a][c][b] = s;
        }
  }
  // R_bd = d_a G^a_db - d_d G^a_ab + G^a_ae G^e_db - G^a_de G^e_ab
  for (int b = 0; b < 4; ++b)
    for (int d = b; d < 4; ++d) {
      T s(0.0);
      for (int a = 0; a < 4; ++a) {
        s = s + dgamma[a][a][d][b] - dgamma[d][a][a][b];
        for (int e = 0; e < 4; ++e) s = s + o.gamma[a][a][e] * o.gamma[e][d][b] - o.gamma[a][d][e] * o.gamma[e][a][b];
      }
      o.ricci[b][d] = o.ricci[d][b] = s;
    }
  o.R = T(0.0);
  for (int b = 0; b < 4; ++b)
    for (int d = 0; d < 4; ++d) o.R = o.R + o.ginv[b][d] * o.ricci[b][d];
  if (level < 3) return;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d) {
          if (d <= c) {
            o.riemann[a][b][c][d] = d == c ? T(0.0) : -o.riemann[a][b][d][c];
            continue;
          }
          T s = dgamma[c][a][d][b] - dgamma[d][a][c][b];
          for (int e = 0; e < 4; ++e)
            s = s + o.gamma[a][c][e] * o.gamma[e][d][b] - o.gamma[a][d][e] * o.gamma[e][c][b];
          o.riemann[a][b][c][d] = s;
        }
}

}  // namespace chlab
