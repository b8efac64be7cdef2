#include <random>

#include "chlab/geometry.hpp"
#include "chlab/jet.hpp"
#include "doctest.h"

using namespace chlab;

namespace {

Box box(double t0, double t1, double r) { return Box{{{{t0, t1}, {-r, r}, {-r, r}, {-r, r}}}}; }

Spacetime de_sitter() { return Spacetime::conformally_flat("desitter", box(0.3, 5, 5), parse_expr("1/x0")); }

Spacetime bump() {
  return Spacetime::conformally_flat("bump", box(-3, 3, 3),
                                     parse_expr("1 + 0.3*exp(-(x0^2 + x1^2 + x2^2 + x3^2)/0.49)"));
}

// A metric that is not conformally flat.
Spacetime lumpy() {
  Mat4<Expr> g;
  for (auto& row : g)
    for (auto& e : row) e = Expr::constant(0.0);
  g[0][0] = parse_expr("-(1 + 0.2*x3^2)");
  g[0][1] = parse_expr("0.1*sin(x2)");
  g[1][1] = parse_expr("1 + 0.3*x2^2");
  g[2][2] = parse_expr("exp(0.2*x1)");
  g[3][3] = parse_expr("1 + 0.1*x0*x1");
  return Spacetime("lumpy", box(-1, 1, 1), g);
}

// Independent curvature oracle: fourth-order central differences of metric
// samples, Christoffels by differencing, Riemann by differencing Christoffels.
struct FdCurvature {
  Mat4<double> ricci;
  double R;
};

std::array<Mat4<double>, 4> fd_christoffel(const Spacetime& st, const Point& p, double h) {
  Mat4<double> g = st.metric_at(p), ginv;
  invert4(g, ginv);
  std::array<Mat4<double>, 4> dg;
  for (int c = 0; c < 4; ++c) {
    auto at = [&](double s) {
      Point q = p;
      q[c] += s;
      return st.metric_at(q);
    };
    auto m2 = at(-2 * h), m1 = at(-h), p1 = at(h), p2 = at(2 * h);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        dg[c][a][b] = (m2[a][b] - 8 * m1[a][b] + 8 * p1[a][b] - p2[a][b]) / (12 * h);
  }
  std::array<Mat4<double>, 4> gam{};
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        for (int e = 0; e < 4; ++e)
          gam[a][b][c] += 0.5 * ginv[a][e] * (dg[b][e][c] + dg[c][e][b] - dg[e][b][c]);
  return gam;
}

FdCurvature fd_curvature(const Spacetime& st, const Point& p) {
  double h = 1e-3;
  auto gam = fd_christoffel(st, p, h);
  std::array<std::array<Mat4<double>, 4>, 4> dgam;  // [d][a][b][c]
  for (int d = 0; d < 4; ++d) {
    auto at = [&](double s) {
      Point q = p;
      q[d] += s;
      return fd_christoffel(st, q, h);
    };
    auto m2 = at(-2 * h), m1 = at(-h), p1 = at(h), p2 = at(2 * h);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int c = 0; c < 4; ++c)
          dgam[d][a][b][c] = (m2[a][b][c] - 8 * m1[a][b][c] + 8 * p1[a][b][c] - p2[a][b][c]) / (12 * h);
  }
  FdCurvature out{};
  Mat4<double> g = st.metric_at(p), ginv;
  invert4(g, ginv);
  out.R = 0;
  for (int b = 0; b < 4; ++b)
    for (int d = 0; d < 4; ++d) {
      double s = 0;
      for (int a = 0; a < 4; ++a) {
        s += dgam[a][a][d][b] - dgam[d][a][a][b];
        for (int e = 0; e < 4; ++e) s += gam[a][a][e] * gam[e][d][b] - gam[a][d][e] * gam[e][a][b];
      }
      out.ricci[b][d] = s;
    }
  for (int b = 0; b < 4; ++b)
    for (int d = 0; d < 4; ++d) out.R += ginv[b][d] * out.ricci[b][d];
  return out;
}

}  // namespace

TEST_CASE("reference curvatures") {
  auto mink = Spacetime::minkowski(box(-5, 5, 5));
  auto cm = curvature(mink, {0.3, 0.1, -0.2, 0.5});
  CHECK(cm.R == 0.0);
  CHECK(cm.W2 == 0.0);
  auto cd = curvature(de_sitter(), {1, 0, 0, 0});
  CHECK(cd.R == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(std::abs(cd.W2) < 1e-8);
  auto cb = curvature(bump(), {0.2, 0.3, -0.1, 0.4});
  CHECK(std::abs(cb.W2) < 1e-8);
  CHECK(std::abs(curvature(lumpy(), {0.2, 0.3, -0.1, 0.4}).W2) > 1e-4);
}

TEST_CASE("symbolic curvature matches the finite-difference oracle") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  for (const Spacetime& st : {de_sitter(), bump(), lumpy()}) {
    for (int k = 0; k < 20; ++k) {
      Point p{u(rng), u(rng), u(rng), u(rng)};
      if (st.name() == "desitter") p[0] = 1.2 + u(rng);
      auto cb = curvature(st, p);
      auto fd = fd_curvature(st, p);
      CHECK(std::abs(cb.R - fd.R) <= std::max(1e-6, 1e-4 * std::abs(cb.R)));
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          CHECK(std::abs(cb.ricci[a][b] - fd.ricci[a][b]) <= std::max(1e-6, 1e-4 * std::abs(cb.ricci[a][b])));
    }
  }
}

TEST_CASE("Riemann symmetries and Ricci trace") {
  Point p{0.1, 0.2, -0.3, 0.25};
  auto cb = curvature(lumpy(), p);
  Mat4<double> g = lumpy().metric_at(p), ginv;
  invert4(g, ginv);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d) {
          CHECK(cb.riemann[a][b][c][d] == doctest::Approx(-cb.riemann[b][a][c][d]).scale(1.0));
          CHECK(cb.riemann[a][b][c][d] == doctest::Approx(cb.riemann[c][d][a][b]).scale(1.0));
        }
  double R = 0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      CHECK(cb.ricci[a][b] == doctest::Approx(cb.ricci[b][a]));
      R += ginv[a][b] * cb.ricci[a][b];
    }
  CHECK(R == doctest::Approx(cb.R));
}

TEST_CASE("contracted Bianchi identity") {
  using J = Jet<1>;
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (const Spacetime& st : {bump(), lumpy()}) {
    for (int k = 0; k < 5; ++k) {
      std::array<J, 4> x;
      for (int v = 0; v < 4; ++v) x[v] = J::variable(v, u(rng));
      LocalGeometry<J> geo;
      st.local<J>(std::span<const J, 4>(x), geo, 2);
      // G_ab = R_ab - R g_ab / 2; divergence g^{ca} nabla_c G_ab
      Mat4<J> G;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) G[a][b] = geo.ricci[a][b] - 0.5 * geo.R * geo.g[a][b];
      for (int b = 0; b < 4; ++b) {
        double div = 0;
        for (int c = 0; c < 4; ++c)
          for (int a = 0; a < 4; ++a) {
            double nab = G[a][b].d(c).value();
            for (int e = 0; e < 4; ++e)
              nab -= geo.gamma[e][c][a].value() * G[e][b].value() + geo.gamma[e][c][b].value() * G[a][e].value();
            div += geo.ginv[c][a].value() * nab;
          }
        CHECK(std::abs(div) < 1e-5);
      }
    }
  }
}

TEST_CASE("rigid dilation scales the curvature scalar") {
  Point p{0.2, 0.1, 0.3, -0.2};
  for (double lambda : {0.5, 2.0, 10.0}) {
    for (const Spacetime& st : {bump(), lumpy()}) {
      double R = curvature(st, p).R;
      double Rs = curvature(st.rescaled(lambda), p).R;
      CHECK(std::abs(Rs / (lambda * lambda) - R) <= 1e-12 * std::max(1.0, std::abs(R)));
    }
  }
}

TEST_CASE("wave operator") {
  auto mink = Spacetime::minkowski(box(-5, 5, 5));
  Point p{0.3, 0.7, 0.1, 0.2};
  CHECK(wave_operator_apply(mink, parse_expr("x1"), p) == 0.0);
  CHECK(wave_operator_apply(mink, parse_expr("x1^2"), p) == doctest::Approx(-2.0));
  // de Sitter, f = x0: finite-difference application of the operator
  auto ds = de_sitter();
  Expr f = parse_expr("x0");
  Point q{1.0, 0.2, 0.0, 0.1};
  double exact = wave_operator_apply(ds, f, q);
  // -Box f = -(1/sqrt(-g)) d_a (sqrt(-g) g^ab d_b f); only a = b = 0 survives
  auto flux = [&](double t) {
    Point r = q;
    r[0] = t;
    Mat4<double> inv;
    invert4(ds.metric_at(r), inv);
    return ds.sqrt_neg_det(r) * inv[0][0];
  };
  double h = 1e-4;
  double box_f = (flux(q[0] + h) - flux(q[0] - h)) / (2 * h) / ds.sqrt_neg_det(q);
  double fd = -box_f + curvature(ds, q).R * f(q) / 6.0;
  CHECK(exact == doctest::Approx(fd).epsilon(1e-7));
  // -Box x0 = -2 x0 and R/6 x0 = 2 x0 cancel
  CHECK(std::abs(exact) < 1e-12);
}

TEST_CASE("signature and conformal flatness checks") {
  Point p{1.0, 0.1, 0.2, 0.3};
  CHECK_NOTHROW(de_sitter().check_signature(p));
  CHECK(de_sitter().conformal_flatness_residual(p) < 1e-12);
  Mat4<Expr> g;
  for (auto& row : g)
    for (auto& e : row) e = Expr::constant(0.0);
  for (int i = 0; i < 4; ++i) g[i][i] = Expr::constant(1.0);
  Spacetime euclid("euclid", box(-1, 1, 1), g);
  CHECK_THROWS_AS(euclid.check_signature({0, 0, 0, 0}), DomainError);
}

TEST_CASE("closed-form conformally flat geometry agrees with the generic path") {
  using J = Jet<2>;
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (const Spacetime& st : {de_sitter(), bump()}) {
    for (int k = 0; k < 5; ++k) {
      std::array<J, 4> x;
      for (int v = 0; v < 4; ++v) x[v] = J::variable(v, u(rng) + (v == 0 ? 1.2 : 0.0));
      LocalGeometry<J> fast, slow;
      st.local<J>(std::span<const J, 4>(x), fast, 2);
      st.local<J>(std::span<const J, 4>(x), slow, 2, true);
      auto close = [](const J& a, const J& b) {
        for (int i = 0; i < J::N; ++i)
          if (std::abs(a[i] - b[i]) > 1e-11 * std::max(1.0, std::abs(b[i]))) return false;
        return true;
      };
      bool ok = close(fast.R, slow.R) && close(fast.det, slow.det);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          ok = ok && close(fast.g[a][b], slow.g[a][b]) && close(fast.ginv[a][b], slow.ginv[a][b]) &&
               close(fast.ricci[a][b], slow.ricci[a][b]);
          for (int c = 0; c < 4; ++c)
            ok = ok && close(fast.gamma[a][b][c], slow.gamma[a][b][c]) && close(fast.dg[c][a][b], slow.dg[c][a][b]);
        }
      for (int b = 0; b < 4; ++b) ok = ok && close(fast.contracted[b], slow.contracted[b]);
      CHECK(ok);
    }
  }
}
