#include <random>

#include "chlab/worldfn.hpp"
#include "doctest.h"

using namespace chlab;

namespace {

Box box(double t0, double t1, double r) { return Box{{{{t0, t1}, {-r, r}, {-r, r}, {-r, r}}}}; }

Spacetime de_sitter() {
  return Spacetime::conformally_flat("desitter", box(0.3, 5, 5), parse_expr("1/x0"), 0.6);
}

Spacetime bump() {
  return Spacetime::conformally_flat("bump", box(-3, 3, 3),
                                     parse_expr("1 + 0.3*exp(-(x0^2 + x1^2 + x2^2 + x3^2)/0.49)"), 0.6);
}

// Closed forms on the unit de Sitter Poincare patch: with q = sigma_flat / (t_x t_y)
// the geodesic distance s obeys cos s = 1 - q (spacelike) or cosh s = 1 - q (timelike).
struct DsExact {
  double sigma, vanvleck;
};

DsExact ds_exact(const Point& x, const Point& y) {
  double sf = 0.5 * (-(x[0] - y[0]) * (x[0] - y[0]) + (x[1] - y[1]) * (x[1] - y[1]) +
                     (x[2] - y[2]) * (x[2] - y[2]) + (x[3] - y[3]) * (x[3] - y[3]));
  double c = 1.0 - sf / (x[0] * y[0]);
  if (c <= 1.0) {
    double s = std::acos(c);
    return {0.5 * s * s, std::pow(s / std::sin(s), 1.5)};
  }
  double s = std::acosh(c);
  return {-0.5 * s * s, std::pow(s / std::sinh(s), 1.5)};
}

double ds_arc(const Point& x, const Point& y) { return std::sqrt(2 * ds_exact(x, y).sigma); }

}  // namespace

TEST_CASE("Minkowski closed forms") {
  auto m = Spacetime::minkowski(box(-5, 5, 5));
  CHECK(geodesic_bvp(m, {0, 0, 0, 0}, {0, 1, 0, 0}).sigma == 0.5);
  CHECK(geodesic_bvp(m, {0, 0, 0, 0}, {1, 1, 0, 0}).sigma == 0.0);
  CHECK(van_vleck(m, {0, 0, 0, 0}, {0.2, 0.5, 0, 0}) == 1.0);
}

TEST_CASE("de Sitter world function and van Vleck determinant match closed forms") {
  auto ds = de_sitter();
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(-0.15, 0.15);
  for (int k = 0; k < 10; ++k) {
    Point x{1.0 + u(rng), u(rng), u(rng), u(rng)};
    Point y{1.1 + u(rng), 0.2 + u(rng), u(rng), u(rng)};
    auto w = geodesic_bvp(ds, x, y);
    DsExact ex = ds_exact(x, y);
    CHECK(w.sigma == doctest::Approx(ex.sigma).epsilon(1e-9));
    double vv = ex.vanvleck;
    CHECK(w.vanvleck == doctest::Approx(vv).epsilon(1e-8));
    CHECK(van_vleck(ds, x, y) == doctest::Approx(vv).epsilon(1e-7));
  }
}

TEST_CASE("world function identities") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(-0.12, 0.12);
  for (const Spacetime& st : {de_sitter(), bump()}) {
    for (int k = 0; k < 5; ++k) {
      Point x{1.0 + u(rng), u(rng), u(rng), u(rng)};
      Point y{1.0 + u(rng), 0.25 + u(rng), u(rng), u(rng)};
      auto a = geodesic_bvp(st, x, y), b = geodesic_bvp(st, y, x);
      CHECK(a.sigma == doctest::Approx(b.sigma).epsilon(1e-10));
      CHECK(a.vanvleck == doctest::Approx(b.vanvleck).epsilon(1e-6));
      Mat4<double> inv;
      invert4(st.metric_at(x), inv);
      double hj = 0;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) hj += inv[i][j] * a.grad_x[i] * a.grad_x[j];
      CHECK(std::abs(hj - 2 * a.sigma) < 1e-7);
      CHECK(std::abs(a.geodesic.front()[0] - x[0]) < 1e-9);
      CHECK(std::abs(a.geodesic.back()[1] - y[1]) < 1e-9);
    }
  }
}

TEST_CASE("box sigma tends to four at coincidence") {
  Point x{1.0, 0.1, 0.0, -0.1};
  Vec4<double> w{0.1, 1.0, 0.3, 0.0};
  for (const Spacetime& st : {de_sitter(), bump()}) {
    std::vector<double> vals;
    for (double s : {0.08, 0.04, 0.02}) vals.push_back(geodesic_bvp(st, x, exp_map(st, x, w, s)).box_sigma);
    // box sigma = 4 + O(s^2)
    double extrap = (4 * vals[2] - vals[1]) / 3;
    CHECK(std::abs(extrap - 4.0) < 1e-4);
  }
}

TEST_CASE("integrator convergence order") {
  auto ds = de_sitter();
  Point x{1.0, 0.0, 0.0, 0.0}, y{1.2, 0.45, 0.1, 0.0};
  double exact = 0.5 * std::pow(ds_arc(x, y), 2);
  SolverOptions coarse, fine;
  coarse.steps = 4;
  fine.steps = 8;
  double e1 = std::abs(world_function(ds, x, y, coarse) - exact);
  double e2 = std::abs(world_function(ds, x, y, fine) - exact);
  CHECK(e1 / e2 >= 8.0);
}

TEST_CASE("patch radius is enforced") {
  CHECK_THROWS_AS(geodesic_bvp(de_sitter(), {1, 0, 0, 0}, {1, 2, 0, 0}), BvpError);
}
