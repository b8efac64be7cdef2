#include <random>

#include "chlab/confmap.hpp"
#include "doctest.h"

using namespace chlab;

namespace {

Box box(double t0, double t1, double r) { return Box{{{{t0, t1}, {-r, r}, {-r, r}, {-r, r}}}}; }

std::array<Expr, 4> vars() { return {Expr::variable(0), Expr::variable(1), Expr::variable(2), Expr::variable(3)}; }

std::array<Expr, 4> scaled(double k) {
  auto v = vars();
  for (auto& e : v) e = k * e;
  return v;
}

auto mink() { return std::make_shared<const Spacetime>(Spacetime::minkowski(box(-20, 20, 20))); }

ConformalEmbedding dilation(std::shared_ptr<const Spacetime> m, double k, double r) {
  return ConformalEmbedding("dil" + std::to_string(k), m, m, scaled(k), scaled(1.0 / k), Expr::constant(k),
                            box(-r, r, r));
}

ConformalEmbedding mink_to_ds() {
  auto ds = std::make_shared<const Spacetime>(
      Spacetime::conformally_flat("desitter", box(0.3, 5, 5), parse_expr("1/x0")));
  return ConformalEmbedding("mink_ds", mink(), ds, vars(), vars(), parse_expr("1/x0"), box(0.5, 3, 2));
}

}  // namespace

TEST_CASE("embedding invariants") {
  std::mt19937 rng(2);
  for (const auto& e : {mink_to_ds(), dilation(mink(), 2.0, 8.0)}) {
    auto v = e.validate(50, rng);
    CHECK(v.inverse < 1e-10);
    CHECK(v.metric_law < 1e-8);
    CHECK(v.min_omega > 0);
  }
  // a wrong factor violates the metric law
  auto e = mink_to_ds();
  ConformalEmbedding bad("bad", e.source_ptr(), e.target_ptr(), vars(), vars(), parse_expr("2/x0"), e.image());
  CHECK(bad.validate(10, rng).metric_law > 0.1);
}

TEST_CASE("weighted pushforward") {
  auto m = mink();
  TestFunction f = bump_function(box(-1, 1, 1));
  auto id = ConformalEmbedding::identity(m);
  Point p{0.1, 0.2, -0.3, 0.4};
  CHECK(weighted_pushforward(id, 3.0, f)(p) == f(p));
  auto e = dilation(m, 2.0, 8.0);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  TestFunction g = weighted_pushforward(e, 3.0, f);
  TestFunction g0 = weighted_pushforward(e, 0.0, f);
  for (int k = 0; k < 10; ++k) {
    Point q{u(rng), u(rng), u(rng), u(rng)};
    CHECK(g(e.map(q)) == doctest::Approx(f(q) / 8.0).epsilon(1e-14));
    CHECK(g0(e.map(q)) == doctest::Approx(f(q)).epsilon(1e-14));
  }
  CHECK(g.weight == 3.0);
  CHECK(g({2.5, 0, 0, 0}) == 0.0);
}

TEST_CASE("weight additivity and inversion") {
  auto e = mink_to_ds();
  TestFunction f = bump_function(Box{{{{0.8, 1.6}, {-0.5, 0.5}, {-0.4, 0.4}, {-0.5, 0.5}}}});
  TestFunction h = bump_function(Box{{{{0.9, 1.5}, {-0.3, 0.6}, {-0.4, 0.4}, {-0.5, 0.2}}}}, 3);
  TestFunction fh{f.expr * h.expr, Box{{{{0.9, 1.5}, {-0.3, 0.5}, {-0.4, 0.4}, {-0.5, 0.2}}}}};
  TestFunction a = weighted_pushforward(e, 1.0, f), b = weighted_pushforward(e, 2.0, h);
  TestFunction ab = weighted_pushforward(e, 3.0, fh);
  ConformalEmbedding inv("inv", e.target_ptr(), e.source_ptr(), e.psi_inv(), e.psi(),
                         pow(e.omega().substitute(e.psi()), -1), e.preimage());
  TestFunction back = weighted_pushforward(inv, 3.0, weighted_pushforward(e, 3.0, f));
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 20; ++k) {
    Point x{0.9 + 0.6 * u(rng), u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5};
    CHECK(a(x) * b(x) == doctest::Approx(ab(x)).epsilon(1e-12));
    CHECK(std::abs(back(x) - f(x)) < 1e-10);
  }
}

TEST_CASE("composition of embeddings") {
  auto m = mink();
  auto e1 = dilation(m, 2.0, 4.0), e2 = dilation(m, 3.0, 12.0);
  auto c = compose(e2, e1);
  std::mt19937 rng(5);
  Point p{0.3, 0.1, 0.2, 0.7};
  CHECK(c.omega_at(c.map(p)) == doctest::Approx(6.0));
  CHECK(c.validate(20, rng).metric_law < 1e-12);
  TestFunction f = bump_function(box(-1.2, 1.2, 1.2), 3);
  f.expr = f.expr * (1.0 + Expr::variable(1) * Expr::variable(0));
  TestFunction two_step = weighted_pushforward(e2, 2.0, weighted_pushforward(e1, 2.0, f));
  TestFunction one_step = weighted_pushforward(c, 2.0, f);
  std::uniform_real_distribution<double> u(-7, 7);
  for (int k = 0; k < 10; ++k) {
    Point x{u(rng), u(rng), u(rng), u(rng)};
    x = c.map(e1.unmap(e2.unmap(x)));
    CHECK(std::abs(two_step(x) - one_step(x)) <= 1e-10);
  }
  auto id = ConformalEmbedding::identity(m);
  CHECK(compose(id, e1).omega_at({1, 0, 0, 0}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(compose(e1, mink_to_ds()), DomainError);
}

TEST_CASE("wave operator conformal law") {
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> u(-0.35, 0.35);
  auto e = mink_to_ds();
  TestFunction f = bump_function(Box{{{{0.7, 1.7}, {-0.5, 0.5}, {-0.5, 0.5}, {-0.5, 0.5}}}});
  f.expr = f.expr * exp(Expr::variable(1) - pow(Expr::variable(2), 2));
  std::vector<Point> pts;
  double scale = 0;
  for (int k = 0; k < 10; ++k) {
    Point x{1.2 + u(rng), u(rng), u(rng), u(rng)};
    pts.push_back(x);
    scale = std::max(scale, std::abs(wave_operator_apply(e.source(), f.expr, x)));
  }
  CHECK(check_wave_conformal_law(e, f, pts) < 1e-6 * scale);
  auto id = ConformalEmbedding::identity(e.target_ptr());
  CHECK(check_wave_conformal_law(id, f, pts) <= 1e-10);
  auto d = dilation(mink(), 2.0, 8.0);
  for (auto& p : pts) p = d.map(p);
  CHECK(check_wave_conformal_law(d, f, pts) <= 1e-8);
}

TEST_CASE("conformal jet") {
  auto e = mink_to_ds();
  auto cj = conformal_jet(e, {2.0, 0.1, 0, 0});
  // log Omega = -log x0 in a flat induced metric
  CHECK(cj.L[0] == doctest::Approx(-0.5));
  CHECK(cj.L2[0][0] == doctest::Approx(0.25));
  CHECK(cj.L2[0][1] == 0.0);
}
