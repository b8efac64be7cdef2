#include <random>
#include <set>

#include "chlab/wickalg.hpp"
#include "doctest.h"

using namespace chlab;

namespace {

Box box(double t0, double t1, double r) { return Box{{{{t0, t1}, {-r, r}, {-r, r}, {-r, r}}}}; }

Box cell(Point c, double ht, double hx) {
  Box b;
  b.range[0] = {c[0] - ht, c[0] + ht};
  for (int i = 1; i < 4; ++i) b.range[i] = {c[i] - hx, c[i] + hx};
  return b;
}

std::array<Expr, 4> vars() { return {Expr::variable(0), Expr::variable(1), Expr::variable(2), Expr::variable(3)}; }

auto mink() { return std::make_shared<const Spacetime>(Spacetime::minkowski(box(-5, 5, 5))); }

auto de_sitter() {
  return std::make_shared<const Spacetime>(
      Spacetime::conformally_flat("desitter", box(0.3, 5, 5), parse_expr("1/x0"), 0.6));
}

TestFunction smearing(const Box& b, const std::string& st, double amplitude = 1.0) {
  auto f = bump_function(b, 4, amplitude, st);
  f.weight = 3.0;
  return f;
}

// Five generators on Minkowski with supports inside the preimage of `shift_dilate`.
std::vector<int> generators(TestFunctionTable& t, const std::string& st) {
  std::vector<int> ids;
  for (int k = 0; k < 5; ++k)
    ids.push_back(t.add(smearing(cell({-0.1 + 0.05 * k, 0.04 * k, -0.03 * k, 0.02}, 0.2, 0.2), st, 1.0 + k)));
  return ids;
}

// psi(x) = 2x + (1.5, 0, 0, 0), Omega = 2
ConformalEmbedding shift_dilate(std::shared_ptr<const Spacetime> m) {
  auto x = vars();
  std::array<Expr, 4> psi{2.0 * x[0] + 1.5, 2.0 * x[1], 2.0 * x[2], 2.0 * x[3]};
  std::array<Expr, 4> inv{(x[0] - 1.5) / 2.0, x[1] / 2.0, x[2] / 2.0, x[3] / 2.0};
  return ConformalEmbedding("shift_dilate", m, m, psi, inv, Expr::constant(2.0), box(0.7, 2.3, 0.8));
}

ConformalEmbedding to_de_sitter(std::shared_ptr<const Spacetime> m) {
  return ConformalEmbedding("mink_ds", m, de_sitter(), vars(), vars(), parse_expr("1/x0"), box(0.5, 3, 2));
}

Integer binomial(int n, int k) {
  Integer c = 1;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

Word random_word(std::mt19937& rng, const std::vector<int>& ids, int n) {
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  Word w;
  for (int k = 0; k < n; ++k) w.push_back(ids[pick(rng)]);
  return w;
}

}  // namespace

TEST_CASE("exact coefficients") {
  CHECK(Coef::from_double(1.5) == Coef(Rational(3, 2)));
  CHECK(Coef::from_double(0.1).to_double().first == 0.1);
  CHECK(Coef::from_double(-3e-300).to_double().first == -3e-300);
  CHECK(Coef::i() * Coef::i() == Coef(-1));
  CHECK(Coef(Rational(1, 3), 2).str() == "(1/3+2i)");
}

TEST_CASE("normal form single swaps") {
  TestFunctionTable t;
  auto ids = generators(t, "minkowski");
  auto E = symbolic_pairing(1);
  int f = ids[0], g = ids[1];
  auto gf = normal_form(AlgebraElement::word("minkowski", {g, f}), t, E);
  auto expect = AlgebraElement::word("minkowski", {f, g}) - Coef::i() * E(f, g) * AlgebraElement::identity("minkowski");
  CHECK(gf == expect);
  auto ff = AlgebraElement::word("minkowski", {f, f});
  CHECK(normal_form(ff, t, E) == ff);
  CHECK(normal_form(gf, t, E) == gf);
  CHECK(E(f, g) == -E(g, f));
  CHECK(E(f, f).is_zero());
}

TEST_CASE("normal form matches the oscillator representation") {
  TestFunctionTable t;
  auto ids = generators(t, "minkowski");
  std::mt19937 rng(42);
  OscillatorModel model(static_cast<int>(t.size()), rng);
  auto E = model.pairing();
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto w = AlgebraElement::word("minkowski", random_word(rng, ids, 5), Coef(Rational(trial + 1, 7), -1));
    auto nf = normal_form(w, t, E);
    if (model.represent(w) != model.represent(nf)) ++mismatches;
    for (const auto& [word, c] : nf.terms()) CHECK(std::is_sorted(word.begin(), word.end()));
  }
  CHECK(mismatches == 0);
  // the oracle is not blind: dropping the contraction term is detected
  int f = ids[0], g = ids[1];
  auto wrong = AlgebraElement::word("minkowski", {f, g});
  CHECK(model.represent(AlgebraElement::word("minkowski", {g, f})) != model.represent(wrong));
}

TEST_CASE("involution") {
  TestFunctionTable t;
  auto ids = generators(t, "minkowski");
  std::mt19937 rng(3);
  auto E = symbolic_pairing(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = AlgebraElement::word("minkowski", random_word(rng, ids, 3), Coef(1, 2));
    auto b = AlgebraElement::word("minkowski", random_word(rng, ids, 2), Coef(Rational(1, 3), -1));
    CHECK((a * b).star() == b.star() * a.star());
    CHECK(a.star().star() == a);
    CHECK(normal_form(a.star(), t, E) == normal_form(normal_form(a, t, E).star(), t, E));
  }
}

TEST_CASE("linearity and P-exact witnesses") {
  TestFunctionTable t;
  auto ids = generators(t, "minkowski");
  auto E = symbolic_pairing(9);
  int c = t.combination({{Coef(2), ids[0]}, {Coef(-1), ids[1]}});
  auto lhs = normal_form(AlgebraElement::word("minkowski", {c, ids[2]}), t, E);
  auto rhs = normal_form(Coef(2) * AlgebraElement::word("minkowski", {ids[0], ids[2]}) -
                             AlgebraElement::word("minkowski", {ids[1], ids[2]}),
                         t, E);
  CHECK(lhs == rhs);
  // witness P h with h a bump; only the flag is consulted
  auto h = bump_function(cell({0.0, 0.1, 0.1, 0.1}, 0.15, 0.15), 5);
  Expr box_h = h.expr.derivative(0).derivative(0);
  for (int i = 1; i < 4; ++i) box_h = box_h - h.expr.derivative(i).derivative(i);
  TestFunction ph{box_h, h.support, 3.0, "minkowski"};
  int p = t.add(ph);
  t.mark_p_exact(p);
  CHECK(normal_form(AlgebraElement::word("minkowski", {ids[3], p, ids[1]}), t, E).is_zero());
  CHECK_THROWS_AS(normal_form(AlgebraElement::word("desitter", {ids[0]}), t, E), DomainError);
}

TEST_CASE("morphisms on words") {
  auto m = mink();
  TestFunctionTable t;
  auto ids = generators(t, "minkowski");
  auto e1 = shift_dilate(m);
  auto e2 = to_de_sitter(m);
  auto e21 = compose(e2, e1);

  SUBCASE("identity embedding") {
    auto id = ConformalEmbedding::identity(m);
    auto w = AlgebraElement::word("minkowski", {ids[2], ids[0], ids[4]}, Coef(1, 1));
    CHECK(apply_morphism(id, w, t) == w);
  }
  SUBCASE("functor law") {
    std::mt19937 rng(42);
    auto E = symbolic_pairing(42);
    int failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
      auto w = AlgebraElement::word("minkowski", random_word(rng, ids, 4), Coef(trial, 1));
      auto stepwise = apply_morphism(e2, apply_morphism(e1, w, t), t);
      auto direct = apply_morphism(e21, w, t);
      if (normal_form(stepwise, t, E) != normal_form(direct, t, E)) ++failures;
    }
    CHECK(failures == 0);
  }
  SUBCASE("commuting square for the generator field") {
    for (int id : ids) {
      TestFunction f = t.at(id);
      CHECK(push_generator(e1, id, t) == t.add(weighted_pushforward(e1, 3.0, f)));
      CHECK(push_generator(e21, id, t) == t.add(weighted_pushforward(e21, 3.0, f)));
    }
  }
  SUBCASE("injective on generators") {
    std::set<int> images;
    for (int id : ids) images.insert(push_generator(e21, id, t));
    CHECK(images.size() == ids.size());
    for (int id : images) CHECK(t.spacetime(id) == "desitter");
  }
  SUBCASE("weights and spacetimes are checked") {
    auto f0 = bump_function(cell({0.0, 0.0, 0.0, 0.0}, 0.2, 0.2), 4, 1.0, "minkowski");
    int bad = t.add(f0);
    CHECK_THROWS_AS(push_generator(e1, bad, t), DomainError);
    auto w = AlgebraElement::word("minkowski", {ids[0]});
    auto pushed = apply_morphism(e21, w, t);
    CHECK_THROWS_AS(apply_morphism(e1, pushed, t), DomainError);
    CHECK_THROWS_AS(check_smearing(FieldType{"phi2", 2.0}, t.at(ids[0])), DomainError);
    auto f2 = f0;
    f2.weight = 2.0;
    CHECK_NOTHROW(check_smearing(FieldType{"phi2", 2.0}, f2));
  }
}

TEST_CASE("commutators survive transport with the numeric propagator") {
  auto m = mink();
  auto e = to_de_sitter(m);
  TestFunctionTable t;
  int f = t.add(smearing(cell({1.25, 0.1, 0, 0}, 0.25, 0.25), "minkowski"));
  int g = t.add(smearing(cell({1.05, -0.1, 0.1, 0}, 0.25, 0.25), "minkowski"));
  PropagatorOptions o;
  o.abs_tol = 1e-6;
  o.outer_nodes = 4;
  NumericPairing E(m, t, o), E2(e.target_ptr(), t, o);
  auto w = AlgebraElement::word("minkowski", {g, f, g});
  auto before = apply_morphism(e, normal_form(w, t, std::ref(E)), t);
  auto after = normal_form(apply_morphism(e, w, t), t, std::ref(E2));
  double scale = std::abs(E.value(f, g));
  CHECK(scale > 1e-6);
  CHECK(coefficient_distance(before, after) < 1e-3 * scale);
}

TEST_CASE("pairing expansions") {
  CHECK(wick_expand(2).str() == ":phi^2: + H");
  auto p4 = wick_expand(4);
  CHECK(p4.coeff[2] == 6);
  CHECK(p4.coeff[0] == 3);
  CHECK(wick_expand(6).coeff[0] == 15);
  for (int n = 0; n <= 12; ++n)
    for (int m = 0; 2 * m <= n; ++m) CHECK(wick_expand(n).coeff[n - 2 * m] == pairing_count(n, m));
}

TEST_CASE("inverse connection recovers the identity") {
  // phi^n -> sum_k a_k H^.. :phi^k: -> sum_k a_k H^.. sum_j b_kj H^.. phi^j must be phi^n
  for (int n = 0; n <= 8; ++n) {
    std::map<int, Integer> total;
    for (const auto& [k, a] : wick_expand(n).coeff)
      for (const auto& [j, b] : wick_inverse(k).coeff) total[j] += a * b;
    for (const auto& [j, c] : total) CHECK(c == (j == n ? 1 : 0));
    std::map<int, Integer> back;
    for (const auto& [k, a] : wick_inverse(n).coeff)
      for (const auto& [j, b] : wick_expand(k).coeff) back[j] += a * b;
    for (const auto& [j, c] : back) CHECK(c == (j == n ? 1 : 0));
  }
}

TEST_CASE("reordering between H and H + B") {
  CHECK(reorder_prescription(2).str("B") == "B");
  CHECK(reorder_prescription(4).str("B") == "6 B :phi^2: + 3 B^2");
  CHECK(reorder_prescription(3).str("B") == "3 B :phi:");
  // :phi^n:_H = sum inverse_H(n)_k H^.. phi^k, phi^k = sum expand(k)_j (H + B)^.. :phi^j:_{H+B};
  // polynomial in H and B keyed by (j, powH, powB)
  for (int n = 0; n <= 8; ++n) {
    std::map<std::array<int, 3>, Integer> poly;
    for (const auto& [k, a] : wick_inverse(n).coeff) {
      int mh = (n - k) / 2;
      for (const auto& [j, b] : wick_expand(k).coeff) {
        int mw = (k - j) / 2;
        for (int r = 0; r <= mw; ++r)  // (H + B)^mw
          poly[{j, mh + r, mw - r}] += a * b * binomial(mw, r);
      }
    }
    std::erase_if(poly, [](const auto& kv) { return kv.second == 0; });
    // only pure B powers survive and they equal reorder_prescription, plus :phi^n: itself
    auto expect = reorder_prescription(n);
    expect.coeff[n] = 1;
    std::erase_if(expect.coeff, [](const auto& kv) { return kv.second == 0; });
    CHECK(poly.size() == expect.coeff.size());
    for (const auto& [key, c] : poly) {
      CHECK(key[1] == 0);
      CHECK(c == expect.coeff[key[0]]);
      CHECK(key[2] == (n - key[0]) / 2);
    }
  }
}

TEST_CASE("renormalization shifts") {
  RenormShift empty{4, {}};
  auto id = renorm_apply(empty, 4);
  CHECK(id.terms.size() == 1);
  CHECK(id.str() == "phi^4");
  Expr R = Expr::symbol("R");
  double alpha = -1.0 / std::pow(12 * M_PI, 2);
  auto phi2 = renorm_apply(RenormShift{2, {{0, alpha * R}}}, 2);
  CHECK(phi2.terms.size() == 2);
  CHECK(phi2.terms.at(0).str() == (alpha * R).str());
  CHECK_THROWS_AS(renorm_apply(RenormShift{3, {{2, R}}}, 3), std::out_of_range);
  CHECK_THROWS_AS(renorm_apply(RenormShift{3, {{-1, R}}}, 3), std::out_of_range);
  CHECK_THROWS_AS(renorm_apply(RenormShift{3, {}}, 4), std::out_of_range);
  Expr a = parse_expr("x0^2"), b = parse_expr("sin(x1)");
  auto sum = renorm_apply(RenormShift{4, {{1, a}}} + RenormShift{4, {{1, b}, {2, a}}}, 4);
  Point x{0.3, 0.7, 0.1, 0.2};
  CHECK(sum.terms.at(1)(x) == doctest::Approx(a(x) + b(x)));
  CHECK(sum.terms.at(2)(x) == doctest::Approx(a(x)));
}
