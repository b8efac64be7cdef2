#include "chlab/confmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace chlab {

namespace {

std::array<Expr, 4> identity_map() {
  return {Expr::variable(0), Expr::variable(1), Expr::variable(2), Expr::variable(3)};
}

std::array<Expr, 4> compose_maps(const std::array<Expr, 4>& outer, const std::array<Expr, 4>& inner) {
  std::array<Expr, 4> r;
  for (int i = 0; i < 4; ++i) r[i] = outer[i].substitute(inner);
  return r;
}

Point apply_map(const std::array<Expr, 4>& m, const Point& x) {
  Point y;
  for (int i = 0; i < 4; ++i) y[i] = m[i](x);
  return y;
}

Expr power(const Expr& base, double lambda) {
  if (lambda == std::round(lambda) && std::abs(lambda) < 64) return pow(base, static_cast<int>(lambda));
  return exp(lambda * log(base));
}

}  // namespace

double TestFunction::operator()(const Point& p) const {
  if (!support.contains(p)) return 0.0;
  if (pull && !origin.contains(apply_map(*pull, p))) return 0.0;
  return expr(p);
}

TestFunction bump_function(const Box& support, int k, double amplitude, std::string spacetime) {
  Expr f = Expr::constant(amplitude);
  for (int i = 0; i < 4; ++i) {
    double c = 0.5 * (support.range[i][0] + support.range[i][1]);
    double h = 0.5 * support.width(i);
    Expr u = (Expr::variable(i) - c) / h;
    f = f * pow(1.0 - pow(u, 2), k);
  }
  TestFunction t;
  t.expr = f;
  t.support = support;
  t.spacetime = std::move(spacetime);
  return t;
}

Box map_box(const std::array<Expr, 4>& psi, const Box& b) {
  Box out;
  for (auto& r : out.range) r = {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  constexpr int n = 6;
  for (int i0 = 0; i0 < n; ++i0)
    for (int i1 = 0; i1 < n; ++i1)
      for (int i2 = 0; i2 < n; ++i2)
        for (int i3 = 0; i3 < n; ++i3) {
          std::array<int, 4> idx{i0, i1, i2, i3};
          Point x;
          for (int d = 0; d < 4; ++d) x[d] = b.range[d][0] + b.width(d) * idx[d] / (n - 1.0);
          Point y = apply_map(psi, x);
          for (int d = 0; d < 4; ++d) {
            out.range[d][0] = std::min(out.range[d][0], y[d]);
            out.range[d][1] = std::max(out.range[d][1], y[d]);
          }
        }
  for (int d = 0; d < 4; ++d) {
    double pad = 1e-12 * std::max(1.0, std::abs(out.range[d][0]) + std::abs(out.range[d][1]));
    out.range[d][0] -= pad;
    out.range[d][1] += pad;
  }
  return out;
}

ConformalEmbedding::ConformalEmbedding(std::string name, std::shared_ptr<const Spacetime> source,
                                       std::shared_ptr<const Spacetime> target, std::array<Expr, 4> psi,
                                       std::array<Expr, 4> psi_inv, Expr omega, Box image)
    : name_(std::move(name)),
      source_(std::move(source)),
      target_(std::move(target)),
      psi_(std::move(psi)),
      psi_inv_(std::move(psi_inv)),
      omega_(std::move(omega)),
      image_(image) {
  preimage_ = map_box(psi_inv_, image_);
  Mat4<Expr> g;
  Expr w2 = pow(omega_, -2);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) g[a][b] = w2 * target_->metric()[a][b];
  std::optional<Expr> factor;
  if (target_->conformal_factor()) factor = *target_->conformal_factor() / omega_;
  induced_ = std::make_shared<Spacetime>(name_ + ":induced", target_->domain(), g, factor,
                                         target_->patch_radius());
}

ConformalEmbedding ConformalEmbedding::identity(std::shared_ptr<const Spacetime> st) {
  Box dom = st->domain();
  return ConformalEmbedding("id:" + st->name(), st, st, identity_map(), identity_map(),
                            Expr::constant(1.0), dom);
}

Point ConformalEmbedding::map(const Point& x) const { return apply_map(psi_, x); }
Point ConformalEmbedding::unmap(const Point& x) const { return apply_map(psi_inv_, x); }

ConformalEmbedding::Validation ConformalEmbedding::validate(int samples, std::mt19937& rng) const {
  Validation v;
  v.min_omega = std::numeric_limits<double>::infinity();
  std::array<std::array<Expr, 4>, 4> jac;  // d psi_inv^i / d x^a
  for (int i = 0; i < 4; ++i)
    for (int a = 0; a < 4; ++a) jac[i][a] = psi_inv_[i].derivative(a);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int s = 0; s < samples; ++s) {
    Point y;
    for (int d = 0; d < 4; ++d) y[d] = image_.range[d][0] + image_.width(d) * u(rng);
    Point x = unmap(y);
    Point back = map(x);
    for (int d = 0; d < 4; ++d) v.inverse = std::max(v.inverse, std::abs(unmap(back)[d] - x[d]));
    double w = omega_(y);
    if (w < v.min_omega) {
      v.min_omega = w;
      v.min_omega_at = y;
    }
    Mat4<double> g1 = source_->metric_at(x), g2 = target_->metric_at(y), J;
    for (int i = 0; i < 4; ++i)
      for (int a = 0; a < 4; ++a) J[i][a] = jac[i][a](y);
    double scale = 0.0, err = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        double pulled = 0.0;
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) pulled += J[i][a] * g1[i][j] * J[j][b];
        err = std::max(err, std::abs(w * w * pulled - g2[a][b]));
        scale = std::max(scale, std::abs(g2[a][b]));
      }
    v.metric_law = std::max(v.metric_law, err / scale);
  }
  return v;
}

TestFunction weighted_pushforward(const ConformalEmbedding& e, double lambda, const TestFunction& f) {
  if (!e.preimage().contains(f.support)) throw DomainError("test function support escapes the embedding domain");
  Box support = map_box(e.psi(), f.support);
  if (!e.image().contains(support)) throw DomainError("pushed support escapes the image domain");
  Expr pulled = f.expr.substitute(e.psi_inv());
  Expr out = lambda == 0.0 ? pulled : power(e.omega(), -lambda) * pulled;
  TestFunction t;
  t.expr = out;
  t.support = support;
  t.weight = lambda;
  t.spacetime = e.target().name();
  t.pull = f.pull ? compose_maps(*f.pull, e.psi_inv()) : e.psi_inv();
  t.origin = f.pull ? f.origin : f.support;
  return t;
}

ConformalEmbedding compose(const ConformalEmbedding& e2, const ConformalEmbedding& e1) {
  if (e1.target().name() != e2.source().name())
    throw DomainError("cannot compose '" + e2.name() + "' after '" + e1.name() + "': spacetime mismatch");
  if (!e2.preimage().contains(e1.image()))
    throw DomainError("image of '" + e1.name() + "' leaves the domain of '" + e2.name() + "'");
  auto psi = compose_maps(e2.psi(), e1.psi());
  auto psi_inv = compose_maps(e1.psi_inv(), e2.psi_inv());
  Expr omega = e2.omega() * e1.omega().substitute(e2.psi_inv());
  Box image = map_box(e2.psi(), e1.image());
  for (int d = 0; d < 4; ++d) {
    image.range[d][0] = std::max(image.range[d][0], e2.image().range[d][0]);
    image.range[d][1] = std::min(image.range[d][1], e2.image().range[d][1]);
  }
  return ConformalEmbedding(e2.name() + "." + e1.name(), e1.source_ptr(), e2.target_ptr(), psi, psi_inv,
                            omega, image);
}

double check_wave_conformal_law(const ConformalEmbedding& e, const TestFunction& f,
                                const std::vector<Point>& pts) {
  TestFunction pushed = weighted_pushforward(e, 1.0, f);
  double worst = 0.0;
  for (const Point& x : pts) {
    double lhs = wave_operator_apply(e.target(), pushed.expr, x);
    double rhs = std::pow(e.omega_at(x), -3) * wave_operator_apply(e.source(), f.expr, e.unmap(x));
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

ConformalJet conformal_jet(const ConformalEmbedding& e, const Point& y) {
  ConformalJet cj;
  cj.point = y;
  Expr l = log(e.omega());
  LocalGeometry<double> geo;
  e.induced().local<double>(std::span<const double, 4>(y), geo, 1);
  for (int a = 0; a < 4; ++a) {
    Expr la = l.derivative(a);
    cj.L[a] = la(y);
    for (int b = a; b < 4; ++b) cj.L2[a][b] = la.derivative(b)(y);
  }
  for (int a = 0; a < 4; ++a)
    for (int b = a; b < 4; ++b) {
      for (int c = 0; c < 4; ++c) cj.L2[a][b] -= geo.gamma[c][a][b] * cj.L[c];
      cj.L2[b][a] = cj.L2[a][b];
    }
  return cj;
}

}  // namespace chlab
