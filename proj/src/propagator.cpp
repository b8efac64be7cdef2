#include "chlab/propagator.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <queue>

#include "chlab/quadrature.hpp"

namespace chlab {

namespace {

constexpr double pi = std::numbers::pi;

// omega^3 f compiled once per smearing; zero outside the support box and,
// for pushed functions, outside the image of the original box.
class Density {
 public:
  Density(const Spacetime& st, const TestFunction& f) : support_(f.support), origin_(f.origin) {
    if (!st.conformal_factor()) throw DomainError("propagator numerics need a conformally flat spacetime");
    if (f.weight != 0.0 && f.weight != 3.0)
      throw DomainError("propagators act on weight-3 densities (got weight " + std::to_string(f.weight) + ")");
    if (!st.domain().contains(f.support)) throw DomainError("test function support leaves the chart");
    std::vector<Expr> out{pow(*st.conformal_factor(), 3) * f.expr};
    if (f.pull) {
      pull_ = true;
      for (const auto& e : *f.pull) out.push_back(e);
    }
    tape_ = Tape(out);
  }

  const Box& support() const { return support_; }

  double operator()(const Point& p) const {
    if (!support_.contains(p)) return 0.0;
    std::array<double, 5> o;
    tape_.eval<double>(std::span<const double, 4>(p), std::span<double>(o.data(), pull_ ? 5 : 1));
    if (pull_ && !origin_.contains(Point{o[1], o[2], o[3], o[4]})) return 0.0;
    return o[0];
  }

 private:
  Box support_, origin_;
  bool pull_ = false;
  Tape tape_;
};

struct Counter {
  long n = 0, cap = 0;
  void add(long k) {
    n += k;
    if (n > cap) throw QuadratureError("propagator quadrature exceeded its evaluation budget");
  }
};

struct Estimate {
  double value = 0.0, error = 0.0;
};

// Globally adaptive 15-point Gauss-Kronrod on the pieces between breakpoints,
// bisecting the worst panel until the summed error is below tol.
template <class F>
Estimate adapt(F&& f, std::vector<double> cuts, double tol, Counter& count) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  struct Panel {
    double a, b, v, e;
    bool operator<(const Panel& o) const { return e < o.e; }
  };
  auto eval = [&](double a, double b) {
    double e = 0.0;
    double v = GK::integrate(f, a, b, 0, 0.0, &e);
    count.add(15);
    return Panel{a, b, v, e};
  };
  std::sort(cuts.begin(), cuts.end());
  std::priority_queue<Panel> heap;
  Estimate est;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (!(cuts[i + 1] > cuts[i])) continue;
    Panel p = eval(cuts[i], cuts[i + 1]);
    est.value += p.v;
    est.error += p.e;
    heap.push(p);
  }
  double span = cuts.empty() ? 0.0 : cuts.back() - cuts.front();
  for (int it = 0; it < 400 && est.error > tol && !heap.empty(); ++it) {
    Panel p = heap.top();
    if (p.b - p.a < 1e-12 * span) break;
    heap.pop();
    double m = 0.5 * (p.a + p.b);
    Panel l = eval(p.a, m), r = eval(m, p.b);
    est.value += l.v + r.v - p.v;
    est.error += l.e + r.e - p.e;
    heap.push(l);
    heap.push(r);
  }
  // re-sum to drop the cancellation noise of the running totals
  est.value = est.error = 0.0;
  while (!heap.empty()) {
    est.value += heap.top().v;
    est.error += heap.top().e;
    heap.pop();
  }
  return est;
}

double dist_to_interval(double x, double lo, double hi) { return x < lo ? lo - x : (x > hi ? x - hi : 0.0); }

// I = int r dr dOmega F(t - dir r, xvec + r n) over the part of the cone that meets supp F.
Estimate cone_integral(const Density& F, const Point& x, int dir, double tol, Counter& count) {
  const Box& s = F.support();
  double t = x[0], a = s.range[0][0], b = s.range[0][1];
  double dmin2 = 0.0, dmax2 = 0.0;
  std::array<double, 3> lo, hi;
  for (int i = 0; i < 3; ++i) {
    lo[i] = s.range[i + 1][0] - x[i + 1];
    hi[i] = s.range[i + 1][1] - x[i + 1];
    double d = dist_to_interval(0.0, lo[i], hi[i]);
    dmin2 += d * d;
    double f = std::max(std::abs(lo[i]), std::abs(hi[i]));
    dmax2 += f * f;
  }
  double r0 = std::max({0.0, dir > 0 ? t - b : a - t, std::sqrt(dmin2)});
  double r1 = std::min(dir > 0 ? t - a : b - t, std::sqrt(dmax2));
  if (!(r1 > r0)) return {};

  double tol_mu = tol / (4.0 * (r1 - r0) * r1);
  double tol_phi = tol_mu / 4.0;
  double worst_mu = 0.0;

  auto shell = [&](double r) {
    double m0 = std::clamp(lo[2] / r, -1.0, 1.0), m1 = std::clamp(hi[2] / r, -1.0, 1.0);
    if (!(m1 > m0)) return 0.0;
    double worst_phi = 0.0;
    auto ring = [&](double mu) {
      double rho = r * std::sqrt(std::max(0.0, 1.0 - mu * mu));
      double z = r * mu;
      std::vector<double> pcuts{0.0, 2 * pi};
      auto wrap = [](double p) { return p < 0 ? p + 2 * pi : p; };
      if (rho > 0)
        for (int i = 0; i < 2; ++i)
          for (double c : {lo[i], hi[i]}) {
            if (std::abs(c) >= rho) continue;
            if (i == 0) {
              double p = std::acos(c / rho);
              pcuts.push_back(p);
              pcuts.push_back(2 * pi - p);
            } else {
              double p = std::asin(c / rho);
              pcuts.push_back(wrap(p));
              pcuts.push_back(pi - p);
            }
          }
      std::sort(pcuts.begin(), pcuts.end());
      // keep only arcs whose midpoint lies over the box
      std::vector<std::pair<double, double>> arcs;
      for (std::size_t i = 0; i + 1 < pcuts.size(); ++i) {
        double pm = 0.5 * (pcuts[i] + pcuts[i + 1]);
        double px = rho * std::cos(pm), py = rho * std::sin(pm);
        if (px >= lo[0] && px <= hi[0] && py >= lo[1] && py <= hi[1] && pcuts[i + 1] > pcuts[i])
          arcs.push_back({pcuts[i], pcuts[i + 1]});
      }
      double total = 0.0, err = 0.0;
      for (auto [p0, p1] : arcs) {
        auto g = [&](double p) {
          Point q{t - dir * r, x[1] + rho * std::cos(p), x[2] + rho * std::sin(p), x[3] + z};
          return F(q);
        };
        Estimate e = adapt(g, {p0, p1}, tol_phi / arcs.size(), count);
        total += e.value;
        err += e.error;
      }
      worst_phi = std::max(worst_phi, err);
      return total;
    };
    Estimate e = adapt(ring, {m0, m1}, tol_mu, count);
    worst_mu = std::max(worst_mu, e.error + (m1 - m0) * worst_phi);
    return e.value;
  };
  Estimate e = adapt([&](double r) { return r * shell(r); }, {r0, r1}, tol / 2, count);
  e.error += (r1 - r0) * r1 * worst_mu;
  return e;
}

// The part of J-(x) n J+(supp) (dir > 0) or J+(x) n J-(supp) (dir < 0) must lie in the chart.
bool check_cone(const Spacetime& st, const Box& supp, const Point& x, int dir) {
  if (!st.domain().contains(x)) throw DomainError("evaluation point outside chart domain");
  if (dir > 0 ? !in_causal_future(supp, x) : !in_causal_past(supp, x)) return false;
  double T = dir > 0 ? x[0] - supp.range[0][0] : supp.range[0][1] - x[0];
  Box diamond;
  diamond.range[0] = dir > 0 ? std::array<double, 2>{supp.range[0][0], x[0]}
                             : std::array<double, 2>{x[0], supp.range[0][1]};
  for (int i = 1; i < 4; ++i)
    diamond.range[i] = {std::max(x[i], supp.range[i][0]) - T, std::min(x[i], supp.range[i][1]) + T};
  if (!st.domain().contains(diamond))
    throw DomainError("causal cone between the support and the point reaches the chart boundary");
  return true;
}

SmearedFieldValue apply_one(const Density& F, const Spacetime& st, const Point& x, int dir,
                            const PropagatorOptions& opt, Counter& count) {
  SmearedFieldValue out;
  out.point = x;
  if (!check_cone(st, F.support(), x, dir)) return out;
  double w = (*st.conformal_factor())(x);
  double scale = 1.0 / (4 * pi * w);
  Estimate e = cone_integral(F, x, dir, opt.abs_tol / scale, count);
  out.value = scale * e.value;
  out.quadrature_error = scale * e.error;
  return out;
}

SmearedFieldValue apply(const Spacetime& st, const TestFunction& f, const Point& x, const PropagatorOptions& opt,
                        bool retarded, bool advanced) {
  Density F(st, f);
  Counter count{0, opt.max_evals};
  SmearedFieldValue out;
  out.point = x;
  if (retarded) {
    auto r = apply_one(F, st, x, +1, opt, count);
    out.value += r.value;
    out.quadrature_error += r.quadrature_error;
  }
  if (advanced) {
    auto r = apply_one(F, st, x, -1, opt, count);
    out.value -= r.value;
    out.quadrature_error += r.quadrature_error;
  }
  out.evaluations = count.n;
  return out;
}

double spatial_dist(const Box& b, const Point& x) {
  double d2 = 0.0;
  for (int i = 1; i < 4; ++i) {
    double d = dist_to_interval(x[i], b.range[i][0], b.range[i][1]);
    d2 += d * d;
  }
  return std::sqrt(d2);
}

}  // namespace

bool in_causal_future(const Box& support, const Point& x) {
  return x[0] - support.range[0][0] >= spatial_dist(support, x);
}

bool in_causal_past(const Box& support, const Point& x) {
  return support.range[0][1] - x[0] >= spatial_dist(support, x);
}

SmearedFieldValue retarded_apply(const Spacetime& st, const TestFunction& f, const Point& x,
                                 const PropagatorOptions& opt) {
  return apply(st, f, x, opt, true, false);
}

SmearedFieldValue advanced_apply(const Spacetime& st, const TestFunction& f, const Point& x,
                                 const PropagatorOptions& opt) {
  auto r = apply(st, f, x, opt, false, true);
  r.value = -r.value;
  return r;
}

SmearedFieldValue causal_propagator_apply(const Spacetime& st, const TestFunction& f, const Point& x,
                                          const PropagatorOptions& opt) {
  return apply(st, f, x, opt, true, true);
}

double symplectic_form(const Spacetime& st, const TestFunction& f, const TestFunction& g,
                       const PropagatorOptions& opt, double* error) {
  if (!st.domain().contains(f.support) || !st.domain().contains(g.support))
    throw DomainError("test function support leaves the chart");
  Density G(st, g);
  int n = std::max(3, opt.outer_nodes);
  auto hi = gauss_rule(n), lo = gauss_rule(n - 2);
  struct Sum {
    double value = 0.0, inner = 0.0;
  };
  auto tensor = [&](const std::vector<QuadNode>& rule) {
    std::size_t m = rule.size(), total = m * m * m * m;
    std::vector<double> val(total, 0.0), err(total, 0.0);
    parallel_for(total, opt.threads, [&](std::size_t idx) {
      Point x;
      double w = 1.0;
      std::size_t k = idx;
      for (int d = 0; d < 4; ++d, k /= m) {
        const auto& q = rule[k % m];
        x[d] = f.support.range[d][0] + q.t * f.support.width(d);
        w *= q.w * f.support.width(d);
      }
      double fx = f(x);
      if (fx == 0.0 || !(in_causal_future(g.support, x) || in_causal_past(g.support, x))) return;
      Counter count{0, opt.max_evals};
      auto r = apply_one(G, st, x, +1, opt, count);
      auto a = apply_one(G, st, x, -1, opt, count);
      double c = w * fx * st.sqrt_neg_det(x);
      val[idx] = c * (r.value - a.value);
      err[idx] = std::abs(c) * (r.quadrature_error + a.quadrature_error);
    });
    Sum s;
    for (std::size_t i = 0; i < total; ++i) {
      s.value += val[i];
      s.inner += err[i];
    }
    return s;
  };
  Sum a = tensor(hi), b = tensor(lo);
  if (!std::isfinite(a.value)) throw QuadratureError("symplectic form quadrature produced a non-finite value");
  if (error) *error = std::abs(a.value - b.value) + a.inner;
  return a.value;
}

TwoPointValue conformal_vacuum_two_point(const Spacetime& st, const Point& x, const Point& y) {
  if (!st.conformal_factor()) throw DomainError("conformal vacuum needs a conformally flat spacetime");
  if (!st.domain().contains(x) || !st.domain().contains(y)) throw DomainError("point outside chart domain");
  double s = -(x[0] - y[0]) * (x[0] - y[0]);
  for (int i = 1; i < 4; ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  s *= 0.5;
  if (!(s > 0.0)) throw DomainError("conformal vacuum two-point function needs a spacelike pair");
  const Expr& w = *st.conformal_factor();
  TwoPointValue v;
  v.x = x;
  v.y = y;
  v.omega2 = 1.0 / (w(x) * w(y) * 8 * pi * pi * s);
  return v;
}

TransportedSolution transported_solution(const ConformalEmbedding& e, const TestFunction& f,
                                         const Point& image_point, const PropagatorOptions& opt) {
  TestFunction pushed = weighted_pushforward(e, 3.0, f);
  TransportedSolution out;
  out.image_point = image_point;
  if (!e.image().contains(image_point)) throw DomainError("point outside the image of the embedding");
  auto l = causal_propagator_apply(e.target(), pushed, image_point, opt);
  auto r = causal_propagator_apply(e.source(), f, e.unmap(image_point), opt);
  double w = e.omega_at(image_point);
  out.lhs = l.value;
  out.rhs = r.value / w;
  out.error = l.quadrature_error + r.quadrature_error / w;
  return out;
}

double wave_operator_fd(const Spacetime& st, const TestFunction& f, const Point& x, double h,
                        const PropagatorOptions& opt, bool retarded_only) {
  static constexpr std::array<int, 4> off{-2, -1, 1, 2};
  static constexpr std::array<double, 4> c1{1.0, -8.0, 8.0, -1.0};  // / 12h
  std::vector<Point> pts{x};
  for (int a = 0; a < 4; ++a)
    for (int i : off) {
      Point p = x;
      p[a] += i * h;
      pts.push_back(p);
    }
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b)
      for (int i : off)
        for (int j : off) {
          Point p = x;
          p[a] += i * h;
          p[b] += j * h;
          pts.push_back(p);
        }
  std::vector<double> u(pts.size());
  PropagatorOptions inner = opt;
  inner.threads = 1;
  parallel_for(pts.size(), opt.threads, [&](std::size_t k) {
    u[k] = retarded_only ? retarded_apply(st, f, pts[k], inner).value
                         : causal_propagator_apply(st, f, pts[k], inner).value;
  });
  Vec4<double> df{};
  Mat4<double> ddf{};
  std::size_t k = 1;
  for (int a = 0; a < 4; ++a, k += 4) {
    const double* v = &u[k];
    df[a] = (c1[0] * v[0] + c1[1] * v[1] + c1[2] * v[2] + c1[3] * v[3]) / (12 * h);
    ddf[a][a] = (-v[0] + 16 * v[1] - 30 * u[0] + 16 * v[2] - v[3]) / (12 * h * h);
  }
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) {
      double s = 0.0;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) s += c1[i] * c1[j] * u[k++];
      ddf[a][b] = ddf[b][a] = s / (144 * h * h);
    }
  LocalGeometry<double> geo;
  st.local<double>(std::span<const double, 4>(x), geo, 2);
  return wave_operator_from_jet(geo, u[0], df, ddf);
}

}  // namespace chlab
