#include "chlab/hadamard.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "chlab/jet.hpp"
#include "chlab/quadrature.hpp"

namespace chlab {

namespace {

template <int K>
class RayFamily {
 public:
  using J = Jet<K>;
  struct State {
    Vec4<J> z, v;
    double u;  // transport ODE, value only
  };

  RayFamily(const Spacetime& st, const Point& y, const Vec4<double>& V)
      : st_(st), y_(y), V_(V), geo_(std::make_unique<LocalGeometry<J>>()) {}

  // States at the sorted times `targets` (all > 0). RK4 with step
  // min(1/steps, grading * t) after a first step of `start`: the transport
  // coefficient has a removable 1/t singularity and needs h << t.
  std::vector<State> integrate(const std::vector<double>& targets, int steps, double grading, double start) {
    State s;
    for (int a = 0; a < 4; ++a) {
      s.z[a] = J(y_[a]);
      s.v[a] = J::variable(a, V_[a]);
    }
    s.u = 2.0;
    double t = 0.0;
    std::vector<State> out;
    double hmax = 1.0 / steps;
    for (double T : targets) {
      while (t < T) {
        double h = t == 0.0 ? start : std::min(hmax, grading * t);
        if (t + 1.5 * h >= T) h = T - t;
        s = step(t, s, h);
        t = t + h >= T ? T : t + h;
      }
      out.push_back(s);
    }
    return out;
  }

  Mat4<J> inverse_jacobi(const State& s, J* det = nullptr) const {
    Mat4<J> m, inv;
    for (int a = 0; a < 4; ++a)
      for (int i = 0; i < 4; ++i) m[a][i] = s.z[a].d(i);
    J d = invert4(m, inv);
    if (det) *det = d;
    return inv;  // inv[i][a] = d delta^i / d x^a
  }

  // Closed-form solution of the u transport equation (Liouville's formula),
  // 2 (sqrt(-g(y)) / (det(J / t) sqrt(-g(z))))^{1/2}; regular at t -> 0.
  J jacobi_u(const State& s, double t) {
    J det;
    inverse_jacobi(s, &det);
    st_.local<J>(std::span<const J, 4>(s.z), *geo_, 1);
    J gz = checked_sqrt(-geo_->det);
    double gy = std::sqrt(-det_y());
    return 2.0 * checked_sqrt(gy / (det * std::pow(t, -4.0) * gz));
  }

  // (P_g f)(z) for a function f of the ray point, given as a jet in delta.
  J apply_P(const State& s, const J& f) {
    Mat4<J> inv = inverse_jacobi(s);
    st_.local<J>(std::span<const J, 4>(s.z), *geo_, 2);
    const auto& geo = *geo_;
    Vec4<J> df;
    for (int a = 0; a < 4; ++a) {
      J acc(0.0);
      for (int i = 0; i < 4; ++i) acc += inv[i][a] * f.d(i);
      df[a] = acc;
    }
    J box(0.0);
    for (int a = 0; a < 4; ++a)
      for (int b = a; b < 4; ++b) {
        J h(0.0);
        for (int i = 0; i < 4; ++i) h += 0.5 * (inv[i][b] * df[a].d(i) + inv[i][a] * df[b].d(i));
        for (int c = 0; c < 4; ++c) h -= geo.gamma[c][a][b] * df[c];
        box += (a == b ? 1.0 : 2.0) * geo.ginv[a][b] * h;
      }
    return -box + geo.R * f * (1.0 / 6.0);
  }

 private:
  void rhs(double t, const State& s, State& ds) {
    st_.local<J>(std::span<const J, 4>(s.z), *geo_, 1);
    const auto& geo = *geo_;
    for (int a = 0; a < 4; ++a) {
      ds.z[a] = s.v[a];
      J acc(0.0);
      for (int b = 0; b < 4; ++b) {
        J gv(0.0);
        for (int c = 0; c < 4; ++c) gv += geo.gamma[a][b][c] * s.v[c];
        acc += gv * s.v[b];
      }
      ds.v[a] = -acc;
    }
    if (t == 0.0) {
      ds.u = 0.0;  // box sigma - 4 = O(t^2)
      return;
    }
    // c = (box sigma - 4) / t = tr(Jdot J^-1) - 4/t + Gamma^a_ab zdot^b
    Mat4<double> m, inv;
    for (int a = 0; a < 4; ++a)
      for (int i = 0; i < 4; ++i) m[a][i] = s.z[a].d(i).value();
    invert4(m, inv);
    double c = -4.0 / t;
    for (int a = 0; a < 4; ++a) {
      for (int i = 0; i < 4; ++i) c += s.v[a].d(i).value() * inv[i][a];
      c += geo.contracted[a].value() * s.v[a].value();
    }
    ds.u = -0.5 * c * s.u;
  }

  State step(double t, const State& s, double h) {
    State k1, k2, k3, k4, tmp;
    auto axpy = [](const State& a, const State& k, double c, State& o) {
      for (int i = 0; i < 4; ++i) {
        o.z[i] = a.z[i] + c * k.z[i];
        o.v[i] = a.v[i] + c * k.v[i];
      }
      o.u = a.u + c * k.u;
    };
    rhs(t, s, k1);
    axpy(s, k1, 0.5 * h, tmp);
    rhs(t + 0.5 * h, tmp, k2);
    axpy(s, k2, 0.5 * h, tmp);
    rhs(t + 0.5 * h, tmp, k3);
    axpy(s, k3, h, tmp);
    rhs(t + h, tmp, k4);
    State o;
    double w = h / 6.0;
    for (int i = 0; i < 4; ++i) {
      o.z[i] = s.z[i] + w * (k1.z[i] + 2.0 * k2.z[i] + 2.0 * k3.z[i] + k4.z[i]);
      o.v[i] = s.v[i] + w * (k1.v[i] + 2.0 * k2.v[i] + 2.0 * k3.v[i] + k4.v[i]);
    }
    o.u = s.u + w * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u);
    return o;
  }

  double det_y() {
    LocalGeometry<double> g;
    st_.local<double>(std::span<const double, 4>(y_), g, 1);
    return g.det;
  }

  const Spacetime& st_;
  Point y_;
  Vec4<double> V_;
  std::unique_ptr<LocalGeometry<J>> geo_;
};

template <int K>
void transport(const Spacetime& st, const BvpSolution& sol, int p, const TransportOptions& opt,
               HadamardCoefficients& out) {
  using J = Jet<K>;
  auto rule = gauss_rule(opt.nodes);
  std::vector<double> targets{1.0};
  for (const auto& a : rule) {
    targets.push_back(a.t);
    if (p >= 1)
      for (const auto& b : rule) targets.push_back(a.t * b.t);
  }
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

  RayFamily<K> ray(st, out.y, sol.V);
  auto states = ray.integrate(targets, opt.steps, opt.grading, opt.start);
  std::map<double, std::size_t> at;
  for (std::size_t i = 0; i < targets.size(); ++i) at[targets[i]] = i;
  auto state = [&](double t) -> const typename RayFamily<K>::State& { return states.at(at.at(t)); };

  const auto& end = state(1.0);
  out.u = end.u;
  Mat4<double> m, inv;
  for (int a = 0; a < 4; ++a)
    for (int i = 0; i < 4; ++i) m[a][i] = end.z[a].d(i).value();
  double detJ = invert4(m, inv);
  out.u_jacobi = 2.0 * std::sqrt(st.sqrt_neg_det(out.y) / (detJ * st.sqrt_neg_det(out.x)));

  // The v recursion differentiates u twice more; its sources use the
  // closed-form u, whose jets carry no error from the 1/t term of the ODE.
  std::map<double, J> ujet;
  auto u_at = [&](double t) -> const J& {
    auto it = ujet.find(t);
    if (it != ujet.end()) return it->second;
    return ujet.emplace(t, ray.jacobi_u(state(t), t)).first->second;
  };
  std::map<double, J> ratio;  // P u / 2u
  auto pu_ratio = [&](double t) -> const J& {
    auto it = ratio.find(t);
    if (it != ratio.end()) return it->second;
    const J& u = u_at(t);
    return ratio.emplace(t, ray.apply_P(state(t), u) / (2.0 * u)).first->second;
  };

  double u1 = u_at(1.0).value();
  double sum = 0.0;
  for (const auto& a : rule) sum += a.w * pu_ratio(a.t).value();
  out.v0 = u1 * sum;
  out.v1 = 0.0;
  if (p >= 1) {
    double s1 = 0.0;
    for (const auto& a : rule) {
      J acc(0.0);
      for (const auto& b : rule) acc += b.w * pu_ratio(a.t * b.t);
      J v0 = u_at(a.t) * acc;
      s1 += a.w * a.t * ray.apply_P(state(a.t), v0).value() / (2.0 * u_at(a.t).value());
    }
    out.v1 = u1 * s1;
  }
}

}  // namespace

HadamardCoefficients hadamard_coefficients(const Spacetime& st, const Point& x, const Point& y, int p,
                                           const TransportOptions& opt) {
  if (p < 0 || p > 1) throw std::invalid_argument("truncation order must be 0 or 1");
  if (!st.domain().contains(x) || !st.domain().contains(y)) throw DomainError("point outside chart domain");
  HadamardCoefficients c;
  c.x = x;
  c.y = y;
  c.order = p;
  BvpSolution sol = solve_bvp(st, y, x, opt.bvp);
  Mat4<double> gy = st.metric_at(y);
  double s = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) s += gy[a][b] * sol.V[a] * sol.V[b];
  c.sigma = 0.5 * s;
  if (st.is_flat()) return c;
  if (p == 0) {
    transport<3>(st, sol, p, opt, c);
  } else {
    transport<5>(st, sol, p, opt, c);
  }
  return c;
}

double transport_u(const Spacetime& st, const Point& x, const Point& y, const TransportOptions& opt) {
  return hadamard_coefficients(st, x, y, 0, opt).u;
}

std::pair<double, double> transport_v(const Spacetime& st, const Point& x, const Point& y, int p,
                                      const TransportOptions& opt) {
  auto c = hadamard_coefficients(st, x, y, p, opt);
  return {c.v0, c.v1};
}

HadamardKernel::HadamardKernel(std::shared_ptr<const Spacetime> st, double mu, int p, double kappa,
                               TransportOptions opt)
    : st_(std::move(st)), mu_(mu), kappa_(kappa), p_(p), opt_(opt) {
  if (!(mu > 0.0)) throw std::invalid_argument("length scale mu must be positive");
  if (p < 0 || p > 1) throw std::invalid_argument("truncation order must be 0 or 1");
}

HadamardCoefficients HadamardKernel::coefficients(const Point& x, const Point& y) const {
  return hadamard_coefficients(*st_, x, y, p_, opt_);
}

double HadamardKernel::evaluate(const HadamardCoefficients& c) const {
  if (!(c.sigma > 0.0)) throw DomainError("parametrix is evaluated at spacelike separation only");
  double v = c.v0 + (p_ >= 1 ? c.v1 * c.sigma : 0.0);
  return kappa_ / (8.0 * std::numbers::pi * std::numbers::pi) * (c.u / c.sigma + v * std::log(c.sigma / (mu_ * mu_)));
}

double parametrix(const HadamardKernel& k, const Point& x, const Point& y) { return k(x, y); }

}  // namespace chlab
