#include "chlab/worldfn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace chlab {

namespace {

double norm_inf(const Vec4<double>& v) {
  double m = 0.0;
  for (double c : v) m = std::max(m, std::abs(c));
  return m;
}

Vec4<double> lower(const Mat4<double>& g, const Vec4<double>& v) {
  Vec4<double> r{};
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) r[a] += g[a][b] * v[b];
  return r;
}

}  // namespace

BvpSolution solve_bvp(const Spacetime& st, const Point& from, const Point& to, const SolverOptions& opt,
                      const Vec4<double>* guess) {
  double dist = 0.0;
  for (int a = 0; a < 4; ++a) dist += (to[a] - from[a]) * (to[a] - from[a]);
  dist = std::sqrt(dist);
  if (opt.enforce_patch && !st.is_flat() && dist > st.patch_radius()) {
    std::ostringstream msg;
    msg << "pair outside the convex patch of '" << st.name() << "' (distance " << dist << " > "
        << st.patch_radius() << ")";
    throw BvpError(msg.str(), {});
  }
  BvpSolution sol;
  if (st.is_flat()) {
    for (int a = 0; a < 4; ++a) {
      sol.V[a] = sol.end_velocity[a] = to[a] - from[a];
      sol.J[a][a] = 1.0;
    }
    return sol;
  }
  using J1 = Jet<1>;
  Vec4<double> V{};
  for (int a = 0; a < 4; ++a) V[a] = guess ? (*guess)[a] : to[a] - from[a];
  double scale = 1.0;
  for (double c : to) scale = std::max(scale, std::abs(c));
  double tol = opt.newton_tol * scale;

  std::vector<double> trace;
  auto evaluate = [&](const Vec4<double>& v, Vec4<double>& F, GeodesicState<J1>& end) {
    Vec4<J1> vj;
    for (int a = 0; a < 4; ++a) vj[a] = J1::variable(a, v[a]);
    end = shoot<J1>(st, from, vj, opt.steps);
    for (int a = 0; a < 4; ++a) F[a] = end.z[a].value() - to[a];
    return norm_inf(F);
  };

  Vec4<double> F;
  GeodesicState<J1> end;
  double res = evaluate(V, F, end);
  trace.push_back(res);
  int it = 0;
  while (res > tol) {
    if (it >= opt.max_newton) break;
    ++it;
    Mat4<double> Jm, Jinv;
    for (int a = 0; a < 4; ++a)
      for (int i = 0; i < 4; ++i) Jm[a][i] = end.z[a].d(i).value();
    invert4(Jm, Jinv);
    Vec4<double> step{};
    for (int i = 0; i < 4; ++i)
      for (int a = 0; a < 4; ++a) step[i] -= Jinv[i][a] * F[a];
    // backtracking on the endpoint residual
    double lambda = 1.0;
    Vec4<double> Vn, Fn;
    GeodesicState<J1> endn;
    double resn = 0.0;
    for (int k = 0; k < 12; ++k) {
      for (int i = 0; i < 4; ++i) Vn[i] = V[i] + lambda * step[i];
      resn = evaluate(Vn, Fn, endn);
      if (std::isfinite(resn) && resn < res) break;
      lambda *= 0.5;
    }
    trace.push_back(resn);
    if (!(resn < res)) break;  // stagnated at roundoff level
    V = Vn;
    F = Fn;
    end = endn;
    res = resn;
  }
  if (!(res <= std::max(tol, 1e-10 * scale))) {
    std::ostringstream msg;
    msg << "Newton did not converge for the geodesic in '" << st.name() << "' (residual " << res << ")";
    throw BvpError(msg.str(), trace);
  }
  sol.V = V;
  sol.iterations = it;
  sol.residual = res;
  for (int a = 0; a < 4; ++a) {
    sol.end_velocity[a] = end.v[a].value();
    for (int i = 0; i < 4; ++i) {
      sol.J[a][i] = end.z[a].d(i).value();
      sol.Jdot[a][i] = end.v[a].d(i).value();
    }
  }
  return sol;
}

WorldFunctionData geodesic_bvp(const Spacetime& st, const Point& x, const Point& y, const SolverOptions& opt) {
  if (!st.domain().contains(x) || !st.domain().contains(y)) throw DomainError("point outside chart domain");
  // Shoot from y so that the Jacobi data live at x.
  BvpSolution sol = solve_bvp(st, y, x, opt);
  WorldFunctionData w;
  w.x = x;
  w.y = y;
  w.iterations = sol.iterations;
  Mat4<double> gx = st.metric_at(x), gy = st.metric_at(y);
  Vec4<double> Vy = lower(gy, sol.V);
  double s = 0.0;
  for (int a = 0; a < 4; ++a) s += Vy[a] * sol.V[a];
  w.sigma = 0.5 * s;
  for (int a = 0; a < 4; ++a) {
    w.grad_y[a] = -Vy[a];
    w.velocity[a] = -sol.end_velocity[a];
  }
  w.grad_x = lower(gx, sol.end_velocity);

  LocalGeometry<double> geo;
  st.local<double>(std::span<const double, 4>(x), geo, 1);
  Mat4<double> Jinv;
  double detJ = invert4(sol.J, Jinv);
  double box = 0.0;
  for (int a = 0; a < 4; ++a) {
    for (int i = 0; i < 4; ++i) box += sol.Jdot[a][i] * Jinv[i][a];
    box += geo.contracted[a] * sol.end_velocity[a];
  }
  w.box_sigma = box;
  double delta = st.sqrt_neg_det(y) / (detJ * st.sqrt_neg_det(x));
  w.vanvleck = std::sqrt(delta);

  std::vector<Point> path;
  shoot<double>(st, y, sol.V, opt.steps, &path);
  w.geodesic.assign(path.rbegin(), path.rend());
  return w;
}

double world_function(const Spacetime& st, const Point& x, const Point& y, const SolverOptions& opt,
                      const Vec4<double>* guess) {
  BvpSolution sol = solve_bvp(st, y, x, opt, guess);
  Mat4<double> gy = st.metric_at(y);
  double s = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) s += gy[a][b] * sol.V[a] * sol.V[b];
  return 0.5 * s;
}

double van_vleck(const Spacetime& st, const Point& x, const Point& y, const SolverOptions& opt) {
  if (st.is_flat()) return 1.0;
  BvpSolution base = solve_bvp(st, y, x, opt);
  SolverOptions loose = opt;
  loose.enforce_patch = false;
  double h = 1e-3 * st.patch_radius();
  // Nearby solves reuse the base Jacobian (chord iterations on double shoots).
  Mat4<double> Jinv;
  invert4(base.J, Jinv);
  double scale = 1.0;
  for (double c : x) scale = std::max(scale, std::abs(c));
  auto sigma_at = [&](int a, double da, int b, double db) {
    Point xp = x, yp = y;
    xp[a] += da;
    yp[b] += db;
    Vec4<double> V = base.V;
    for (int i = 0; i < 4; ++i) V[i] += (xp[i] - x[i]) - (yp[i] - y[i]);
    Vec4<double> best = V;
    double best_res = INFINITY;
    for (int it = 0; it < 30; ++it) {
      auto end = shoot<double>(st, yp, V, opt.steps);
      Vec4<double> F;
      for (int i = 0; i < 4; ++i) F[i] = end.z[i] - xp[i];
      double res = norm_inf(F);
      if (!(res < best_res)) break;
      best = V;
      best_res = res;
      if (res <= opt.newton_tol * scale) break;
      for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 4; ++k) V[i] -= Jinv[i][k] * F[k];
    }
    V = best;
    if (!(best_res <= 1e-10 * scale)) {
      Vec4<double> guess = V;
      return world_function(st, xp, yp, loose, &guess);
    }
    Mat4<double> gy = st.metric_at(yp);
    double s = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 4; ++k) s += gy[i][k] * V[i] * V[k];
    return 0.5 * s;
  };
  auto mixed = [&](double step) {
    Mat4<double> D;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        D[a][b] = (sigma_at(a, step, b, step) - sigma_at(a, step, b, -step) - sigma_at(a, -step, b, step) +
                   sigma_at(a, -step, b, -step)) /
                  (4 * step * step);
    return D;
  };
  Mat4<double> D1 = mixed(h), D2 = mixed(2 * h), M, inv;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) M[a][b] = -(4.0 * D1[a][b] - D2[a][b]) / 3.0;
  double det = invert4(M, inv);
  double delta = -det / (st.sqrt_neg_det(x) * st.sqrt_neg_det(y));
  if (!(delta > 0.0)) throw DomainError("non-positive van Vleck determinant");
  return std::sqrt(delta);
}

Point exp_map(const Spacetime& st, const Point& x, const Vec4<double>& w, double s, int steps) {
  Vec4<double> V;
  for (int a = 0; a < 4; ++a) V[a] = s * w[a];
  auto end = shoot<double>(st, x, V, steps);
  return end.z;
}

}  // namespace chlab
