#pragma once

// Synge world function by geodesic shooting.
//
// Geodesics z(tau), tau in [0, 1], are integrated with classical RK4 on a
// fixed grid. The shooting map V -> z(1) is differentiated exactly by running
// the integrator on first-order jets, which gives the Newton Jacobian, and at
// the solution also the Jacobi matrix J = dz(1)/dV used for box sigma.

#include <stdexcept>
#include <string>
#include <vector>

#include "chlab/geometry.hpp"
#include "chlab/jet.hpp"

namespace chlab {

struct SolverOptions {
  int steps = 64;            // RK4 steps on [0, 1]
  double newton_tol = 1e-13;  // endpoint residual, relative to patch size
  int max_newton = 40;
  bool enforce_patch = true;
};

class BvpError : public std::runtime_error {
 public:
  BvpError(const std::string& what, std::vector<double> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

template <class T>
struct GeodesicState {
  Vec4<T> z, v;
};

template <class T>
void geodesic_rhs(const Spacetime& st, const GeodesicState<T>& s, GeodesicState<T>& ds,
                  LocalGeometry<T>& geo) {
  st.local<T>(std::span<const T, 4>(s.z), geo, 1);
  for (int a = 0; a < 4; ++a) {
    ds.z[a] = s.v[a];
    T acc(0.0);
    for (int b = 0; b < 4; ++b) {
      T gv(0.0);
      for (int c = 0; c < 4; ++c) gv = gv + geo.gamma[a][b][c] * s.v[c];
      acc = acc + gv * s.v[b];
    }
    ds.v[a] = -acc;
  }
}

template <class T>
GeodesicState<T> rk4_step(const Spacetime& st, const GeodesicState<T>& s, double h, LocalGeometry<T>& geo) {
  GeodesicState<T> k1, k2, k3, k4, tmp;
  auto axpy = [](const GeodesicState<T>& a, const GeodesicState<T>& k, double c, GeodesicState<T>& out) {
    for (int i = 0; i < 4; ++i) {
      out.z[i] = a.z[i] + c * k.z[i];
      out.v[i] = a.v[i] + c * k.v[i];
    }
  };
  geodesic_rhs(st, s, k1, geo);
  axpy(s, k1, 0.5 * h, tmp);
  geodesic_rhs(st, tmp, k2, geo);
  axpy(s, k2, 0.5 * h, tmp);
  geodesic_rhs(st, tmp, k3, geo);
  axpy(s, k3, h, tmp);
  geodesic_rhs(st, tmp, k4, geo);
  GeodesicState<T> out;
  for (int i = 0; i < 4; ++i) {
    out.z[i] = s.z[i] + (h / 6.0) * (k1.z[i] + 2.0 * k2.z[i] + 2.0 * k3.z[i] + k4.z[i]);
    out.v[i] = s.v[i] + (h / 6.0) * (k1.v[i] + 2.0 * k2.v[i] + 2.0 * k3.v[i] + k4.v[i]);
  }
  return out;
}

// Integrate from z(0) = base, zdot(0) = V to tau = 1.
template <class T>
GeodesicState<T> shoot(const Spacetime& st, const Point& base, const Vec4<T>& V, int steps,
                       std::vector<Point>* path = nullptr) {
  GeodesicState<T> s;
  for (int a = 0; a < 4; ++a) {
    s.z[a] = T(base[a]);
    s.v[a] = V[a];
  }
  LocalGeometry<T> geo;
  double h = 1.0 / steps;
  auto record = [&] {
    if (!path) return;
    Point p;
    for (int a = 0; a < 4; ++a) {
      if constexpr (std::is_same_v<T, double>) {
        p[a] = s.z[a];
      } else {
        p[a] = s.z[a].value();
      }
    }
    path->push_back(p);
  };
  record();
  for (int n = 0; n < steps; ++n) {
    s = rk4_step(st, s, h, geo);
    record();
  }
  return s;
}

struct BvpSolution {
  Vec4<double> V{};                // initial velocity at the base point
  Vec4<double> end_velocity{};     // velocity at tau = 1
  Mat4<double> J{}, Jdot{};        // d z(1)/dV and d zdot(1)/dV
  int iterations = 0;
  double residual = 0.0;
};

// Geodesic from `from` to `to`. `guess` seeds Newton (default: coordinate difference).
BvpSolution solve_bvp(const Spacetime& st, const Point& from, const Point& to, const SolverOptions& opt = {},
                      const Vec4<double>* guess = nullptr);

struct WorldFunctionData {
  Point x{}, y{};
  double sigma = 0.0;
  Vec4<double> grad_x{}, grad_y{};  // covariant gradients at each end
  double box_sigma = 0.0;           // box_x sigma
  double vanvleck = 1.0;            // Delta^{1/2} from the Jacobi matrix
  Vec4<double> velocity{};          // initial velocity at x of the geodesic x -> y
  std::vector<Point> geodesic;      // from x to y
  int iterations = 0;
};

WorldFunctionData geodesic_bvp(const Spacetime& st, const Point& x, const Point& y,
                               const SolverOptions& opt = {});

double world_function(const Spacetime& st, const Point& x, const Point& y, const SolverOptions& opt = {},
                      const Vec4<double>* guess = nullptr);

// Delta^{1/2}(x, y) from the mixed second derivatives of sigma, by central
// differences of repeated boundary-value solves (step 1e-3 * patch radius,
// one Richardson extrapolation):  Delta = -det(-d^2 sigma / dx dy) / sqrt(g(x) g(y)).
double van_vleck(const Spacetime& st, const Point& x, const Point& y, const SolverOptions& opt = {});

// Point reached from x along the geodesic with initial velocity s * w.
Point exp_map(const Spacetime& st, const Point& x, const Vec4<double>& w, double s, int steps = 64);

}  // namespace chlab
