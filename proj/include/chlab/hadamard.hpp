#pragma once

// Hadamard coefficients u, v0, v1 by transport along geodesics, and the
// parametrix H = kappa/(8 pi^2) (u/sigma + (v0 + v1 sigma) log(sigma/mu^2)).
//
// The geodesics from y are integrated as a family: the initial velocity is
// V + d with d a truncated Taylor jet, so every state along the ray is a jet
// in d. Near the ray point z(t) the map d -> z(t; V + d) is a chart, which
// gives x-derivatives of u(., y) through the inverse Jacobi matrix. With
// sigma^a grad_a = t d/dt along the ray the recursion becomes
//
//   u'  = -c u / 2,  box sigma = 4 + t c
//   v0(t) = u(t) int_0^1 (P u / 2u)(t s) ds
//   v1(1) = u(1) int_0^1 s (P v0 / 2u)(s) ds
//
// The integrals are Gauss-Legendre sums, so the regular start at t = 0 is
// built in and no node sits on the singular point.

#include <memory>

#include "chlab/geometry.hpp"
#include "chlab/worldfn.hpp"

namespace chlab {

struct TransportOptions {
  int steps = 64;         // maximal RK4 step is 1/steps
  double grading = 0.125;  // step <= grading * t near the base point
  double start = 1e-6;     // first step
  int nodes = 8;   // Gauss-Legendre nodes per integral
  SolverOptions bvp;
};

struct HadamardCoefficients {
  Point x{}, y{};
  double sigma = 0.0;
  double u = 2.0;         // transport ODE
  double u_jacobi = 2.0;  // 2 Delta^{1/2} from the Jacobi matrix of the same ray
  double v0 = 0.0, v1 = 0.0;
  int order = 1;
};

// p is the truncation order of v (0 or 1).
HadamardCoefficients hadamard_coefficients(const Spacetime& st, const Point& x, const Point& y, int p = 1,
                                           const TransportOptions& opt = {});

double transport_u(const Spacetime& st, const Point& x, const Point& y, const TransportOptions& opt = {});
std::pair<double, double> transport_v(const Spacetime& st, const Point& x, const Point& y, int p = 1,
                                      const TransportOptions& opt = {});

class HadamardKernel {
 public:
  HadamardKernel(std::shared_ptr<const Spacetime> st, double mu = 1.0, int p = 1, double kappa = 0.5,
                 TransportOptions opt = {});

  const Spacetime& spacetime() const { return *st_; }
  std::shared_ptr<const Spacetime> spacetime_ptr() const { return st_; }
  double mu() const { return mu_; }
  int order() const { return p_; }
  double kappa() const { return kappa_; }
  const TransportOptions& options() const { return opt_; }

  HadamardCoefficients coefficients(const Point& x, const Point& y) const;
  // H from precomputed coefficients; throws DomainError unless sigma > 0.
  double evaluate(const HadamardCoefficients& c) const;
  double operator()(const Point& x, const Point& y) const { return evaluate(coefficients(x, y)); }

 private:
  std::shared_ptr<const Spacetime> st_;
  double mu_, kappa_;
  int p_;
  TransportOptions opt_;
};

double parametrix(const HadamardKernel& k, const Point& x, const Point& y);

}  // namespace chlab
