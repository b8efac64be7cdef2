#pragma once

// Fundamental solutions of P_g on conformally flat charts g = omega^2 eta.
//
// P_g (omega^-1 phi) = omega^-3 P_eta phi, so
//   (Delta+ f)(x) = omega(x)^-1 (1/4 pi) int d^3y F(t - |x - y|, y) / |x - y|,  F = omega^3 f
// and Delta- uses t + |x - y|. Delta+ f is supported in J+(supp f), and
// E = Delta+ - Delta-.
//
// The flat integral is done in spherical coordinates around x with nested
// adaptive Gauss-Kronrod rules in r, cos(theta) and phi, clipped to the
// support box of f.

#include <memory>
#include <stdexcept>

#include "chlab/confmap.hpp"
#include "chlab/geometry.hpp"

namespace chlab {

struct PropagatorOptions {
  double abs_tol = 1e-5;        // target on each propagator value
  long max_evals = 20'000'000;  // per smearing
  int outer_nodes = 6;          // Gauss-Legendre nodes per axis for pairings
  int threads = 0;              // 0: hardware concurrency
};

struct SmearedFieldValue {
  Point point{};
  double value = 0.0;
  double quadrature_error = 0.0;
  long evaluations = 0;
  double weight = 1.0;  // solutions transport with weight 1
};

struct TwoPointValue {
  Point x{}, y{};
  double omega2 = 0.0;
};

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Chart causal relations (conformal factors do not change them).
bool in_causal_future(const Box& support, const Point& x);
bool in_causal_past(const Box& support, const Point& x);

// Test functions must carry weight 0 (native) or 3 (pushed densities).
SmearedFieldValue retarded_apply(const Spacetime& st, const TestFunction& f, const Point& x,
                                 const PropagatorOptions& opt = {});
SmearedFieldValue advanced_apply(const Spacetime& st, const TestFunction& f, const Point& x,
                                 const PropagatorOptions& opt = {});
SmearedFieldValue causal_propagator_apply(const Spacetime& st, const TestFunction& f, const Point& x,
                                          const PropagatorOptions& opt = {});

// sigma(phi_f, phi_g) = int f (E g) dmu_g; error receives |Q_n - Q_{n-2}| plus the inner errors.
double symplectic_form(const Spacetime& st, const TestFunction& f, const TestFunction& g,
                       const PropagatorOptions& opt = {}, double* error = nullptr);

// omega(x)^-1 omega(y)^-1 / (8 pi^2 sigma_eta(x, y)) at spacelike separation.
TwoPointValue conformal_vacuum_two_point(const Spacetime& st, const Point& x, const Point& y);

// Both sides of chi(psi(M)) E'(psi_*^(3) f) = psi_*^(1)(E f) at an image point.
struct TransportedSolution {
  Point image_point{};
  double lhs = 0.0, rhs = 0.0;
  double error = 0.0;  // quadrature estimate of lhs - rhs
};
TransportedSolution transported_solution(const ConformalEmbedding& e, const TestFunction& f,
                                         const Point& image_point, const PropagatorOptions& opt = {});

// P_g applied to x -> (E f)(x) by 4th-order central differences with step h.
double wave_operator_fd(const Spacetime& st, const TestFunction& f, const Point& x, double h,
                        const PropagatorOptions& opt = {}, bool retarded_only = false);

}  // namespace chlab
