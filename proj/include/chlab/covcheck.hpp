#pragma once

// Coincidence-limit checks of the conformal transformation laws.
//
// Limits are taken along symmetric pairs x -+ s w / 2 around a point x of the
// target chart; the preimages under psi give the source pairs. Every quantity
// sampled here is a symmetric bitensor, so the samples are even in s and the
// schedule is extrapolated in s^2.
//
// H is kappa-scaled throughout: H = kappa/(8 pi^2)(u/sigma + v log(sigma/mu^2)),
// and the constants 1/(12 pi)^2 in alpha and B carry the same kappa.

#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "chlab/confmap.hpp"
#include "chlab/hadamard.hpp"

namespace chlab {

std::vector<double> default_schedule();  // 0.08 * 2^-k, k = 0..5

struct LimitProbe {
  Point x{};
  Vec4<double> w{0.0, 1.0, 0.0, 0.0};
  std::vector<double> s_schedule = default_schedule();
  std::vector<double> samples;
  std::vector<double> richardson;  // (4 f_{k+1} - f_k) / 3 for a halving schedule
  double extrapolated_value = std::numeric_limits<double>::quiet_NaN();
  double order_estimate = std::numeric_limits<double>::quiet_NaN();
  bool monotone = false;  // |R_k - R_{k+1}| decreasing along the tail
};

class ExtrapolationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Samples f along the schedule and fills the extrapolation fields.
void extrapolate(LimitProbe& probe, const std::function<double(double)>& f);
// Same, from samples already stored in probe.samples.
void finish_probe(LimitProbe& probe);

// The symmetric pair x -+ s w / 2.
std::pair<Point, Point> probe_pair(const Point& x, const Vec4<double>& w, double s);
// w rescaled to unit length in the metric at x; throws unless spacelike.
Vec4<double> unit_spacelike(const Spacetime& st, const Point& x, const Vec4<double>& w);

struct CovarianceReport {
  std::string identity;
  std::string spacetime;  // or embedding name
  Point point{};
  double measured = 0.0, predicted = 0.0;
  double abs_error = 0.0, rel_error = 0.0;
  double tolerance = 0.0;  // on abs_error
  double order = std::numeric_limits<double>::quiet_NaN();
  double kappa = 0.5;
  bool pass = false;
  std::vector<std::pair<std::string, double>> extras;  // diagnostics, in insertion order
  std::vector<double> s, samples;                       // traces for plotting

  double extra(const std::string& key) const;
};

struct CovOptions {
  double kappa = 0.5;
  double mu = 1.0;
  int p = 1;
  double min_order = 1.8;
  double tol_scale = 1.0;  // multiplies every tolerance
  TransportOptions transport;
};

double stated_alpha(double kappa);  // -kappa / (12 pi)^2
double wick_b(double kappa, double r_x, double r_y);  // kappa (R(x) + R(y)) / (2 (12 pi)^2)

// Bracket u/(Omega sigma Omega) + v/(Omega Omega) log sigma - u'/sigma' - v' log sigma'
// against R/(18 Omega^2) - R'/18, together with the weighted A(x,x) variant.
CovarianceReport hadamard_difference_limit(const ConformalEmbedding& e, LimitProbe probe, const CovOptions& opt = {});

CovarianceReport mu_independence(const Spacetime& st, double mu, double mu2, LimitProbe probe,
                                 const CovOptions& opt = {});

// v0 at coincidence.
CovarianceReport coincidence_v0(const Spacetime& st, LimitProbe probe, const CovOptions& opt = {});

// Delta^{1/2} = 1 - (1/12) R_ab sigma^a sigma^b + O(sigma^2) along y = exp_x(s w).
CovarianceReport van_vleck_expansion(const Spacetime& st, LimitProbe probe, const CovOptions& opt = {});

// transport u against 2 Delta^{1/2} from the sigma Hessian on the given pairs.
CovarianceReport transport_consistency(const Spacetime& st, const std::vector<std::pair<Point, Point>>& pairs,
                                       const CovOptions& opt = {});

// d = Omega^2 c'(x) - c(psi^-1 x), c = lim(omega2 - kappa H) + alpha R.
CovarianceReport phi2_covariance(const ConformalEmbedding& e, double alpha, LimitProbe probe,
                                 const CovOptions& opt = {});

CovarianceReport wick_kernel_covariance(const ConformalEmbedding& e, LimitProbe probe, const CovOptions& opt = {});

CovarianceReport composite_weight4_check(const ConformalEmbedding& e, std::array<double, 3> lambdas,
                                         LimitProbe probe, const CovOptions& opt = {});

// Omega^4 W2'(x) = W2(psi^-1 x).
CovarianceReport weyl_weight_check(const ConformalEmbedding& e, const Point& x);

// lambda^-2 H_{lambda^-2 g} = H_g + v_g log lambda^2 on each pair, and its coincidence limit.
CovarianceReport rigid_dilation_suite(const Spacetime& st, double lambda,
                                      const std::vector<std::pair<Point, Point>>& pairs, LimitProbe probe,
                                      const CovOptions& opt = {});

}  // namespace chlab
