#pragma once

// Conformal embeddings psi: (M1, g1) -> (M2, g2) with psi_* g1 = Omega^-2 g2,
// and the weighted action on test functions
//   psi_*^(lambda) f = Omega^-lambda (f o psi^-1).

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "chlab/geometry.hpp"

namespace chlab {

struct TestFunction {
  Expr expr;
  Box support;        // expr vanishes outside and on the boundary of this box
  double weight = 0;  // bookkeeping tag
  std::string spacetime;
  // For pushed functions: the map back to the chart of the original bump and
  // its box, so that points inside `support` but outside the true image of the
  // original support evaluate to zero.
  std::optional<std::array<Expr, 4>> pull;
  Box origin;

  double operator()(const Point& p) const;
};

// Polynomial bump prod_i (1 - u_i^2)^k, u_i the affine coordinate of the box
// mapped to [-1, 1]; zero with k-1 derivatives on the boundary.
TestFunction bump_function(const Box& support, int k = 4, double amplitude = 1.0,
                           std::string spacetime = {});

class ConformalEmbedding {
 public:
  ConformalEmbedding() = default;
  ConformalEmbedding(std::string name, std::shared_ptr<const Spacetime> source,
                     std::shared_ptr<const Spacetime> target, std::array<Expr, 4> psi,
                     std::array<Expr, 4> psi_inv, Expr omega, Box image);

  static ConformalEmbedding identity(std::shared_ptr<const Spacetime> st);

  const std::string& name() const { return name_; }
  const Spacetime& source() const { return *source_; }
  const Spacetime& target() const { return *target_; }
  std::shared_ptr<const Spacetime> source_ptr() const { return source_; }
  std::shared_ptr<const Spacetime> target_ptr() const { return target_; }
  const std::array<Expr, 4>& psi() const { return psi_; }
  const std::array<Expr, 4>& psi_inv() const { return psi_inv_; }
  const Expr& omega() const { return omega_; }
  const Box& image() const { return image_; }
  // The preimage of the image box (bounding box of sampled preimages).
  const Box& preimage() const { return preimage_; }

  Point map(const Point& x) const;
  Point unmap(const Point& x) const;
  double omega_at(const Point& image_point) const { return omega_(image_point); }

  // The spacetime (image chart, metric Omega^-2 g2) that psi makes isometric to the source.
  const Spacetime& induced() const { return *induced_; }

  // Sampled invariant checks; returns the worst residual of each kind.
  struct Validation {
    double inverse = 0.0;     // |psi_inv(psi(x)) - x|
    double metric_law = 0.0;  // |Omega^2 psi_* g1 - g2| relative
    double min_omega = 0.0;
    Point min_omega_at{};
  };
  Validation validate(int samples, std::mt19937& rng) const;

 private:
  std::string name_;
  std::shared_ptr<const Spacetime> source_, target_, induced_;
  std::array<Expr, 4> psi_, psi_inv_;
  Expr omega_;
  Box image_, preimage_;
};

// Image box of a box under psi (sampled, slightly padded).
Box map_box(const std::array<Expr, 4>& psi, const Box& b);

TestFunction weighted_pushforward(const ConformalEmbedding& e, double lambda, const TestFunction& f);

// psi = psi2 o psi1 and Omega_12 = Omega_2 * (Omega_1 o psi2^-1).
ConformalEmbedding compose(const ConformalEmbedding& e2, const ConformalEmbedding& e1);

// max over pts of |P_g2(psi^(1) f) - psi^(3)(P_g1 f)|, pts in the image chart.
double check_wave_conformal_law(const ConformalEmbedding& e, const TestFunction& f,
                                const std::vector<Point>& pts);

struct ConformalJet {
  Point point{};
  Vec4<double> L{};       // d log Omega
  Mat4<double> L2{};      // covariant Hessian of log Omega
};

// Derivatives of log Omega at an image point; the covariant derivative is that
// of the induced metric Omega^-2 g2.
ConformalJet conformal_jet(const ConformalEmbedding& e, const Point& image_point);

}  // namespace chlab
