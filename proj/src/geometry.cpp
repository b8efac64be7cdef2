#include "chlab/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <sstream>

namespace chlab {

Spacetime::Spacetime(std::string name, Box domain, Mat4<Expr> g, std::optional<Expr> conformal_factor,
                     double patch_radius)
    : name_(std::move(name)),
      domain_(domain),
      g_(std::move(g)),
      omega_(std::move(conformal_factor)),
      patch_radius_(patch_radius) {
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < a; ++b) g_[a][b] = g_[b][a];
  flat_ = true;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      double eta = a == b ? (a == 0 ? -1.0 : 1.0) : 0.0;
      if (!g_[a][b].is_constant() || g_[a][b].node().value != eta) flat_ = false;
    }
  compile();
}

Spacetime Spacetime::minkowski(Box domain) {
  return conformally_flat("minkowski", domain, Expr::constant(1.0), 1.0);
}

Spacetime Spacetime::conformally_flat(std::string name, Box domain, Expr omega, double patch_radius) {
  Mat4<Expr> g;
  Expr w2 = pow(omega, 2);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) g[a][b] = Expr::constant(0.0);
  g[0][0] = -w2;
  for (int i = 1; i < 4; ++i) g[i][i] = w2;
  return Spacetime(std::move(name), domain, g, omega, patch_radius);
}

Spacetime Spacetime::rescaled(double lambda) const {
  Mat4<Expr> g;
  double s = 1.0 / (lambda * lambda);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) g[a][b] = s * g_[a][b];
  std::optional<Expr> w;
  if (omega_) w = (1.0 / lambda) * *omega_;
  std::ostringstream n;
  n << name_ << "@" << lambda;
  return Spacetime(n.str(), domain_, g, w, patch_radius_);
}

void Spacetime::compile() {
  std::vector<Expr> out;
  for (int a = 0; a < 4; ++a)
    for (int b = a; b < 4; ++b) out.push_back(g_[a][b]);
  std::array<Mat4<Expr>, 4> dg;
  for (int c = 0; c < 4; ++c)
    for (int a = 0; a < 4; ++a)
      for (int b = a; b < 4; ++b) {
        dg[c][a][b] = g_[a][b].derivative(c);
        out.push_back(dg[c][a][b]);
      }
  tape1_ = Tape(out);
  for (int c = 0; c < 4; ++c)
    for (int d = c; d < 4; ++d)
      for (int a = 0; a < 4; ++a)
        for (int b = a; b < 4; ++b) out.push_back(dg[c][a][b].derivative(d));
  tape2_ = Tape(out);
  if (omega_) {
    std::vector<Expr> w{*omega_};
    for (int a = 0; a < 4; ++a) w.push_back(omega_->derivative(a));
    for (int a = 0; a < 4; ++a)
      for (int b = a; b < 4; ++b) w.push_back(w[1 + a].derivative(b));
    tapew_ = Tape(w);
  }
}

Mat4<double> Spacetime::metric_at(const Point& p) const {
  Mat4<double> g;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) g[a][b] = g_[a][b](p);
  return g;
}

double Spacetime::sqrt_neg_det(const Point& p) const {
  Mat4<double> g = metric_at(p), inv;
  double det = invert4(g, inv);
  if (!(det < 0.0)) throw DomainError("metric determinant is not negative");
  return std::sqrt(-det);
}

void Spacetime::check_signature(const Point& p) const {
  Mat4<double> g = metric_at(p);
  Eigen::Matrix4d m;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) m(a, b) = g[a][b];
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  double scale = ev.cwiseAbs().maxCoeff();
  int neg = 0, pos = 0;
  for (int i = 0; i < 4; ++i) {
    if (ev[i] < -1e-12 * scale) ++neg;
    if (ev[i] > 1e-12 * scale) ++pos;
  }
  if (neg != 1 || pos != 3) {
    std::ostringstream msg;
    msg << "metric of '" << name_ << "' has wrong signature at (" << p[0] << "," << p[1] << ","
        << p[2] << "," << p[3] << ")";
    throw DomainError(msg.str());
  }
}

double Spacetime::conformal_flatness_residual(const Point& p) const {
  if (!omega_) return 0.0;
  double w2 = std::pow((*omega_)(p), 2);
  Mat4<double> g = metric_at(p);
  double r = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      double eta = a == b ? (a == 0 ? -1.0 : 1.0) : 0.0;
      r = std::max(r, std::abs(g[a][b] - w2 * eta));
    }
  return r;
}

CurvatureBundle curvature(const Spacetime& st, const Point& p) {
  if (!st.domain().contains(p)) throw DomainError("point outside chart domain");
  LocalGeometry<double> geo;
  st.local<double>(std::span<const double, 4>(p), geo, 3);
  CurvatureBundle cb;
  cb.point = p;
  cb.gamma = geo.gamma;
  cb.ricci = geo.ricci;
  cb.R = geo.R;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d) {
          double s = 0.0;
          for (int e = 0; e < 4; ++e) s += geo.g[a][e] * geo.riemann[e][b][c][d];
          cb.riemann[a][b][c][d] = s;
        }
  // Weyl tensor C_abcd and W2 = C_abcd C^abcd
  const auto& g = geo.g;
  const auto& Ric = geo.ricci;
  double R = geo.R;
  std::array<std::array<Mat4<double>, 4>, 4> C;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d)
          C[a][b][c][d] = cb.riemann[a][b][c][d] -
                          0.5 * (g[a][c] * Ric[b][d] - g[a][d] * Ric[b][c] - g[b][c] * Ric[a][d] +
                                 g[b][d] * Ric[a][c]) +
                          (R / 6.0) * (g[a][c] * g[b][d] - g[a][d] * g[b][c]);
  // raise all indices
  auto up = C;
  for (int slot = 0; slot < 4; ++slot) {
    auto next = up;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int c = 0; c < 4; ++c)
          for (int d = 0; d < 4; ++d) {
            std::array<int, 4> idx{a, b, c, d};
            double s = 0.0;
            for (int e = 0; e < 4; ++e) {
              auto j = idx;
              j[slot] = e;
              s += geo.ginv[idx[slot]][e] * up[j[0]][j[1]][j[2]][j[3]];
            }
            next[a][b][c][d] = s;
          }
    up = next;
  }
  double w2 = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d) w2 += C[a][b][c][d] * up[a][b][c][d];
  cb.W2 = w2;
  return cb;
}

double wave_operator_from_jet(const LocalGeometry<double>& geo, double f, const Vec4<double>& df,
                              const Mat4<double>& ddf) {
  double box = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      double h = ddf[a][b];
      for (int c = 0; c < 4; ++c) h -= geo.gamma[c][a][b] * df[c];
      box += geo.ginv[a][b] * h;
    }
  return -box + geo.R * f / 6.0;
}

double wave_operator_apply(const Spacetime& st, const Expr& f, const Point& p) {
  if (!st.domain().contains(p)) throw DomainError("point outside chart domain");
  LocalGeometry<double> geo;
  st.local<double>(std::span<const double, 4>(p), geo, 2);
  Vec4<double> df;
  Mat4<double> ddf;
  for (int a = 0; a < 4; ++a) {
    Expr da = f.derivative(a);
    df[a] = da(p);
    for (int b = a; b < 4; ++b) ddf[a][b] = ddf[b][a] = da.derivative(b)(p);
  }
  return wave_operator_from_jet(geo, f(p), df, ddf);
}

}  // namespace chlab
