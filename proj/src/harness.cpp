#include "chlab/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "chlab/propagator.hpp"
#include "chlab/quadrature.hpp"
#include "chlab/wickalg.hpp"
#include "json.hpp"

namespace chlab {

namespace {

// ---------------------------------------------------------------------------
// catalog text

struct Field {
  std::string value;
  int line = 0;
};

struct Section {
  std::string kind;
  int line = 0;
  std::map<std::string, Field> fields;
};

std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt_point(const Point& p) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "(%.6g, %.6g, %.6g, %.6g)", p[0], p[1], p[2], p[3]);
  return buf;
}

class Reader {
 public:
  Reader(std::string origin, const std::map<std::string, double>& params) : origin_(std::move(origin)) {
    for (const auto& [k, v] : params) params_.emplace(k, v);
  }

  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw CatalogError(origin_ + ":" + std::to_string(line) + ": " + msg);
  }

  Expr expr(const Field& f) const {
    try {
      return parse_expr(f.value, params_);
    } catch (const ParseError& e) {
      fail(f.line, std::string("bad expression '") + f.value + "': " + e.what());
    }
  }

  double number(const Field& f) const { return number(f.value, f.line); }

  double number(const std::string& s, int line) const {
    Expr e;
    try {
      e = parse_expr(s, params_);
    } catch (const ParseError& err) {
      fail(line, std::string("bad number '") + s + "': " + err.what());
    }
    for (int d = 0; d < 4; ++d)
      if (e.depends_on(d)) fail(line, "'" + s + "' must be a constant");
    return e(Point{});
  }

  std::vector<std::string> list(const Field& f) const { return list(f.value, f.line); }

  std::vector<std::string> list(const std::string& s, int line) const {
    std::string t = trim(s);
    if (t.size() < 2 || t.front() != '[' || t.back() != ']') fail(line, "expected a bracketed list, got '" + t + "'");
    std::vector<std::string> out;
    int depth = 0;
    std::string cur;
    for (std::size_t i = 1; i + 1 < t.size(); ++i) {
      char c = t[i];
      if (c == '[' || c == '(') ++depth;
      if (c == ']' || c == ')') --depth;
      if (c == ',' && depth == 0) {
        out.push_back(trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
    for (const auto& item : out)
      if (item.empty()) fail(line, "empty list entry");
    return out;
  }

  std::array<Expr, 4> map4(const Field& f) const {
    auto items = list(f);
    if (items.size() != 4) fail(f.line, "expected 4 components");
    std::array<Expr, 4> out;
    for (int i = 0; i < 4; ++i) out[i] = expr(Field{items[i], f.line});
    return out;
  }

  Box box(const Field& f) const {
    auto items = list(f);
    if (items.size() != 4) fail(f.line, "a box needs 4 intervals");
    Box b;
    for (int d = 0; d < 4; ++d) {
      auto iv = list(items[d], f.line);
      if (iv.size() != 2) fail(f.line, "an interval needs 2 ends");
      b.range[d] = {number(iv[0], f.line), number(iv[1], f.line)};
      if (!(b.range[d][0] < b.range[d][1])) fail(f.line, "empty interval in box");
    }
    return b;
  }

  const ParamMap& params() const { return params_; }

 private:
  std::string origin_;
  ParamMap params_;
};

std::vector<Section> split_sections(const std::string& text, const std::string& origin) {
  std::vector<Section> out;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  static const std::set<std::string> kinds{"parameters", "spacetime", "embedding"};
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw.substr(0, raw.find('#')));
    if (s.empty()) continue;
    if (s.front() == '[' && s.back() == ']' && s.find('=') == std::string::npos) {
      std::string kind = trim(s.substr(1, s.size() - 2));
      if (!kinds.count(kind)) throw CatalogError(origin + ":" + std::to_string(line) + ": unknown section [" + kind + "]");
      out.push_back({kind, line, {}});
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos) throw CatalogError(origin + ":" + std::to_string(line) + ": expected 'key = value'");
    if (out.empty()) throw CatalogError(origin + ":" + std::to_string(line) + ": entry outside a section");
    std::string key = trim(s.substr(0, eq));
    if (!out.back().fields.emplace(key, Field{trim(s.substr(eq + 1)), line}).second)
      throw CatalogError(origin + ":" + std::to_string(line) + ": duplicate key '" + key + "'");
  }
  return out;
}

const Field& require(const Reader& r, const Section& s, const std::string& key) {
  auto it = s.fields.find(key);
  if (it == s.fields.end()) r.fail(s.line, "[" + s.kind + "] needs '" + key + "'");
  return it->second;
}

void allow_only(const Reader& r, const Section& s, const std::set<std::string>& keys) {
  for (const auto& [k, f] : s.fields)
    if (!keys.count(k)) r.fail(f.line, "unknown key '" + k + "' in [" + s.kind + "]");
}

Box middle(const Box& b, double fraction) {
  Box out;
  for (int d = 0; d < 4; ++d) {
    double c = 0.5 * (b.range[d][0] + b.range[d][1]), h = 0.5 * fraction * b.width(d);
    out.range[d] = {c - h, c + h};
  }
  return out;
}

Point draw(const Box& b, std::mt19937_64& rng) {
  Point p;
  for (int d = 0; d < 4; ++d) p[d] = std::uniform_real_distribution<double>(b.range[d][0], b.range[d][1])(rng);
  return p;
}

Point center(const Box& b) {
  Point p;
  for (int d = 0; d < 4; ++d) p[d] = 0.5 * (b.range[d][0] + b.range[d][1]);
  return p;
}

CatalogSpacetime build_spacetime(const Reader& r, const Section& s) {
  std::set<std::string> keys{"name", "domain", "omega", "patch_radius", "probe_box"};
  for (int a = 0; a < 4; ++a)
    for (int b = a; b < 4; ++b) keys.insert("g" + std::to_string(a) + std::to_string(b));
  allow_only(r, s, keys);
  std::string name = require(r, s, "name").value;
  Box domain = r.box(require(r, s, "domain"));
  double radius = s.fields.count("patch_radius") ? r.number(s.fields.at("patch_radius")) : 0.5;
  std::optional<Expr> omega;
  if (s.fields.count("omega")) omega = r.expr(s.fields.at("omega"));
  bool explicit_metric = false;
  Mat4<Expr> g;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) g[a][b] = Expr::constant(0.0);
  for (int a = 0; a < 4; ++a)
    for (int b = a; b < 4; ++b) {
      auto it = s.fields.find("g" + std::to_string(a) + std::to_string(b));
      if (it == s.fields.end()) continue;
      g[a][b] = g[b][a] = r.expr(it->second);
      explicit_metric = true;
    }
  if (!omega && !explicit_metric) r.fail(s.line, "spacetime '" + name + "' needs omega or metric components");
  std::shared_ptr<const Spacetime> st;
  try {
    st = explicit_metric ? std::make_shared<const Spacetime>(name, domain, g, omega, radius)
                         : std::make_shared<const Spacetime>(Spacetime::conformally_flat(name, domain, *omega, radius));
  } catch (const std::exception& e) {
    r.fail(s.line, "spacetime '" + name + "': " + e.what());
  }
  // sampled validation
  std::mt19937_64 rng(1234);
  for (int k = 0; k < 32; ++k) {
    Point p = k == 0 ? center(domain) : draw(domain, rng);
    if (omega) {
      double w = 0.0;
      try {
        w = (*omega)(p);
      } catch (const DomainError& e) {
        r.fail(s.fields.at("omega").line, "omega of '" + name + "' undefined at " + fmt_point(p) + ": " + e.what());
      }
      if (!(w > 0.0)) r.fail(s.fields.at("omega").line, "omega of '" + name + "' is not positive at " + fmt_point(p));
      double res = st->conformal_flatness_residual(p);
      if (res > 1e-12 * std::max(1.0, w * w))
        r.fail(s.line, "metric of '" + name + "' differs from omega^2 eta at " + fmt_point(p));
    }
    try {
      st->check_signature(p);
    } catch (const DomainError& e) {
      r.fail(s.line, "spacetime '" + name + "' at " + fmt_point(p) + ": " + e.what());
    }
  }
  Box probe = s.fields.count("probe_box") ? r.box(s.fields.at("probe_box")) : middle(domain, 0.5);
  if (!domain.contains(probe)) r.fail(s.line, "probe_box of '" + name + "' leaves the domain");
  return {st, probe};
}

CatalogEmbedding build_embedding(const Reader& r, const Section& s, const Catalog& cat) {
  allow_only(r, s, {"name", "source", "target", "psi", "psi_inv", "omega", "image_box", "probe_box"});
  std::string name = require(r, s, "name").value;
  auto find = [&](const std::string& key) {
    const Field& f = require(r, s, key);
    for (const auto& c : cat.spacetimes)
      if (c.st->name() == f.value) return c.st;
    r.fail(f.line, "unknown spacetime '" + f.value + "'");
  };
  auto source = find("source"), target = find("target");
  auto psi = r.map4(require(r, s, "psi")), psi_inv = r.map4(require(r, s, "psi_inv"));
  Expr omega = r.expr(require(r, s, "omega"));
  Box image = r.box(require(r, s, "image_box"));
  if (!target->domain().contains(image)) r.fail(s.line, "image_box of '" + name + "' leaves the target domain");
  std::shared_ptr<const ConformalEmbedding> e;
  try {
    e = std::make_shared<const ConformalEmbedding>(name, source, target, psi, psi_inv, omega, image);
  } catch (const std::exception& err) {
    r.fail(s.line, "embedding '" + name + "': " + err.what());
  }
  if (!source->domain().contains(e->preimage())) r.fail(s.line, "preimage of '" + name + "' leaves the source domain");
  std::mt19937 rng(4321);
  ConformalEmbedding::Validation v;
  try {
    v = e->validate(32, rng);
  } catch (const DomainError& err) {
    r.fail(s.line, "embedding '" + name + "': " + err.what());
  }
  if (!(v.min_omega > 0.0))
    r.fail(s.fields.at("omega").line, "omega of '" + name + "' is not positive at " + fmt_point(v.min_omega_at));
  if (v.inverse > 1e-9) r.fail(s.fields.at("psi_inv").line, "psi_inv of '" + name + "' does not invert psi");
  if (v.metric_law > 1e-8) r.fail(s.line, "embedding '" + name + "' violates psi_* g1 = Omega^-2 g2");
  Box probe = s.fields.count("probe_box") ? r.box(s.fields.at("probe_box")) : middle(image, 0.5);
  if (!image.contains(probe)) r.fail(s.line, "probe_box of '" + name + "' leaves the image");
  return {e, probe};
}

}  // namespace

const CatalogSpacetime& Catalog::spacetime(const std::string& name) const {
  for (const auto& s : spacetimes)
    if (s.st->name() == name) return s;
  throw CatalogError("no spacetime named '" + name + "' in " + origin);
}

const CatalogEmbedding& Catalog::embedding(const std::string& name) const {
  for (const auto& e : embeddings)
    if (e.e->name() == name) return e;
  throw CatalogError("no embedding named '" + name + "' in " + origin);
}

Catalog catalog_parse(const std::string& text, const std::string& origin) {
  Catalog cat;
  cat.origin = origin;
  auto sections = split_sections(text, origin);
  for (const auto& s : sections) {
    if (s.kind != "parameters") continue;
    for (const auto& [k, f] : s.fields) {
      Reader r(origin, cat.parameters);
      if (!cat.parameters.emplace(k, r.number(f)).second) r.fail(f.line, "parameter '" + k + "' declared twice");
    }
  }
  Reader r(origin, cat.parameters);
  std::set<std::string> names;
  for (const auto& s : sections)
    if (s.kind == "spacetime") {
      cat.spacetimes.push_back(build_spacetime(r, s));
      if (!names.insert(cat.spacetimes.back().st->name()).second) r.fail(s.line, "duplicate spacetime name");
    }
  for (const auto& s : sections)
    if (s.kind == "embedding") {
      cat.embeddings.push_back(build_embedding(r, s, cat));
      if (!names.insert(cat.embeddings.back().e->name()).second) r.fail(s.line, "duplicate name");
    }
  if (cat.spacetimes.empty()) throw CatalogError(origin + ": no spacetimes");
  return cat;
}

Catalog catalog_load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CatalogError("cannot open catalog '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return catalog_parse(ss.str(), path);
}

// ---------------------------------------------------------------------------
// suites

namespace {

struct Case {
  std::string suite;
  std::function<CovarianceReport()> run;
};

struct Context {
  const Catalog& cat;
  const RunConfig& cfg;
  CovOptions opt;
  std::mt19937_64 rng;
};

Vec4<double> spacelike_direction(const Spacetime& st, const Point& x, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat4<double> g = st.metric_at(x);
  for (;;) {
    Vec4<double> w{0.3 * u(rng), u(rng), u(rng), u(rng)};
    double n = 0.0, e = 0.0;
    for (int a = 0; a < 4; ++a) {
      e += w[a] * w[a];
      for (int b = 0; b < 4; ++b) n += g[a][b] * w[a] * w[b];
    }
    if (n > 0.2 * e * std::abs(g[1][1])) return w;
  }
}

LimitProbe make_probe(const Spacetime& st, const Box& box, std::mt19937_64& rng) {
  LimitProbe p;
  p.x = draw(box, rng);
  p.w = spacelike_direction(st, p.x, rng);
  return p;
}

std::vector<std::pair<Point, Point>> make_pairs(const CatalogSpacetime& c, int n, std::mt19937_64& rng) {
  std::vector<std::pair<Point, Point>> out;
  std::uniform_real_distribution<double> len(0.05, 0.25);
  while (static_cast<int>(out.size()) < n) {
    Point x = draw(c.probe_box, rng);
    auto w = spacelike_direction(*c.st, x, rng);
    double norm = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2] + w[3] * w[3]);
    double l = len(rng) * std::min(1.0, c.st->patch_radius() / 0.6);
    Point y;
    for (int d = 0; d < 4; ++d) y[d] = x[d] + l * w[d] / norm;
    if (c.st->domain().contains(y)) out.emplace_back(x, y);
  }
  return out;
}

bool curved(const Spacetime& st) { return !st.is_flat(); }

Box cell(const Point& c, double ht, double hx) {
  Box b;
  b.range[0] = {c[0] - ht, c[0] + ht};
  for (int i = 1; i < 4; ++i) b.range[i] = {c[i] - hx, c[i] + hx};
  return b;
}

double min_width(const Box& b) {
  double w = b.width(0);
  for (int d = 1; d < 4; ++d) w = std::min(w, b.width(d));
  return w;
}

// Count-style result of an exact check.
CovarianceReport exact_report(std::string id, std::string where, double mismatches, double kappa) {
  CovarianceReport r;
  r.identity = std::move(id);
  r.spacetime = std::move(where);
  r.measured = mismatches;
  r.abs_error = mismatches;
  r.rel_error = mismatches;
  r.kappa = kappa;
  r.pass = mismatches == 0.0;
  return r;
}

// A metric that is not conformally flat and its Weyl rescaling.
std::shared_ptr<const ConformalEmbedding> lumpy_rescaling() {
  Box dom{{{{-1, 1}, {-1, 1}, {-1, 1}, {-1, 1}}}};
  Mat4<Expr> g;
  for (auto& row : g)
    for (auto& e : row) e = Expr::constant(0.0);
  g[0][0] = parse_expr("-(1 + 0.2*x3^2)");
  g[0][1] = g[1][0] = parse_expr("0.1*sin(x2)");
  g[1][1] = parse_expr("1 + 0.3*x2^2");
  g[2][2] = parse_expr("exp(0.2*x1)");
  g[3][3] = parse_expr("1 + 0.1*x0*x1");
  Expr w = parse_expr("exp(0.1*x1 - 0.05*x0*x2)");
  Mat4<Expr> gs = g;
  for (auto& row : gs)
    for (auto& e : row) e = pow(w, 2) * e;
  auto l = std::make_shared<const Spacetime>("lumpy", dom, g, std::nullopt, 0.6);
  auto t = std::make_shared<const Spacetime>("lumpy_scaled", dom, gs, std::nullopt, 0.6);
  std::array<Expr, 4> id{Expr::variable(0), Expr::variable(1), Expr::variable(2), Expr::variable(3)};
  return std::make_shared<const ConformalEmbedding>("lumpy_rescale", l, t, id, id, w,
                                                    Box{{{{-0.5, 0.5}, {-0.5, 0.5}, {-0.5, 0.5}, {-0.5, 0.5}}}});
}

void geometry_suite(Context& c, std::vector<Case>& out) {
  for (const auto& ce : c.cat.embeddings) {
    auto e = ce.e;
    Point src = e->unmap(center(ce.probe_box));
    double h = std::min(0.3, 0.125 * min_width(e->preimage()));
    auto f = bump_function(cell(src, h, h), 4);
    std::vector<Point> pts;
    for (int k = 0; k < 10; ++k) pts.push_back(e->map(draw(cell(src, 0.8 * h, 0.8 * h), c.rng)));
    double ts = c.opt.tol_scale;
    out.push_back({"geometry", [e, f, pts, ts] {
                     double norm = 0.0;
                     for (const Point& x : pts)
                       norm = std::max(norm, std::abs(std::pow(e->omega_at(x), -3) *
                                                      wave_operator_apply(e->source(), f.expr, e->unmap(x))));
                     CovarianceReport r;
                     r.identity = "wave_conformal_law";
                     r.spacetime = e->name();
                     r.point = pts.front();
                     r.measured = check_wave_conformal_law(*e, f, pts);
                     r.abs_error = r.measured;
                     r.rel_error = r.measured / norm;
                     r.tolerance = 1e-6 * norm * ts;
                     r.pass = norm > 0.0 && r.abs_error <= r.tolerance;
                     r.extras = {{"points", 10.0}, {"sup_norm", norm}};
                     return r;
                   }});
  }
  for (const auto& cs : c.cat.spacetimes) {
    if (!cs.st->conformal_factor()) continue;
    auto st = cs.st;
    std::vector<Point> pts;
    for (int k = 0; k < 5; ++k) pts.push_back(draw(cs.probe_box, c.rng));
    out.push_back({"geometry", [st, pts] {
                     double worst = 0.0, scale = 1.0;
                     for (const Point& x : pts) {
                       auto cb = curvature(*st, x);
                       worst = std::max(worst, std::abs(cb.W2));
                       scale = std::max(scale, cb.R * cb.R);
                     }
                     CovarianceReport r;
                     r.identity = "weyl_vanishes";
                     r.spacetime = st->name();
                     r.point = pts.front();
                     r.measured = r.abs_error = r.rel_error = worst;
                     r.tolerance = 1e-8 * scale;
                     r.pass = worst <= r.tolerance;
                     return r;
                   }});
  }
  auto lumpy = lumpy_rescaling();
  for (int k = 0; k < 3; ++k) {
    Point x = draw(lumpy->image(), c.rng);
    out.push_back({"geometry", [lumpy, x] { return weyl_weight_check(*lumpy, x); }});
  }
}

void worldfn_suite(Context& c, std::vector<Case>& out) {
  for (const auto& cs : c.cat.spacetimes) {
    auto st = cs.st;
    auto pairs = make_pairs(cs, 20, c.rng);
    CovOptions opt = c.opt;
    out.push_back({"worldfn", [st, pairs, opt] { return transport_consistency(*st, pairs, opt); }});
  }
  for (const auto& cs : c.cat.spacetimes) {
    if (!curved(*cs.st)) continue;
    auto st = cs.st;
    auto probe = make_probe(*st, cs.probe_box, c.rng);
    CovOptions opt = c.opt;
    out.push_back({"worldfn", [st, probe, opt] { return van_vleck_expansion(*st, probe, opt); }});
  }
}

void hadamard_suite(Context& c, std::vector<Case>& out) {
  for (const auto& cs : c.cat.spacetimes) {
    auto st = cs.st;
    CovOptions opt = c.opt;
    int n = curved(*st) ? 5 : 1;
    for (int k = 0; k < n; ++k) {
      auto probe = make_probe(*st, cs.probe_box, c.rng);
      if (curved(*st)) out.push_back({"hadamard", [st, probe, opt] { return coincidence_v0(*st, probe, opt); }});
      out.push_back({"hadamard", [st, probe, opt] { return mu_independence(*st, opt.mu, 10 * opt.mu, probe, opt); }});
    }
  }
}

void covariance_suite(Context& c, std::vector<Case>& out) {
  CovOptions opt = c.opt;
  for (const auto& ce : c.cat.embeddings) {
    auto e = ce.e;
    auto probe = make_probe(e->target(), ce.probe_box, c.rng);
    double alpha = stated_alpha(opt.kappa);
    out.push_back({"covariance", [e, probe, opt] { return hadamard_difference_limit(*e, probe, opt); }});
    out.push_back({"covariance", [e, probe, opt, alpha] { return phi2_covariance(*e, alpha, probe, opt); }});
    out.push_back({"covariance", [e, probe, opt] {
                     auto r = phi2_covariance(*e, 0.0, probe, opt);
                     r.identity = "phi2_alpha0";
                     return r;
                   }});
    out.push_back({"covariance", [e, probe, opt] { return wick_kernel_covariance(*e, probe, opt); }});
    out.push_back({"covariance", [e, probe, opt] {
                     return composite_weight4_check(*e, {1.0, 0.5, 0.25}, probe, opt);
                   }});
  }
  // one embedding with curvature on the target; the first one otherwise
  auto kappa_case = std::find_if(c.cat.embeddings.begin(), c.cat.embeddings.end(),
                                 [](const CatalogEmbedding& ce) { return curved(ce.e->target()); });
  if (kappa_case == c.cat.embeddings.end()) kappa_case = c.cat.embeddings.begin();
  if (kappa_case != c.cat.embeddings.end()) {
    const auto& ce = *kappa_case;
    auto e = ce.e;
    auto probe = make_probe(e->target(), ce.probe_box, c.rng);
    out.push_back({"covariance", [e, probe, opt] {
                     CovOptions twice = opt;
                     twice.kappa = 2 * opt.kappa;
                     auto a = hadamard_difference_limit(*e, probe, opt), b = hadamard_difference_limit(*e, probe, twice);
                     auto wa = wick_kernel_covariance(*e, probe, opt), wb = wick_kernel_covariance(*e, probe, twice);
                     double dev = std::abs(a.measured - b.measured) +
                                  std::abs(b.extra("A_weighted") - 2 * a.extra("A_weighted")) +
                                  std::abs(wb.measured - 2 * wa.measured);
                     CovarianceReport r;
                     r.identity = "kappa_independence";
                     r.spacetime = e->name();
                     r.point = probe.x;
                     r.measured = r.abs_error = dev;
                     r.rel_error = dev / std::max(1e-300, std::abs(a.extra("A_weighted")));
                     r.tolerance = 1e-10 * std::max(1.0, std::abs(a.measured)) * opt.tol_scale;
                     r.kappa = opt.kappa;
                     bool same = a.pass == b.pass && wa.pass == wb.pass;
                     r.pass = r.abs_error <= r.tolerance && same;
                     r.extras = {{"pass_flags_agree", same ? 1.0 : 0.0}};
                     return r;
                   }});
  }
  for (const auto& cs : c.cat.spacetimes) {
    auto st = cs.st;
    for (double lambda : {0.5, 2.0, 10.0}) {
      auto pairs = make_pairs(cs, 3, c.rng);
      auto probe = make_probe(*st, cs.probe_box, c.rng);
      probe.s_schedule = {0.04, 0.02, 0.01};
      out.push_back({"covariance", [st, lambda, pairs, probe, opt] {
                       return rigid_dilation_suite(*st, lambda, pairs, probe, opt);
                     }});
    }
  }
}

void propagator_suite(Context& c, std::vector<Case>& out) {
  double ts = c.opt.tol_scale;
  for (const auto& cs : c.cat.spacetimes) {
    if (!cs.st->conformal_factor() || !curved(*cs.st)) continue;
    auto st = cs.st;
    Point ctr = center(cs.probe_box);
    out.push_back({"propagator", [st, ctr, ts] {
                     PropagatorOptions o;
                     o.abs_tol = 1e-7;
                     auto f = bump_function(cell(ctr, 0.4, 0.4), 4);
                     Point x{ctr[0] + 0.1, ctr[1] + 0.1, ctr[2] - 0.05, ctr[3] + 0.2};
                     double ret = std::abs(wave_operator_fd(*st, f, x, 0.05, o, true) - f(x));
                     double e = std::abs(wave_operator_fd(*st, f, x, 0.05, o));
                     CovarianceReport r;
                     r.identity = "propagator_wave_residual";
                     r.spacetime = st->name();
                     r.point = x;
                     r.measured = r.abs_error = r.rel_error = std::max(ret, e);  // sup f = 1
                     r.tolerance = 1e-3 * ts;
                     r.pass = r.abs_error <= r.tolerance;
                     r.extras = {{"retarded_residual", ret}, {"causal_residual", e}};
                     return r;
                   }});
    std::uint64_t seed = c.rng();
    out.push_back({"propagator", [st, ctr, seed] {
                     Box s = cell(ctr, 0.3, 0.3);
                     auto f = bump_function(s, 4);
                     Box region = middle(st->domain(), 0.8);
                     std::mt19937_64 rng(seed);
                     // causal relation sampled on a lattice of the support, with a margin
                     auto related = [&](const Point& x, int dir) {
                       for (int a = 0; a <= 4; ++a)
                         for (int b = 0; b <= 4; ++b)
                           for (int cc = 0; cc <= 4; ++cc)
                             for (int d = 0; d <= 4; ++d) {
                               std::array<int, 4> idx{a, b, cc, d};
                               Point y;
                               for (int i = 0; i < 4; ++i) y[i] = s.range[i][0] + idx[i] * s.width(i) / 4;
                               double r = std::hypot(x[1] - y[1], x[2] - y[2], x[3] - y[3]);
                               if (dir * (x[0] - y[0]) > r - 0.1) return true;
                             }
                       return false;
                     };
                     int outside = 0, violations = 0, inside = 0, nonzero = 0, tries = 0;
                     while (outside < 200 && ++tries < 200000) {
                       Point x = draw(region, rng);
                       if (!related(x, +1)) {
                         ++outside;
                         if (retarded_apply(*st, f, x).value != 0.0) ++violations;
                         if (!related(x, -1) && causal_propagator_apply(*st, f, x).value != 0.0) ++violations;
                       } else if (inside < 10 && in_causal_future(s, x)) {
                         try {
                           if (retarded_apply(*st, f, x).value != 0.0) ++nonzero;
                           ++inside;
                         } catch (const DomainError&) {
                         }
                       }
                     }
                     CovarianceReport r;
                     r.identity = "propagator_support";
                     r.spacetime = st->name();
                     r.point = ctr;
                     r.measured = r.abs_error = r.rel_error = violations;
                     r.pass = outside == 200 && violations == 0 && nonzero > 0;
                     r.extras = {{"exterior_points", static_cast<double>(outside)},
                                 {"interior_nonzero", static_cast<double>(nonzero)}};
                     return r;
                   }});
  }
  for (const auto& ce : c.cat.embeddings) {
    auto e = ce.e;
    if (!e->source().conformal_factor() || !e->target().conformal_factor()) continue;
    Point src = e->unmap(center(ce.probe_box));
    double k = std::min(1.0, 0.25 * min_width(e->preimage()) / 0.6);
    if (e->source().is_flat()) {
      out.push_back({"propagator", [e, src, k, ts] {
                       PropagatorOptions o;
                       o.abs_tol = 1e-6;
                       o.outer_nodes = 4;
                       auto f = bump_function(cell({src[0] + 0.05 * k, src[1] + 0.1 * k, src[2], src[3]}, 0.25 * k,
                                                   0.25 * k));
                       auto g = bump_function(cell({src[0] - 0.15 * k, src[1] - 0.1 * k, src[2] + 0.1 * k, src[3]},
                                                   0.25 * k, 0.25 * k));
                       f.weight = g.weight = 3.0;
                       double s = symplectic_form(e->source(), f, g, o);
                       double sp = symplectic_form(e->target(), weighted_pushforward(*e, 3.0, f),
                                                   weighted_pushforward(*e, 3.0, g), o);
                       CovarianceReport r;
                       r.identity = "symplectic_invariance";
                       r.spacetime = e->name();
                       r.point = src;
                       r.measured = sp;
                       r.predicted = s;
                       r.abs_error = std::abs(sp - s);
                       r.rel_error = r.abs_error / std::abs(s);
                       r.tolerance = 1e-3 * std::abs(s) * ts;
                       r.pass = s != 0.0 && r.abs_error <= r.tolerance;
                       return r;
                     }});
    }
    out.push_back({"propagator", [e, src, k, ts] {
                     auto f = bump_function(cell(src, 0.12 * k, 0.12 * k), 4);
                     std::array<Vec4<double>, 3> offs{
                         {{0.3, 0.1, 0.0, 0.0}, {-0.25, 0.0, 0.1, 0.05}, {0.05, 0.15, -0.1, 0.1}}};
                     double worst = 0.0, scale = 0.0;
                     for (const auto& d : offs) {
                       Point x;
                       for (int i = 0; i < 4; ++i) x[i] = src[i] + k * d[i];
                       auto t = transported_solution(*e, f, e->map(x));
                       worst = std::max(worst, std::abs(t.lhs - t.rhs) / std::abs(t.rhs));
                       scale = std::max(scale, std::abs(t.rhs));
                     }
                     CovarianceReport r;
                     r.identity = "transported_solution";
                     r.spacetime = e->name();
                     r.point = src;
                     r.measured = r.abs_error = r.rel_error = worst;
                     r.tolerance = 1e-3 * ts;
                     r.pass = scale > 0.0 && worst <= r.tolerance;
                     r.extras = {{"points", 3.0}};
                     return r;
                   }});
  }
}

// First pair e2 o e1 the catalog can compose.
std::pair<std::shared_ptr<const ConformalEmbedding>, std::shared_ptr<const ConformalEmbedding>> composable(
    const Catalog& cat) {
  for (const auto& a : cat.embeddings)
    for (const auto& b : cat.embeddings)
      if (a.e->target().name() == b.e->source().name() && b.e->preimage().contains(a.e->image()))
        return {a.e, b.e};
  return {};
}

std::vector<int> algebra_generators(TestFunctionTable& t, const ConformalEmbedding& e) {
  Box pre = e.preimage();
  Point c = center(pre);
  double w = min_width(pre);
  std::vector<int> ids;
  for (int k = 0; k < 5; ++k) {
    Point p{c[0] + w * (-0.125 + 0.0625 * k), c[1] + w * 0.05 * k, c[2] - w * 0.0375 * k, c[3] + w * 0.025};
    auto f = bump_function(cell(p, 0.25 * w, 0.25 * w), 4, 1.0 + k, e.source().name());
    f.weight = 3.0;
    ids.push_back(t.add(f));
  }
  return ids;
}

Word random_word(std::mt19937_64& rng, const std::vector<int>& ids, int n) {
  Word w;
  for (int k = 0; k < n; ++k) w.push_back(ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng)]);
  return w;
}

void algebra_suite(Context& c, std::vector<Case>& out) {
  double kappa = c.opt.kappa;
  auto [e1, e2] = composable(c.cat);
  std::uint64_t s1 = c.rng(), s2 = c.rng();
  out.push_back({"algebra", [s1, kappa] {
                   TestFunctionTable t;
                   std::vector<int> ids;
                   for (int k = 0; k < 5; ++k) {
                     auto f = bump_function(cell({0.1 * k, 0, 0, 0}, 0.2, 0.2), 4, 1.0, "oracle");
                     f.weight = 3.0;
                     ids.push_back(t.add(f));
                   }
                   std::mt19937 mrng(static_cast<std::uint32_t>(s1));
                   std::mt19937_64 rng(s1);
                   OscillatorModel model(static_cast<int>(t.size()), mrng);
                   auto E = model.pairing();
                   int bad = 0;
                   for (int n = 0; n < 100; ++n) {
                     auto w = AlgebraElement::word("oracle", random_word(rng, ids, 5), Coef(Rational(n + 1, 7), -1));
                     if (model.represent(w) != model.represent(normal_form(w, t, E))) ++bad;
                   }
                   auto r = exact_report("ccr_normal_form", "6-mode oscillator", bad, kappa);
                   r.extras = {{"words", 100.0}, {"letters", 5.0}};
                   return r;
                 }});
  if (e1) {
    auto a = e1, b = e2;
    out.push_back({"algebra", [a, b, s2, kappa] {
                     auto ba = compose(*b, *a);
                     TestFunctionTable t;
                     auto ids = algebra_generators(t, *a);
                     std::mt19937_64 rng(s2);
                     auto E = symbolic_pairing(s2);
                     int bad = 0;
                     for (int n = 0; n < 100; ++n) {
                       auto w = AlgebraElement::word(a->source().name(), random_word(rng, ids, 4), Coef(n, 1));
                       auto stepwise = apply_morphism(*b, apply_morphism(*a, w, t), t);
                       auto direct = apply_morphism(ba, w, t);
                       if (normal_form(stepwise, t, E) != normal_form(direct, t, E)) ++bad;
                     }
                     auto r = exact_report("functor_law", b->name() + "." + a->name(), bad, kappa);
                     r.extras = {{"words", 100.0}};
                     return r;
                   }});
  }
  for (const auto& ce : c.cat.embeddings) {
    auto e = ce.e;
    if (!e->source().conformal_factor() || !e->target().conformal_factor() || !e->source().is_flat()) continue;
    Point src = e->unmap(center(ce.probe_box));
    out.push_back({"algebra", [e, src, kappa] {
                     TestFunctionTable t;
                     double k = std::min(1.0, 0.25 * min_width(e->preimage()) / 0.6);
                     auto f = bump_function(cell({src[0] + 0.05 * k, src[1] + 0.1 * k, src[2], src[3]}, 0.25 * k,
                                                 0.25 * k),
                                            4, 1.0, e->source().name());
                     auto g = bump_function(cell({src[0] - 0.15 * k, src[1] - 0.1 * k, src[2] + 0.1 * k, src[3]},
                                                 0.25 * k, 0.25 * k),
                                            4, 1.0, e->source().name());
                     f.weight = g.weight = 3.0;
                     int fi = t.add(f), gi = t.add(g);
                     PropagatorOptions o;
                     o.abs_tol = 1e-6;
                     o.outer_nodes = 4;
                     NumericPairing E(e->source_ptr(), t, o), E2(e->target_ptr(), t, o);
                     auto w = AlgebraElement::word(e->source().name(), {gi, fi, gi});
                     auto before = apply_morphism(*e, normal_form(w, t, std::ref(E)), t);
                     auto after = normal_form(apply_morphism(*e, w, t), t, std::ref(E2));
                     double scale = std::abs(E.value(fi, gi));
                     CovarianceReport r;
                     r.identity = "commutator_transport";
                     r.spacetime = e->name();
                     r.point = src;
                     r.measured = r.abs_error = coefficient_distance(before, after);
                     r.rel_error = r.abs_error / scale;
                     r.tolerance = 1e-3 * scale;
                     r.kappa = kappa;
                     r.pass = scale > 0.0 && r.abs_error <= r.tolerance;
                     return r;
                   }});
    break;
  }
  out.push_back({"algebra", [kappa] {
                   int bad = 0;
                   for (int n = 0; n <= 8; ++n)
                     for (int m = 0; 2 * m <= n; ++m)
                       if (wick_expand(n).coeff.at(n - 2 * m) != pairing_count(n, m)) ++bad;
                   auto p4 = wick_expand(4), p6 = wick_expand(6);
                   if (p4.coeff.at(2) != 6 || p4.coeff.at(0) != 3) ++bad;
                   if (p6.coeff.at(0) != 15) ++bad;
                   auto r = exact_report("wick_coefficients", "-", bad, kappa);
                   r.extras = {{"n_max", 8.0}};
                   return r;
                 }});
  out.push_back({"algebra", [kappa] {
                   int bad = 0;
                   for (int n = 0; n <= 8; ++n) {
                     std::map<int, Integer> total;
                     for (const auto& [k, a] : wick_expand(n).coeff)
                       for (const auto& [j, b] : wick_inverse(k).coeff) total[j] += a * b;
                     for (const auto& [j, v] : total)
                       if (v != (j == n ? 1 : 0)) ++bad;
                   }
                   return exact_report("wick_inversion", "-", bad, kappa);
                 }});
  out.push_back({"algebra", [kappa] {
                   int bad = 0;
                   for (int n = 0; n <= 8; ++n) {
                     std::size_t rest = 0;
                     auto direct = reorder_prescription(n), composed = reorder_by_composition(n, &rest);
                     std::erase_if(direct.coeff, [](const auto& kv) { return kv.second == 0; });
                     if (rest != 0 || direct.coeff != composed.coeff) ++bad;
                   }
                   return exact_report("reorder_prescription", "-", bad, kappa);
                 }});
  out.push_back({"algebra", [kappa] {
                   int bad = 0;
                   double alpha = stated_alpha(kappa);
                   Expr R = Expr::parameter("R", 12.0);
                   auto f = renorm_apply(RenormShift{2, {{0, alpha * R}}}, 2);
                   if (f.terms.size() != 2 || !f.terms.at(2).is_one() || f.terms.at(0)(Point{}) != alpha * 12.0) ++bad;
                   for (int i : {-1, 1})
                     try {
                       renorm_apply(RenormShift{2, {{i, R}}}, 2);
                       ++bad;
                     } catch (const std::out_of_range&) {
                     }
                   if (!renorm_apply(RenormShift{4, {}}, 4).terms.at(4).is_one()) ++bad;
                   return exact_report("renorm_shift", "-", bad, kappa);
                 }});
}

using SuiteBuilder = void (*)(Context&, std::vector<Case>&);

const std::vector<std::pair<std::string, SuiteBuilder>>& builders() {
  static const std::vector<std::pair<std::string, SuiteBuilder>> b{
      {"geometry", geometry_suite}, {"worldfn", worldfn_suite},       {"hadamard", hadamard_suite},
      {"covariance", covariance_suite}, {"propagator", propagator_suite}, {"algebra", algebra_suite}};
  return b;
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (char ch : s) out += std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' ? ch : '_';
  return out;
}

nlohmann::ordered_json jnum(double v) {
  if (std::isfinite(v)) return v;
  return num(v);
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [k, b] : builders()) n.push_back(k);
    return n;
  }();
  return names;
}

std::vector<std::pair<std::string, std::string>> report_header(const RunConfig& cfg) {
  return {{"kappa", num(cfg.kappa)},
          {"mu", num(cfg.mu)},
          {"p", std::to_string(cfg.p)},
          {"seed", std::to_string(cfg.seed)},
          {"tol_scale", num(cfg.tol_scale)},
          {"suite", cfg.suite},
          {"signature", "-+++"},
          {"curvature", "R = +12 on unit de Sitter"},
          {"wave_operator", "P = -Box + R/6"},
          {"conformal_embedding", "psi_* g1 = Omega^-2 g2; pushforward Omega^-lambda (f o psi^-1)"},
          {"hadamard", "H = kappa/(8 pi^2) (u/sigma + (v0 + v1 sigma) log(sigma/mu^2)), u = 2 Delta^1/2"},
          {"world_function", "sigma > 0 for spacelike pairs"},
          {"alpha", "alpha = -kappa/(12 pi)^2"},
          {"B", "B(x,y) = kappa (R(x) + R(y)) / (2 (12 pi)^2)"}};
}

RunReport run_suite(const Catalog& cat, const RunConfig& cfg) {
  std::vector<std::string> selected;
  if (cfg.suite == "all") {
    selected = suite_names();
  } else {
    std::stringstream ss(cfg.suite);
    std::string name;
    while (std::getline(ss, name, ',')) {
      name = trim(name);
      bool known = false;
      for (const auto& n : suite_names()) known = known || n == name;
      if (!known) throw UsageError("unknown suite '" + name + "'");
      selected.push_back(name);
    }
  }
  RunReport rep;
  rep.config = cfg;
  {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", std::gmtime(&t));
    rep.run_id = std::string("run-") + buf;
  }
  CovOptions opt;
  opt.kappa = cfg.kappa;
  opt.mu = cfg.mu;
  opt.p = cfg.p;
  opt.tol_scale = cfg.tol_scale;

  std::vector<Case> cases;
  for (const auto& [name, build] : builders()) {
    if (std::find(selected.begin(), selected.end(), name) == selected.end()) continue;
    // each suite draws from its own stream so selections do not shift each other
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(std::hash<std::string>{}(name))};
    Context ctx{cat, cfg, opt, std::mt19937_64(seq)};
    build(ctx, cases);
  }
  rep.cases.resize(cases.size());
  std::vector<double> seconds(cases.size());
  int threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  parallel_for(cases.size(), threads, [&](std::size_t i) {
    auto t0 = std::chrono::steady_clock::now();
    CaseReport& cr = rep.cases[i];
    cr.suite = cases[i].suite;
    try {
      cr.report = cases[i].run();
    } catch (const std::exception& e) {
      cr.error = e.what();
      cr.report.pass = false;
    }
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  std::map<std::string, int> ids;
  for (auto& cr : rep.cases) cr.id = ids[cr.suite]++;
  for (const auto& name : selected) {
    double s = 0.0;
    for (std::size_t i = 0; i < cases.size(); ++i)
      if (rep.cases[i].suite == name) s += seconds[i];
    rep.suite_seconds.emplace_back(name, s);
  }
  rep.pass = std::all_of(rep.cases.begin(), rep.cases.end(), [](const CaseReport& c) { return c.passed(); });
  return rep;
}

std::string report_csv(const RunReport& rep) {
  std::ostringstream os;
  for (const auto& [k, v] : report_header(rep.config)) os << "# " << k << ": " << v << "\n";
  os << "suite,case,identity,spacetime,x0,x1,x2,x3,measured,predicted,abs_error,rel_error,tolerance,order,pass,error\n";
  for (const auto& c : rep.cases) {
    const auto& r = c.report;
    os << c.suite << "," << c.id << "," << csv_field(r.identity) << "," << csv_field(r.spacetime);
    for (double x : r.point) os << "," << num(x);
    os << "," << num(r.measured) << "," << num(r.predicted) << "," << num(r.abs_error) << "," << num(r.rel_error)
       << "," << num(r.tolerance) << "," << num(r.order) << "," << (c.passed() ? 1 : 0) << ","
       << csv_field(c.error) << "\n";
  }
  return os.str();
}

std::string report_json(const RunReport& rep) {
  nlohmann::ordered_json j;
  j["run_id"] = rep.run_id;
  nlohmann::ordered_json header;
  for (const auto& [k, v] : report_header(rep.config)) header[k] = v;
  j["header"] = header;
  j["config"] = {{"catalog", rep.config.catalog_path}, {"suite", rep.config.suite}, {"seed", rep.config.seed},
                 {"mu", rep.config.mu},                {"kappa", rep.config.kappa}, {"p", rep.config.p},
                 {"tol_scale", rep.config.tol_scale}};
  nlohmann::ordered_json secs;
  for (const auto& [k, v] : rep.suite_seconds) secs[k] = v;
  j["suite_seconds"] = secs;
  j["pass"] = rep.pass;
  auto& arr = j["reports"] = nlohmann::ordered_json::array();
  for (const auto& c : rep.cases) {
    const auto& r = c.report;
    nlohmann::ordered_json o;
    o["suite"] = c.suite;
    o["case"] = c.id;
    o["identity"] = r.identity;
    o["spacetime"] = r.spacetime;
    o["point"] = {r.point[0], r.point[1], r.point[2], r.point[3]};
    o["measured"] = jnum(r.measured);
    o["predicted"] = jnum(r.predicted);
    o["abs_error"] = jnum(r.abs_error);
    o["rel_error"] = jnum(r.rel_error);
    o["tolerance"] = jnum(r.tolerance);
    o["order"] = jnum(r.order);
    o["kappa"] = r.kappa;
    o["pass"] = c.passed();
    if (!c.error.empty()) o["error"] = c.error;
    nlohmann::ordered_json ex;
    for (const auto& [k, v] : r.extras) ex[k] = jnum(v);
    o["extras"] = ex;
    if (!r.s.empty()) {
      o["s"] = r.s;
      auto& smp = o["samples"] = nlohmann::ordered_json::array();
      for (double v : r.samples) smp.push_back(jnum(v));
    }
    arr.push_back(o);
  }
  return j.dump(2) + "\n";
}

void write_report(const RunReport& rep, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "plotdata");
  std::ofstream(fs::path(dir) / "report.json") << report_json(rep);
  std::ofstream(fs::path(dir) / "report.csv") << report_csv(rep);
  for (const auto& c : rep.cases) {
    const auto& r = c.report;
    if (r.s.empty() || r.s.size() != r.samples.size()) continue;
    char idx[16];
    std::snprintf(idx, sizeof idx, "%03d", c.id);
    std::ofstream out(fs::path(dir) / "plotdata" /
                      (c.suite + "_" + idx + "_" + safe_name(r.identity) + "_" + safe_name(r.spacetime) + ".csv"));
    out << "s,value\n";
    for (std::size_t k = 0; k < r.s.size(); ++k) out << num(r.s[k]) << "," << num(r.samples[k]) << "\n";
  }
}

}  // namespace chlab
