// chlab: run check suites over a catalog, probe limits at a point, expand Wick powers.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "chlab/harness.hpp"
#include "chlab/wickalg.hpp"

using namespace chlab;

namespace {

Point parse_point(const std::string& s) {
  Point p{};
  std::stringstream ss(s);
  std::string item;
  int d = 0;
  while (std::getline(ss, item, ',')) {
    if (d == 4) throw UsageError("--point takes 4 comma separated numbers");
    std::size_t used = 0;
    try {
      p[d] = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0) throw UsageError("bad coordinate '" + item + "'");
    ++d;
  }
  if (d != 4) throw UsageError("--point takes 4 comma separated numbers");
  return p;
}

void print(const CovarianceReport& r) {
  std::printf("%-24s %-12s measured %.10g predicted %.10g abs %.3g tol %.3g order %.3g %s\n", r.identity.c_str(),
              r.spacetime.c_str(), r.measured, r.predicted, r.abs_error, r.tolerance, r.order,
              r.pass ? "PASS" : "FAIL");
  for (const auto& [k, v] : r.extras) std::printf("    %-30s %.10g\n", k.c_str(), v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conformal Hadamard covariance checks"};
  app.require_subcommand(1);

  RunConfig cfg;
  cfg.catalog_path = "catalog/default.cat";
  cfg.out_dir = "chlab_out";
  auto* run = app.add_subcommand("run", "run check suites and write reports");
  run->add_option("--catalog", cfg.catalog_path, "catalog file");
  run->add_option("--suite", cfg.suite, "suite name, comma list, or all");
  run->add_option("--seed", cfg.seed, "random seed");
  run->add_option("--out", cfg.out_dir, "output directory");
  run->add_option("--mu", cfg.mu, "Hadamard scale");
  run->add_option("--kappa", cfg.kappa, "two-point normalization");
  run->add_option("--p", cfg.p, "order of the v expansion")->check(CLI::Range(0, 1));
  run->add_option("--tol-scale", cfg.tol_scale, "multiplies every tolerance");
  run->add_option("--threads", cfg.threads, "worker threads, 0 for all cores");

  std::string catalog = "catalog/default.cat", embedding, point;
  double kappa = 0.5, mu = 1.0;
  auto* limits = app.add_subcommand("limits", "coincidence limits of the covariance identities at a point");
  limits->add_option("--catalog", catalog, "catalog file");
  limits->add_option("--embedding", embedding, "embedding name")->required();
  limits->add_option("--point", point, "t,x,y,z in the image chart")->required();
  limits->add_option("--kappa", kappa, "two-point normalization");
  limits->add_option("--mu", mu, "Hadamard scale");

  int n = 4;
  auto* expand = app.add_subcommand("expand", "Wick expansion of phi^n");
  expand->add_option("--n", n, "power")->check(CLI::Range(0, 12));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      Catalog cat = catalog_load(cfg.catalog_path);
      RunReport rep = run_suite(cat, cfg);
      write_report(rep, cfg.out_dir);
      int failed = 0;
      for (const auto& c : rep.cases) {
        if (c.passed()) continue;
        ++failed;
        std::printf("FAIL %s/%d %s %s%s%s\n", c.suite.c_str(), c.id, c.report.identity.c_str(),
                    c.report.spacetime.c_str(), c.error.empty() ? "" : ": ", c.error.c_str());
      }
      std::printf("%zu cases, %d failed; reports in %s\n", rep.cases.size(), failed, cfg.out_dir.c_str());
      return rep.pass ? 0 : 1;
    }
    if (*limits) {
      Catalog cat = catalog_load(catalog);
      const auto& ce = cat.embedding(embedding);
      LimitProbe probe;
      probe.x = parse_point(point);
      if (!ce.e->image().contains(probe.x)) throw UsageError("point lies outside the image of " + embedding);
      probe.w = {0.0, 1.0, 0.0, 0.0};
      CovOptions opt;
      opt.kappa = kappa;
      opt.mu = mu;
      print(hadamard_difference_limit(*ce.e, probe, opt));
      print(phi2_covariance(*ce.e, stated_alpha(kappa), probe, opt));
      print(phi2_covariance(*ce.e, -stated_alpha(kappa), probe, opt));
      print(wick_kernel_covariance(*ce.e, probe, opt));
      return 0;
    }
    if (*expand) {
      std::printf("phi^%d = %s\n", n, wick_expand(n).str().c_str());
      std::printf(":phi^%d: = %s\n", n, wick_inverse(n).str("H", false).c_str());
      std::printf(":phi^%d:_H - :phi^%d:_{H+B} = %s\n", n, n, reorder_prescription(n).str("B").c_str());
      return 0;
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const CatalogError& e) {
    std::fprintf(stderr, "catalog error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
