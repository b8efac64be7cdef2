#pragma once

// Catalog loading, suite orchestration and report persistence.
//
// Catalog files are line based:
//   # comment
//   [parameters]           name = number, usable in later expressions
//   [spacetime]            name, domain, omega | g00..g33, patch_radius, probe_box
//   [embedding]            name, source, target, psi, psi_inv, omega, image_box, probe_box
// Boxes are [[t0, t1], [x0, x1], [y0, y1], [z0, z1]]; lists are [e0, e1, e2, e3].

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "chlab/covcheck.hpp"

namespace chlab {

class CatalogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CatalogSpacetime {
  std::shared_ptr<const Spacetime> st;
  Box probe_box;  // where suites draw base points
};

struct CatalogEmbedding {
  std::shared_ptr<const ConformalEmbedding> e;
  Box probe_box;  // in the image chart
};

struct Catalog {
  std::string origin;
  std::map<std::string, double> parameters;
  std::vector<CatalogSpacetime> spacetimes;
  std::vector<CatalogEmbedding> embeddings;

  const CatalogSpacetime& spacetime(const std::string& name) const;
  const CatalogEmbedding& embedding(const std::string& name) const;
};

Catalog catalog_parse(const std::string& text, const std::string& origin = "<catalog>");
Catalog catalog_load(const std::string& path);

struct RunConfig {
  std::string catalog_path;
  std::string suite = "all";
  std::uint64_t seed = 42;
  std::string out_dir;
  double mu = 1.0;
  double kappa = 0.5;
  double tol_scale = 1.0;
  int p = 1;
  int threads = 0;  // 0: hardware concurrency
};

struct CaseReport {
  std::string suite;
  int id = 0;  // position in the suite's case list
  CovarianceReport report;
  std::string error;  // set when the case threw
  bool passed() const { return error.empty() && report.pass; }
};

struct RunReport {
  std::string run_id;
  RunConfig config;
  std::vector<CaseReport> cases;
  std::vector<std::pair<std::string, double>> suite_seconds;
  bool pass = false;
};

const std::vector<std::string>& suite_names();

// Throws UsageError for an unknown suite name.
RunReport run_suite(const Catalog& catalog, const RunConfig& config);

// report.json, report.csv and plotdata/*.csv under dir.
void write_report(const RunReport& report, const std::string& dir);
std::string report_csv(const RunReport& report);
std::string report_json(const RunReport& report);

// The convention block written at the top of every report.
std::vector<std::pair<std::string, std::string>> report_header(const RunConfig& config);

}  // namespace chlab
