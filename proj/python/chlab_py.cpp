#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "chlab/harness.hpp"
#include "chlab/wickalg.hpp"

namespace py = pybind11;
using namespace chlab;

namespace {

std::map<int, std::string> coefficients(const PairingExpansion& e) {
  std::map<int, std::string> out;  // big integers travel as strings
  for (const auto& [k, c] : e.coeff) out[k] = c.str();
  return out;
}

}  // namespace

PYBIND11_MODULE(_chlab, m) {
  m.doc() = "conformal Hadamard covariance checks";

  py::register_exception<CatalogError>(m, "CatalogError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);

  py::class_<Catalog>(m, "Catalog")
      .def_static("load", &catalog_load, py::arg("path"))
      .def_static("parse", &catalog_parse, py::arg("text"), py::arg("origin") = "<string>")
      .def_readonly("origin", &Catalog::origin)
      .def_readonly("parameters", &Catalog::parameters)
      .def_property_readonly("spacetimes",
                             [](const Catalog& c) {
                               std::vector<std::string> n;
                               for (const auto& s : c.spacetimes) n.push_back(s.st->name());
                               return n;
                             })
      .def_property_readonly("embeddings", [](const Catalog& c) {
        std::vector<std::string> n;
        for (const auto& e : c.embeddings) n.push_back(e.e->name());
        return n;
      });

  m.def("suite_names", &suite_names);

  // Returns (csv, json) report texts.
  m.def(
      "run",
      [](const Catalog& cat, const std::string& suite, std::uint64_t seed, double kappa, double mu, double tol_scale,
         int threads) {
        RunConfig cfg;
        cfg.catalog_path = cat.origin;
        cfg.suite = suite;
        cfg.seed = seed;
        cfg.kappa = kappa;
        cfg.mu = mu;
        cfg.tol_scale = tol_scale;
        cfg.threads = threads;
        RunReport rep;
        {
          py::gil_scoped_release release;
          rep = run_suite(cat, cfg);
        }
        return std::make_pair(report_csv(rep), report_json(rep));
      },
      py::arg("catalog"), py::arg("suite") = "all", py::arg("seed") = 42, py::arg("kappa") = 0.5, py::arg("mu") = 1.0,
      py::arg("tol_scale") = 1.0, py::arg("threads") = 0);

  m.def("wick_expand", [](int n) { return coefficients(wick_expand(n)); }, py::arg("n"));
  m.def("wick_inverse", [](int n) { return coefficients(wick_inverse(n)); }, py::arg("n"));
  m.def("pairing_count", [](int n, int k) { return pairing_count(n, k).str(); }, py::arg("n"), py::arg("pairs"));
  m.def("stated_alpha", &stated_alpha, py::arg("kappa") = 0.5);
}
