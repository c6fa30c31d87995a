// Python bindings for the core operations: panel fitting, pair
// optimization, grid handling, intervals, and the Monte Carlo estimators.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "exoci/grid.hpp"
#include "exoci/kg.hpp"
#include "exoci/math.hpp"
#include "exoci/mc.hpp"
#include "exoci/panel.hpp"
#include "exoci/rng.hpp"

namespace py = pybind11;
using namespace exoci;

PYBIND11_MODULE(_exoci, m) {
  m.doc() = "Slope confidence intervals for random-intercept panels with "
            "uncertain exogeneity";

  py::register_exception<Error>(m, "ExociError");

  py::class_<PanelData>(m, "PanelData")
      .def(py::init<>())
      .def_readwrite("unit_ids", &PanelData::unit_ids)
      .def_readwrite("times", &PanelData::times)
      .def_readwrite("x", &PanelData::x)
      .def_readwrite("y", &PanelData::y)
      .def_property_readonly("n_units", &PanelData::n_units)
      .def_property_readonly("n_times", &PanelData::n_times)
      .def("validate", &PanelData::validate);

  m.def("load_panel_file",
        [](const std::string& path) { return load_panel_file(path); },
        py::arg("path"));
  m.def("load_panel_csv",
        [](const std::string& text) {
          std::istringstream in(text);
          return load_panel(in);
        },
        py::arg("text"));

  py::class_<DesignSummary>(m, "DesignSummary")
      .def_readonly("N", &DesignSummary::N)
      .def_readonly("T", &DesignSummary::T)
      .def_readonly("ssw", &DesignSummary::ssw)
      .def_readonly("ssb", &DesignSummary::ssb)
      .def_readonly("r", &DesignSummary::r)
      .def_readonly("xbar_i", &DesignSummary::xbar_i)
      .def_readonly("xbar", &DesignSummary::xbar);
  m.def("design_summary", &design_summary, py::arg("panel"));

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("a_hat", &FitResult::a_hat)
      .def_readonly("bw_hat", &FitResult::bw_hat)
      .def_readonly("bb_hat", &FitResult::bb_hat)
      .def_readonly("sigma_eps2_hat", &FitResult::sigma_eps2_hat)
      .def_readonly("sigma_eta2_hat", &FitResult::sigma_eta2_hat)
      .def_readonly("delta_hat", &FitResult::delta_hat)
      .def_readonly("h_hat", &FitResult::h_hat);
  m.def("estimate_variance_components",
        py::overload_cast<const PanelData&>(&estimate_variance_components),
        py::arg("panel"));

  m.def("hausman_stat",
        py::overload_cast<const PanelData&, double, double>(&hausman_stat),
        py::arg("panel"), py::arg("sigma_eps"), py::arg("delta"));
  m.def("rho_of_delta", &rho_of_delta, py::arg("r"), py::arg("delta"),
        py::arg("T"));
  m.def("delta_of_rho", &delta_of_rho, py::arg("r"), py::arg("rho"),
        py::arg("T"));
  m.def("fixed_effects_interval",
        [](const PanelData& p, double sigma_eps, double c) {
          const Interval iv = fixed_effects_interval(p, sigma_eps, c);
          return py::make_tuple(iv.lower, iv.upper);
        },
        py::arg("panel"), py::arg("sigma_eps"), py::arg("c"));

  py::class_<KnotFunctionPair>(m, "KnotFunctionPair")
      .def_property_readonly("alpha", &KnotFunctionPair::alpha)
      .def_property_readonly("d", &KnotFunctionPair::d)
      .def_property_readonly("z", &KnotFunctionPair::z)
      .def_property_readonly("odd_knots", &KnotFunctionPair::odd_knots)
      .def_property_readonly("even_knots", &KnotFunctionPair::even_knots)
      .def("eval_odd", &KnotFunctionPair::eval_odd, py::arg("x"))
      .def("eval_even", &KnotFunctionPair::eval_even, py::arg("x"))
      .def("is_standard", &KnotFunctionPair::is_standard);
  m.def("make_pair", &make_pair, py::arg("odd_knots"), py::arg("even_knots"),
        py::arg("alpha"), py::arg("d") = 6.0);
  m.def("standard_pair", &standard_pair, py::arg("alpha"), py::arg("d") = 6.0);

  py::class_<QuadSpec>(m, "QuadSpec")
      .def(py::init<>())
      .def_readwrite("cells", &QuadSpec::cells)
      .def_readwrite("points", &QuadSpec::points);
  py::class_<KGContext>(m, "KGContext")
      .def_static("make", &KGContext::make, py::arg("rho"), py::arg("alpha"),
                  py::arg("d") = 6.0, py::arg("quad") = QuadSpec{})
      .def_readonly("rho", &KGContext::rho)
      .def_readonly("alpha", &KGContext::alpha)
      .def_readonly("d", &KGContext::d);
  m.def("coverage_probability", &coverage_probability, py::arg("ctx"),
        py::arg("pair"), py::arg("psi"));
  m.def("scaled_expected_length", &scaled_expected_length, py::arg("ctx"),
        py::arg("pair"), py::arg("psi"));
  m.def("objective", &objective, py::arg("ctx"), py::arg("pair"),
        py::arg("phi"));

  py::class_<OptimizedPair>(m, "OptimizedPair")
      .def_readonly("pair", &OptimizedPair::pair)
      .def_readonly("phi", &OptimizedPair::phi)
      .def_readonly("gain", &OptimizedPair::gain)
      .def_readonly("loss", &OptimizedPair::loss)
      .def_readonly("min_cp", &OptimizedPair::min_cp)
      .def_readonly("max_sel", &OptimizedPair::max_sel)
      .def_readonly("sel_at_zero", &OptimizedPair::sel_at_zero)
      .def_readonly("converged", &OptimizedPair::converged)
      .def_readonly("constraint_violation", &OptimizedPair::constraint_violation);
  m.def("optimize_pair", &optimize_pair, py::arg("ctx"), py::arg("phi"),
        py::call_guard<py::gil_scoped_release>());
  m.def("select_phi", &select_phi, py::arg("ctx"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<GridEntry>(m, "GridEntry")
      .def_readonly("rho", &GridEntry::rho)
      .def_readonly("delta", &GridEntry::delta)
      .def_readonly("phi_star", &GridEntry::phi_star)
      .def_readonly("opt", &GridEntry::opt);
  py::class_<FunctionGrid>(m, "FunctionGrid")
      .def_readonly("N", &FunctionGrid::N)
      .def_readonly("T", &FunctionGrid::T)
      .def_readonly("ssw", &FunctionGrid::ssw)
      .def_readonly("ssb", &FunctionGrid::ssb)
      .def_readonly("r", &FunctionGrid::r)
      .def_readonly("alpha", &FunctionGrid::alpha)
      .def_readonly("d", &FunctionGrid::d)
      .def_readonly("entries", &FunctionGrid::entries);
  m.def("build_grid", &build_grid, py::arg("design_summary"), py::arg("alpha"),
        py::arg("threads") = 0, py::call_guard<py::gil_scoped_release>());
  m.def("interpolate_pair", &interpolate_pair, py::arg("grid"),
        py::arg("delta"));
  m.def("save_grid_file", &save_grid_file, py::arg("path"), py::arg("grid"));
  m.def("load_grid_file", &load_grid_file, py::arg("path"));
  m.def("grid_to_text", [](const FunctionGrid& g) {
    std::ostringstream out;
    save_grid(out, g);
    return out.str();
  });
  m.def("grid_from_text", [](const std::string& text) {
    std::istringstream in(text);
    return load_grid(in);
  });

  py::class_<CIResult>(m, "CIResult")
      .def_readonly("lower", &CIResult::lower)
      .def_readonly("upper", &CIResult::upper)
      .def_readonly("center_shift", &CIResult::center_shift)
      .def_readonly("half_width", &CIResult::half_width)
      .def_readonly("h_used", &CIResult::h_used)
      .def_readonly("sigma_used", &CIResult::sigma_used)
      .def_readonly("delta_used", &CIResult::delta_used)
      .def_readonly("reverted", &CIResult::reverted);
  m.def("known_ci",
        py::overload_cast<const PanelData&, double, double, const FunctionGrid&>(
            &known_ci),
        py::arg("panel"), py::arg("sigma_eps"), py::arg("delta"),
        py::arg("grid"));
  m.def("plugin_ci", &plugin_ci, py::arg("panel"), py::arg("grid"));

  py::enum_<SimKind>(m, "SimKind")
      .value("coverage", SimKind::coverage)
      .value("sel", SimKind::sel)
      .value("conf_coeff", SimKind::conf_coeff);
  py::class_<SimEstimate>(m, "SimEstimate")
      .def_readonly("value", &SimEstimate::value)
      .def_readonly("std_error", &SimEstimate::std_error)
      .def_readonly("M", &SimEstimate::M)
      .def_readonly("seed", &SimEstimate::seed)
      .def_readonly("kind", &SimEstimate::kind)
      .def_readonly("redraws", &SimEstimate::redraws);
  py::class_<RunStats>(m, "RunStats")
      .def_readonly("h_hat", &RunStats::h_hat)
      .def_readonly("gL_hat", &RunStats::gL_hat)
      .def_readonly("sigma_ratio", &RunStats::sigma_ratio)
      .def_readonly("delta_hat", &RunStats::delta_hat)
      .def_readonly("bw_hat", &RunStats::bw_hat)
      .def_readonly("bb_hat", &RunStats::bb_hat);

  m.def("simulate_run",
        [](const PanelData& design, double gamma, double delta,
           std::uint64_t seed, std::uint64_t replication) {
          NormalStream stream(seed, StreamPurpose::generic, replication);
          return simulate_run(design, gamma, delta, stream);
        },
        py::arg("design"), py::arg("gamma"), py::arg("delta"), py::arg("seed"),
        py::arg("replication") = 0);

  m.def("estimate_cp",
        [](const PanelData& design, const FunctionGrid& grid, double gamma,
           double delta, std::uint64_t M, std::uint64_t seed, int threads) {
          SimConfig cfg;
          cfg.design = design;
          cfg.grid = grid;
          cfg.gamma = gamma;
          cfg.delta = delta;
          cfg.M = M;
          cfg.master_seed = seed;
          cfg.threads = threads;
          return estimate_cp(cfg);
        },
        py::arg("design"), py::arg("grid"), py::arg("gamma"), py::arg("delta"),
        py::arg("M"), py::arg("seed") = 0, py::arg("threads") = 0,
        py::call_guard<py::gil_scoped_release>());

  m.def("estimate_sel",
        [](const PanelData& design, const FunctionGrid& grid, double gamma,
           double delta, std::uint64_t M, double c_min, std::uint64_t seed,
           int threads) {
          SimConfig cfg;
          cfg.design = design;
          cfg.grid = grid;
          cfg.gamma = gamma;
          cfg.delta = delta;
          cfg.M = M;
          cfg.master_seed = seed;
          cfg.threads = threads;
          return estimate_sel(cfg, c_min);
        },
        py::arg("design"), py::arg("grid"), py::arg("gamma"), py::arg("delta"),
        py::arg("M"), py::arg("c_min"), py::arg("seed") = 0,
        py::arg("threads") = 0, py::call_guard<py::gil_scoped_release>());

  py::class_<ConfidenceCoefficient>(m, "ConfidenceCoefficient")
      .def_readonly("c_min", &ConfidenceCoefficient::c_min)
      .def_readonly("gamma_star", &ConfidenceCoefficient::gamma_star)
      .def_readonly("delta_star", &ConfidenceCoefficient::delta_star);
  m.def("estimate_confidence_coefficient", &estimate_confidence_coefficient,
        py::arg("design"), py::arg("grid"), py::arg("gamma_grid"),
        py::arg("delta_grid"), py::arg("M1"), py::arg("M2"), py::arg("M3"),
        py::arg("master_seed"), py::arg("threads") = 0,
        py::call_guard<py::gil_scoped_release>());

  m.def("derive_seed", &derive_seed, py::arg("master"), py::arg("w0"),
        py::arg("w1") = 0, py::arg("w2") = 0);
  m.def("double_bits", &double_bits, py::arg("value"));
  m.def("two_sided_z", &two_sided_z, py::arg("c"));
  m.def("normal_quantile", &normal_quantile, py::arg("p"));
}
