#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "satp/cli/cli.hpp"
#include "satp/data/dataset.hpp"
#include "satp/error.hpp"
#include "satp/eval/eval.hpp"
#include "satp/pipeline/checkpoint.hpp"
#include "satp/pipeline/config.hpp"
#include "satp/pipeline/pipeline.hpp"

namespace py = pybind11;
using namespace satp;

namespace {

std::vector<double> grid_or_default(const std::optional<std::vector<double>>& grid) {
  return grid ? *grid : default_grid();
}

py::dict sas_dict(const SasResult& r) {
  py::dict d;
  d["aucoc_random"] = r.aucoc_random;
  d["aucoc"] = r.aucoc_diag;
  d["aucoc_optimal"] = r.aucoc_optimal;
  d["sas"] = r.sas ? py::cast(*r.sas) : py::none();
  return d;
}

py::dict checkpoint_info(const std::string& path) {
  const Checkpoint c = load_checkpoint(path);
  py::dict d;
  d["stage"] = c.stage;
  d["seed"] = c.seed;
  d["epoch"] = c.epoch;
  d["config_digest"] = hex64(c.config_digest);
  d["metadata"] = c.metadata;
  d["parameters"] = c.params.count();
  d["digest"] = hex64(c.params.digest());
  py::dict shapes;
  for (const auto& [name, t] : c.params.parameters()) shapes[py::str(name)] = py::cast(t.shape());
  d["shapes"] = shapes;
  return d;
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = cli_dispatch(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Self-aware trajectory prediction core";

  auto base = py::register_exception<Error>(m, "SatpError", PyExc_RuntimeError);
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  m.def("default_grid", &default_grid);
  m.def(
      "cutoff_curve",
      [](const std::vector<double>& errors, const std::vector<double>& diagnostics,
         const std::optional<std::vector<double>>& grid) {
        const CutoffCurve c = cutoff_curve(errors, diagnostics, grid_or_default(grid));
        return py::make_tuple(c.fractions, c.remaining_mean);
      },
      py::arg("errors"), py::arg("diagnostics"), py::arg("grid") = py::none(),
      "Returns (fractions, remaining mean error).");
  m.def(
      "aucoc",
      [](const std::vector<double>& errors, const std::vector<double>& diagnostics,
         const std::optional<std::vector<double>>& grid) {
        return aucoc(cutoff_curve(errors, diagnostics, grid_or_default(grid)));
      },
      py::arg("errors"), py::arg("diagnostics"), py::arg("grid") = py::none());
  m.def(
      "sas",
      [](const std::vector<double>& errors, const std::vector<double>& diagnostics,
         const std::optional<std::vector<double>>& grid) {
        return sas_dict(sas_detail(errors, diagnostics, grid_or_default(grid)));
      },
      py::arg("errors"), py::arg("diagnostics"), py::arg("grid") = py::none());

  m.def("default_config", [] { return to_toml(TrainConfig{}); });
  m.def(
      "normalize_config", [](const std::string& text) { return to_toml(parse_config(text)); }, py::arg("toml"),
      "Parses a TOML configuration and prints the effective configuration.");
  m.def(
      "config_digest", [](const std::string& text) { return hex64(config_digest(parse_config(text))); },
      py::arg("toml"));
  m.def(
      "generate_csv",
      [](const std::string& text) {
        std::ostringstream s;
        write_csv(s, load_records(parse_config(text)));
        return s.str();
      },
      py::arg("toml"), "Synthetic corpus of the configuration as CSV text.");
  m.def("checkpoint_info", &checkpoint_info, py::arg("path"));
  m.def("run", &run_cli, py::arg("args"), "Runs a CLI subcommand; returns (exit code, stdout, stderr).");
  m.attr("methods") = kMethods;
}
