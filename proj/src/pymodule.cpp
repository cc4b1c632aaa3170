#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "osc/engine.hpp"
#include "osc/parser.hpp"
#include "osc/planner.hpp"
#include "osc/provenance.hpp"
#include "osc/typesystem.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace osc;

namespace {

py::object to_py(const nlohmann::ordered_json& doc) {
  return py::module_::import("json").attr("loads")(doc.dump());
}

struct Loaded {
  model::WorkflowModel model;
  types::TypeRegistry registry;
  types::Resolution resolution;
  std::vector<std::string> diagnostics;
};

// Heap-held because the resolution points back into the model.
std::unique_ptr<Loaded> load(const std::string& source, const std::string& file) {
  auto out = std::make_unique<Loaded>();
  out->model = parse::parse_workflow(source, file);
  std::vector<types::ResolveError> errors;
  out->registry = types::registry_for(out->model, errors);
  if (errors.empty()) {
    out->resolution = types::resolve_types(out->model, out->registry);
    errors = out->resolution.errors;
  }
  for (const auto& e : errors)
    out->diagnostics.push_back("error " + e.path + " " + model::to_string(e.span) + " " +
                               e.message);
  if (out->diagnostics.empty())
    for (const auto& d : types::validate(out->model, out->registry, out->resolution))
      out->diagnostics.push_back(types::render_diagnostic(d));
  return out;
}

void require_valid(const Loaded& loaded) {
  if (loaded.diagnostics.empty()) return;
  std::string joined;
  for (const auto& d : loaded.diagnostics) {
    if (!joined.empty()) joined += "\n";
    joined += d;
  }
  throw py::value_error(joined);
}

// A bind value is a list of strings (values), an int (repetitions), or a
// string naming a dataset directory.
std::map<std::string, plan::PortBinding> binds_of(const py::object& binds) {
  std::map<std::string, plan::PortBinding> out;
  if (binds.is_none()) return out;
  for (auto item : py::cast<py::dict>(binds)) {
    std::string path = py::cast<std::string>(item.first);
    auto dot = path.rfind('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 >= path.size())
      throw py::value_error("bind target '" + path + "' must name a flow port as flow.port");
    plan::PortBinding binding;
    binding.port = path.substr(dot + 1);
    py::handle value = item.second;
    if (py::isinstance<py::str>(value)) {
      binding.kind = plan::DatasetKind::Files;
      std::string dir = py::cast<std::string>(value);
      std::error_code ec;
      if (!fs::is_directory(dir, ec))
        throw py::value_error("dataset directory for " + path + " does not exist: " + dir);
      for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) binding.items.push_back(entry.path().string());
      std::sort(binding.items.begin(), binding.items.end());
      if (binding.items.empty())
        throw py::value_error("dataset directory for " + path + " is empty: " + dir);
    } else if (py::isinstance<py::int_>(value)) {
      binding.kind = plan::DatasetKind::Repetitions;
      auto n = py::cast<long>(value);
      if (n < 1) throw py::value_error("bind " + path + " needs a repetition count of at least 1");
      for (long i = 0; i < n; ++i) binding.items.push_back(std::to_string(i));
    } else if (py::isinstance<py::sequence>(value)) {
      binding.kind = plan::DatasetKind::Values;
      for (auto element : py::cast<py::sequence>(value))
        binding.items.push_back(py::cast<std::string>(element));
      if (binding.items.empty()) throw py::value_error("bind " + path + " has an empty value list");
    } else {
      throw py::value_error("bind " + path +
                            " must be a list of values, a repetition count, or a directory");
    }
    out[path] = std::move(binding);
  }
  return out;
}

void check_bind_targets(const types::Resolution& resolution,
                        const std::map<std::string, plan::PortBinding>& binds) {
  for (const auto& [path, binding] : binds) {
    std::string flow = path.substr(0, path.rfind('.'));
    const auto* element = resolution.find(flow);
    const auto* port = element ? element->find_interface(binding.port) : nullptr;
    if (!port || !port->has_type("Bifurcacao"))
      throw py::value_error("bind target " + path + " is not a Bifurcacao port");
  }
}

std::vector<std::string> py_validate(const std::string& source, const std::string& file) {
  return load(source, file)->diagnostics;
}

std::string py_canonical(const std::string& source, const std::string& file) {
  return parse::render_workflow(parse::parse_workflow(source, file));
}

py::object py_plan(const std::string& source, const std::string& file, const py::object& binds) {
  auto loaded = load(source, file);
  require_valid(*loaded);
  plan::PlanOptions options;
  options.binds = binds_of(binds);
  check_bind_targets(loaded->resolution, options.binds);
  return to_py(plan::to_json(plan::build_plan(loaded->model, loaded->resolution, options)));
}

py::object py_run(const std::string& source, const std::string& workdir, const std::string& file,
                  const std::string& adapter, int jobs, const std::string& faults,
                  const py::object& binds, bool retries_are_additional) {
  auto loaded = load(source, file);
  require_valid(*loaded);
  plan::PlanOptions options;
  options.binds = binds_of(binds);
  check_bind_targets(loaded->resolution, options.binds);
  auto p = plan::build_plan(loaded->model, loaded->resolution, options);

  if (adapter != "sim" && adapter != "shell")
    throw py::value_error("adapter must be sim or shell");
  std::error_code ec;
  fs::create_directories(workdir, ec);
  if (ec || !fs::is_directory(workdir))
    throw std::runtime_error("cannot create workdir " + workdir);

  run::RunConfig config;
  config.adapter = adapter == "shell" ? run::Adapter::Shell : run::Adapter::Simulated;
  config.jobs = jobs;
  config.workdir = workdir;
  config.fault_script = faults;
  config.retries_are_additional = retries_are_additional;

  nlohmann::ordered_json doc;
  {
    py::gil_scoped_release release;
    prov::Recorder recorder((fs::path(workdir) / "events.jsonl").string());
    auto report = run::run(p, config, &recorder);
    doc = run::to_json(p, report);
    std::ofstream out(fs::path(workdir) / "report.json", std::ios::binary | std::ios::trunc);
    out << doc.dump(2) << "\n";
  }
  return to_py(doc);
}

std::vector<std::string> py_known_versions(const std::string& events) {
  return prov::known_versions(events);
}

py::object py_export(const std::string& events, const std::string& version,
                     const py::object& granularity) {
  std::map<std::string, std::string> overrides;
  if (!granularity.is_none())
    for (auto item : py::cast<py::dict>(granularity))
      overrides[py::cast<std::string>(item.first)] = py::cast<std::string>(item.second);
  return to_py(prov::export_opm(events, version, overrides));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Toolchain for the OSC workflow description language";
  m.attr("__version__") = "0.1.0";

  py::register_exception<parse::ParseError>(m, "ParseError", PyExc_ValueError);

  m.def("validate", &py_validate, py::arg("source"), py::arg("file") = "<input>",
        "Parse and validate a workflow; returns diagnostic lines, empty when valid.");
  m.def("canonical", &py_canonical, py::arg("source"), py::arg("file") = "<input>",
        "Parse a workflow and render its canonical textual form.");
  m.def("plan", &py_plan, py::arg("source"), py::kw_only(), py::arg("file") = "<input>",
        py::arg("binds") = py::none(),
        "Build the execution plan of a valid workflow as a JSON-shaped dict.");
  m.def("run", &py_run, py::arg("source"), py::arg("workdir"), py::kw_only(),
        py::arg("file") = "<input>", py::arg("adapter") = "sim", py::arg("jobs") = 1,
        py::arg("faults") = "", py::arg("binds") = py::none(),
        py::arg("retries_are_additional") = false,
        "Execute a workflow; writes report.json and events.jsonl under workdir and returns "
        "the report as a dict.");
  m.def("known_versions", &py_known_versions, py::arg("events"),
        "Versions mentioned anywhere in a recorded run.");
  m.def("export_provenance", &py_export, py::arg("events"), py::arg("version"), py::kw_only(),
        py::arg("granularity") = py::none(),
        "Project a recorded run onto one version. `granularity` maps flow paths to "
        "'alta' or 'baixa' and overrides the recorded configuration.");
}
