#include <CLI11.hpp>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "osc/engine.hpp"
#include "osc/parser.hpp"
#include "osc/planner.hpp"
#include "osc/provenance.hpp"
#include "osc/typesystem.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRunFailed = 2;
constexpr int kUsage = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw UsageError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct LoadedModel {
  osc::model::WorkflowModel model;
  osc::types::TypeRegistry registry;
  osc::types::Resolution resolution;
};

// Parses and validates `file`. Diagnostics go to stderr; an invalid model
// yields nullptr. The result is heap-held because the resolution points back
// into the model.
std::unique_ptr<LoadedModel> load_model(const std::string& file) {
  std::string source = read_file(file);
  auto out = std::make_unique<LoadedModel>();
  try {
    out->model = osc::parse::parse_workflow(source, file);
  } catch (const osc::parse::ParseError& e) {
    std::cerr << e.what() << "\n";
    return nullptr;
  }
  std::vector<osc::types::ResolveError> errors;
  out->registry = osc::types::registry_for(out->model, errors);
  if (errors.empty()) {
    out->resolution = osc::types::resolve_types(out->model, out->registry);
    errors = out->resolution.errors;
  }
  if (!errors.empty()) {
    for (const auto& e : errors)
      std::cerr << "error " << e.path << " " << osc::model::to_string(e.span) << " " << e.message
                << "\n";
    return nullptr;
  }
  auto diagnostics = osc::types::validate(out->model, out->registry, out->resolution);
  for (const auto& d : diagnostics) std::cerr << osc::types::render_diagnostic(d) << "\n";
  if (!diagnostics.empty()) return nullptr;
  return out;
}

std::vector<std::string> split_commas(const std::string& list) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream in(list);
  while (std::getline(in, item, ',')) items.push_back(item);
  return items;
}

std::vector<std::string> list_dataset_dir(const std::string& dir, const std::string& target) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec))
    throw UsageError("dataset directory for " + target + " does not exist: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw UsageError("dataset directory for " + target + " is empty: " + dir);
  return files;
}

// One --bind argument: PATH=dir:D, PATH=vals:a,b,c, PATH=reps:N, or PATH=D
// as shorthand for a directory. PATH is the dotted port path.
std::map<std::string, osc::plan::PortBinding> parse_binds(const std::vector<std::string>& specs) {
  std::map<std::string, osc::plan::PortBinding> binds;
  for (const auto& spec : specs) {
    auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= spec.size())
      throw UsageError("--bind needs PATH=DATASET, got '" + spec + "'");
    std::string path = spec.substr(0, eq);
    std::string rhs = spec.substr(eq + 1);
    auto dot = path.rfind('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 >= path.size())
      throw UsageError("--bind target '" + path + "' must name a flow port as flow.port");
    osc::plan::PortBinding binding;
    binding.port = path.substr(dot + 1);
    if (rhs.rfind("vals:", 0) == 0) {
      binding.kind = osc::plan::DatasetKind::Values;
      binding.items = split_commas(rhs.substr(5));
      if (binding.items.empty()) throw UsageError("--bind " + path + " has an empty value list");
    } else if (rhs.rfind("reps:", 0) == 0) {
      binding.kind = osc::plan::DatasetKind::Repetitions;
      std::string count = rhs.substr(5);
      int n = 0;
      auto [end, err] = std::from_chars(count.data(), count.data() + count.size(), n);
      if (err != std::errc{} || end != count.data() + count.size() || n < 1)
        throw UsageError("--bind " + path + " needs a repetition count of at least 1");
      for (int i = 0; i < n; ++i) binding.items.push_back(std::to_string(i));
    } else {
      binding.kind = osc::plan::DatasetKind::Files;
      std::string dir = rhs.rfind("dir:", 0) == 0 ? rhs.substr(4) : rhs;
      binding.items = list_dataset_dir(dir, path);
    }
    binds[path] = std::move(binding);
  }
  return binds;
}

void check_bind_targets(const osc::types::Resolution& resolution,
                        const std::map<std::string, osc::plan::PortBinding>& binds) {
  for (const auto& [path, binding] : binds) {
    std::string flow = path.substr(0, path.rfind('.'));
    const auto* element = resolution.find(flow);
    const auto* port = element ? element->find_interface(binding.port) : nullptr;
    if (!port || !port->has_type("Bifurcacao"))
      throw UsageError("--bind target " + path + " is not a Bifurcacao port");
  }
}

int cmd_validate(const std::string& file) {
  return load_model(file) ? kOk : kInvalid;
}

int cmd_plan(const std::string& file, const std::vector<std::string>& bind_specs) {
  auto loaded = load_model(file);
  if (!loaded) return kInvalid;
  osc::plan::PlanOptions options;
  options.binds = parse_binds(bind_specs);
  check_bind_targets(loaded->resolution, options.binds);
  osc::plan::ExecutionPlan plan;
  try {
    plan = osc::plan::build_plan(loaded->model, loaded->resolution, options);
  } catch (const std::runtime_error& e) {
    std::cerr << e.what() << "\n";
    return kInvalid;
  }
  std::cout << osc::plan::to_json(plan).dump(2) << "\n";
  return kOk;
}

struct RunFlags {
  std::string adapter = "sim";
  int jobs = 1;
  std::string faults;
  std::string workdir;
  std::vector<std::string> bind_specs;
  bool retries_are_additional = false;
};

int cmd_run(const std::string& file, const RunFlags& flags) {
  auto loaded = load_model(file);
  if (!loaded) return kInvalid;
  osc::plan::PlanOptions options;
  options.binds = parse_binds(flags.bind_specs);
  check_bind_targets(loaded->resolution, options.binds);
  osc::plan::ExecutionPlan plan;
  try {
    plan = osc::plan::build_plan(loaded->model, loaded->resolution, options);
  } catch (const std::runtime_error& e) {
    std::cerr << e.what() << "\n";
    return kInvalid;
  }

  std::error_code ec;
  fs::create_directories(flags.workdir, ec);
  if (ec || !fs::is_directory(flags.workdir))
    throw UsageError("cannot create workdir " + flags.workdir);

  osc::run::RunConfig config;
  config.adapter =
      flags.adapter == "shell" ? osc::run::Adapter::Shell : osc::run::Adapter::Simulated;
  config.jobs = flags.jobs;
  config.workdir = flags.workdir;
  config.fault_script = flags.faults;
  config.retries_are_additional = flags.retries_are_additional;

  try {
    osc::prov::Recorder recorder((fs::path(flags.workdir) / "events.jsonl").string());
    auto report = osc::run::run(plan, config, &recorder);
    auto doc = osc::run::to_json(plan, report);
    auto report_path = fs::path(flags.workdir) / "report.json";
    std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
    if (!out.good()) throw UsageError("cannot write " + report_path.string());
    out << doc.dump(2) << "\n";
    std::cout << doc.dump(2) << "\n";
    return report.success ? kOk : kRunFailed;
  } catch (const std::runtime_error& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  }
}

int cmd_prov(const std::string& events, const std::string& version) {
  fs::path path = events;
  std::error_code ec;
  if (fs::is_directory(path, ec)) path /= "events.jsonl";
  try {
    std::cout << osc::prov::export_opm(path.string(), version).dump(2) << "\n";
    return kOk;
  } catch (const std::runtime_error& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OSC workflow toolchain"};
  app.require_subcommand(1);

  std::string validate_file;
  auto* validate = app.add_subcommand("validate", "Check a workflow description");
  validate->add_option("file", validate_file, "workflow file")->required();

  std::string plan_file;
  std::vector<std::string> plan_binds;
  auto* plan = app.add_subcommand("plan", "Print the execution plan as JSON");
  plan->add_option("file", plan_file, "workflow file")->required();
  plan->add_option("--bind", plan_binds, "dataset override, PATH=dir:D|vals:a,b|reps:N");

  std::string run_file;
  RunFlags flags;
  auto* run = app.add_subcommand("run", "Execute a workflow and print the report");
  run->add_option("file", run_file, "workflow file")->required();
  run->add_option("--adapter", flags.adapter, "execution adapter")
      ->check(CLI::IsMember({"sim", "shell"}));
  run->add_option("--jobs", flags.jobs, "worker threads");
  run->add_option("--faults", flags.faults, "fault script, simulated adapter only");
  run->add_option("--workdir", flags.workdir, "run directory")
      ->envname("OSC_WORKDIR")
      ->required();
  run->add_option("--bind", flags.bind_specs, "dataset override, PATH=dir:D|vals:a,b|reps:N");
  run->add_flag("--retries-are-additional", flags.retries_are_additional,
                "count num_tentativas on top of the first attempt");

  std::string prov_events;
  std::string prov_version;
  auto* prov = app.add_subcommand("prov", "Export the provenance graph of one version");
  prov->add_option("events", prov_events, "run workdir or event log")
      ->envname("OSC_WORKDIR")
      ->required();
  prov->add_option("--version", prov_version, "version to export")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(validate_file);
    if (plan->parsed()) return cmd_plan(plan_file, plan_binds);
    if (run->parsed()) return cmd_run(run_file, flags);
    if (prov->parsed()) return cmd_prov(prov_events, prov_version);
  } catch (const UsageError& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
