// Acceptance suite: ten end-to-end criteria, one pass/fail line each.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "osc/engine.hpp"
#include "osc/parser.hpp"
#include "osc/planner.hpp"
#include "osc/provenance.hpp"
#include "osc/typesystem.hpp"

using namespace osc;
namespace fs = std::filesystem;

namespace {

void expect(bool ok, const std::string& message) {
  if (!ok) throw std::runtime_error(message);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  expect(in.good(), "cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string fixture(const std::string& rel) {
  return read_file(std::string(OSC_FIXTURE_DIR) + "/" + rel);
}

// Unique scratch directory, removed on destruction.
struct Scratch {
  fs::path dir;

  Scratch() {
    static int counter = 0;
    dir = fs::temp_directory_path() /
          ("osc_acceptance_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }

  std::string workdir() const { return (dir / "work").string(); }

  std::string file(const std::string& name, const std::string& content) const {
    fs::path path = dir / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path.string();
  }

  std::string faults(const nlohmann::json& script) const {
    return file("faults.json", script.dump());
  }
};

struct Loaded {
  model::WorkflowModel model;
  types::TypeRegistry registry;
  types::Resolution resolution;
};

// Heap-held because the resolution points back into the model.
std::unique_ptr<Loaded> load(const std::string& source, const std::string& name) {
  auto out = std::make_unique<Loaded>();
  out->model = parse::parse_workflow(source, name);
  std::vector<types::ResolveError> errors;
  out->registry = types::registry_for(out->model, errors);
  expect(errors.empty(), name + " has type registry errors");
  out->resolution = types::resolve_types(out->model, out->registry);
  expect(out->resolution.ok(), name + " has resolve errors");
  return out;
}

std::vector<types::Diagnostic> diagnostics_of(const std::string& source, const std::string& name) {
  auto loaded = load(source, name);
  return types::validate(loaded->model, loaded->registry, loaded->resolution);
}

plan::ExecutionPlan plan_of(const std::string& source, const std::string& name,
                            const plan::PlanOptions& options = {}) {
  auto loaded = load(source, name);
  auto diagnostics = types::validate(loaded->model, loaded->registry, loaded->resolution);
  expect(diagnostics.empty(),
         name + " failed validation: " +
             (diagnostics.empty() ? "" : types::render_diagnostic(diagnostics.front())));
  return plan::build_plan(loaded->model, loaded->resolution, options);
}

run::RunConfig config_for(run::Adapter adapter, const std::string& workdir, int jobs = 1,
                          const std::string& faults = "") {
  run::RunConfig config;
  config.adapter = adapter;
  config.workdir = workdir;
  config.jobs = jobs;
  config.fault_script = faults;
  return config;
}

const run::NodeResult& node_of(const run::RunReport& report, const std::string& id) {
  for (const auto& node : report.nodes)
    if (node.id == id) return node;
  throw std::runtime_error("no node " + id + " in report");
}

// Comparable form of a report: logical times and worker count zeroed, workdir
// prefix stripped from artifact paths.
nlohmann::ordered_json normalize(const plan::ExecutionPlan& plan, const run::RunReport& report,
                                 const std::string& workdir) {
  auto doc = run::to_json(plan, report);
  doc["jobs"] = 0;
  for (auto& node : doc["nodes"]) {
    node["start"] = 0;
    node["end"] = 0;
    if (node.contains("outputs"))
      for (auto& [slot, value] : node["outputs"].items()) {
        std::string path = value.get<std::string>();
        if (path.rfind(workdir, 0) == 0) value = path.substr(workdir.size());
      }
  }
  return doc;
}

// Downstream dataflow digraph of an exported graph: process -> artifact for
// wasGeneratedBy, artifact -> process for used.
std::map<std::string, std::vector<std::string>> dataflow_of(const nlohmann::ordered_json& doc) {
  std::map<std::string, std::vector<std::string>> next;
  for (const auto& edge : doc["edges"]) {
    std::string kind = edge["kind"];
    if (kind == "wasGeneratedBy")
      next[edge["to"].get<std::string>()].push_back(edge["from"].get<std::string>());
    else if (kind == "used")
      next[edge["to"].get<std::string>()].push_back(edge["from"].get<std::string>());
  }
  return next;
}

bool reaches(const nlohmann::ordered_json& doc, const std::string& from, const std::string& to) {
  auto next = dataflow_of(doc);
  std::set<std::string> seen{from};
  std::vector<std::string> queue{from};
  while (!queue.empty()) {
    auto id = queue.back();
    queue.pop_back();
    if (id == to) return true;
    for (const auto& succ : next[id])
      if (seen.insert(succ).second) queue.push_back(succ);
  }
  return false;
}

bool dataflow_acyclic(const nlohmann::ordered_json& doc) {
  auto next = dataflow_of(doc);
  std::map<std::string, int> state;  // 0 new, 1 on stack, 2 done
  std::function<bool(const std::string&)> visit = [&](const std::string& id) {
    if (state[id] == 1) return false;
    if (state[id] == 2) return true;
    state[id] = 1;
    for (const auto& succ : next[id])
      if (!visit(succ)) return false;
    state[id] = 2;
    return true;
  };
  for (const auto& [id, _] : next)
    if (!visit(id)) return false;
  return true;
}

std::set<std::string> process_ids(const nlohmann::ordered_json& doc) {
  std::set<std::string> ids;
  for (const auto& p : doc["processes"]) ids.insert(p["id"].get<std::string>());
  return ids;
}

std::set<std::string> artifact_ids(const nlohmann::ordered_json& doc) {
  std::set<std::string> ids;
  for (const auto& a : doc["artifacts"]) ids.insert(a["id"].get<std::string>());
  return ids;
}

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
  auto at = text.find(from);
  expect(at != std::string::npos, "missing '" + from + "' in template");
  return text.replace(at, from.size(), to);
}

// --- criteria ---------------------------------------------------------------

// ProFrager fragment scenario: psipred fails every attempt, is ignored after
// three tries, and the propagation connector delivers the fallback data; both
// tagged versions keep the psipred process.
void criterion_profrager() {
  auto source = fixture("acceptance/profrager.osc");
  auto plan = plan_of(source, "profrager.osc");
  Scratch scratch;
  auto faults = scratch.faults({{"psipred", nlohmann::json::object()}});

  auto started = std::chrono::steady_clock::now();
  prov::Recorder recorder((scratch.dir / "events.jsonl").string());
  auto report = run::run(
      plan, config_for(run::Adapter::Simulated, scratch.workdir(), 1, faults), &recorder);

  expect(report.success, "run did not succeed");
  const auto& psipred = node_of(report, "psipred#0");
  expect(psipred.status == run::NodeStatus::Ignored, "psipred is not ignored");
  expect(psipred.attempts.size() == 3,
         "psipred made " + std::to_string(psipred.attempts.size()) + " attempts, wanted 3");
  const auto& fallback = node_of(report, "cpPsipredFile#0");
  const auto& if3 = node_of(report, "if3#0");
  expect(if3.outputs.at("entrega") == fallback.outputs.at("saida"),
         "if3 did not deliver cpPsipredFile's data");
  expect(node_of(report, "montaFragmento#0").status == run::NodeStatus::Success,
         "the consumer did not run");

  for (const std::string version : {"orange", "black"}) {
    auto doc = prov::export_opm(recorder.path(), version);
    expect(process_ids(doc).count("psipred#0") == 1, version + " export lacks psipred");
  }

  Scratch cli;
  auto fixture_path = std::string(OSC_FIXTURE_DIR) + "/acceptance/profrager.osc";
  int status = std::system((std::string(OSC_CLI_PATH) + " run " + fixture_path + " --workdir " +
                            cli.workdir() + " --faults " + faults + " > /dev/null 2>&1")
                               .c_str());
  expect(status != -1 && WEXITSTATUS(status) == 0, "the cli run did not exit 0");

  auto elapsed = std::chrono::steady_clock::now() - started;
  expect(elapsed < std::chrono::seconds(5), "scenario took 5s or longer");
}

// Every violating rule fixture yields exactly its own rule id; every passing
// twin is clean.
void criterion_rules() {
  for (int rule = 1; rule <= 14; ++rule) {
    char stem[8];
    std::snprintf(stem, sizeof stem, "r%02d", rule);
    std::string expected = "R" + std::to_string(rule);

    auto failing = diagnostics_of(fixture("rules/" + std::string(stem) + "_fail.osc"),
                                  std::string(stem) + "_fail");
    expect(!failing.empty(), expected + ": failing fixture yields no diagnostics");
    for (const auto& d : failing)
      expect(d.rule_id == expected,
             expected + ": failing fixture yields " + d.rule_id + " instead");

    auto passing = diagnostics_of(fixture("rules/" + std::string(stem) + "_pass.osc"),
                                  std::string(stem) + "_pass");
    expect(passing.empty(), expected + ": passing fixture yields " +
                                (passing.empty() ? "" : render_diagnostic(passing.front())));
  }
}

// Random sweeps against an explicit nested-loop oracle.
void criterion_sweeps() {
  std::mt19937 rng(424242);
  for (int trial = 0; trial < 200; ++trial) {
    int ports = 1 + static_cast<int>(rng() % 4);
    std::vector<std::vector<std::string>> datasets;
    std::ostringstream src;
    src << "Family W = {\n  Component varre : VarreduraDeParametros = {\n";
    for (int p = 0; p < ports; ++p) {
      int size = 1 + static_cast<int>(rng() % 5);
      std::vector<std::string> items;
      for (int i = 0; i < size; ++i)
        items.push_back("p" + std::to_string(p) + "v" + std::to_string(i) + "x" +
                        std::to_string(rng() % 100));
      datasets.push_back(items);
      src << "    Port in p" << p << " : Bifurcacao = {\n      Property valores = {";
      for (int i = 0; i < size; ++i) src << (i ? ", " : "") << '"' << items[i] << '"';
      src << "};\n    }\n";
    }
    src << "    Family Corpo = {\n      Component passo : Executavel = {\n"
        << "        Property comando = \"p\";\n      }\n    }\n  }\n}\n";

    auto loaded = load(src.str(), "sweep trial " + std::to_string(trial));
    const auto* flow = loaded->resolution.find("varre");
    expect(flow != nullptr, "no varre element");
    auto expansion = plan::expand_sweep(*flow);

    std::vector<std::vector<std::string>> oracle{{}};
    for (const auto& items : datasets) {
      std::vector<std::vector<std::string>> next;
      for (const auto& row : oracle)
        for (const auto& item : items) {
          auto grown = row;
          grown.push_back(item);
          next.push_back(grown);
        }
      oracle = std::move(next);
    }

    std::string at = "trial " + std::to_string(trial);
    expect(expansion.instances.size() == oracle.size(), at + ": cardinality mismatch");
    for (size_t i = 0; i < oracle.size(); ++i) {
      expect(expansion.instances[i].instance_index == static_cast<int>(i),
             at + ": instance indices not dense");
      expect(expansion.instances[i].items == oracle[i],
             at + ": instance " + std::to_string(i) + " ordered differently");
    }
  }
}

// Join outputs against enumeration oracles, including the collision rename
// policy and the omission of ignored instances.
void criterion_joins() {
  // concat: scripted part bytes, ordered concatenation.
  {
    auto plan = plan_of(fixture("run/sweep_ignore.osc"), "sweep_ignore.osc");
    Scratch scratch;
    nlohmann::json faults;
    faults["varre.passo#0"] = {{"outcome", "ok"}, {"outputs", {{"r", "AAA\n"}}}};
    faults["varre.passo#1"] = {{"outcome", "ok"}, {"outputs", {{"r", "BBB\n"}}}};
    faults["varre.passo#2"] = {{"outcome", "ok"}, {"outputs", {{"r", "CCC\n"}}}};
    auto report = run::run(plan, config_for(run::Adapter::Simulated, scratch.workdir(), 1,
                                            scratch.faults(faults)));
    expect(report.success, "concat run failed");
    auto joined = read_file(node_of(report, "varre.juntada#0").outputs.at("juntada"));
    expect(joined == "AAA\nBBB\nCCC\n", "concat differs from the ordered oracle");
  }

  // concat with an ignored instance: that part is absent.
  {
    auto plan = plan_of(fixture("run/sweep_ignore.osc"), "sweep_ignore.osc");
    Scratch scratch;
    nlohmann::json faults;
    faults["varre.passo#0"] = {{"outcome", "ok"}, {"outputs", {{"r", "AAA\n"}}}};
    faults["varre.passo#1"] = nlohmann::json::object();
    faults["varre.passo#2"] = {{"outcome", "ok"}, {"outputs", {{"r", "CCC\n"}}}};
    auto report = run::run(plan, config_for(run::Adapter::Simulated, scratch.workdir(), 1,
                                            scratch.faults(faults)));
    expect(report.success, "ignored-instance run failed");
    expect(node_of(report, "varre.passo#1").status == run::NodeStatus::Ignored,
           "instance 1 is not ignored");
    auto joined = read_file(node_of(report, "varre.juntada#0").outputs.at("juntada"));
    expect(joined == "AAA\nCCC\n", "ignored instance still joined");
  }

  // include: part files land under collision-renamed names.
  {
    auto plan = plan_of(fixture("run/sweep_include.osc"), "sweep_include.osc");
    Scratch scratch;
    auto report = run::run(plan, config_for(run::Adapter::Simulated, scratch.workdir()));
    expect(report.success, "include run failed");

    std::map<std::string, std::string> oracle;
    for (int i = 0; i < 2; ++i) {
      fs::path part = node_of(report, "varre.passo#" + std::to_string(i)).outputs.at("r");
      std::string name = part.filename().string();
      if (oracle.count(name)) name += ".__i" + std::to_string(i);
      oracle[name] = read_file(part.string());
    }

    fs::path dir = node_of(report, "varre.juntada#0").outputs.at("juntada");
    std::map<std::string, std::string> actual;
    for (const auto& entry : fs::directory_iterator(dir))
      actual[entry.path().filename().string()] = read_file(entry.path().string());
    expect(actual == oracle, "include contents differ from the enumeration oracle");
  }

  // merge: directory parts are combined entry by entry.
  {
    auto plan = plan_of(fixture("run/sweep_merge.osc"), "sweep_merge.osc");
    Scratch scratch;
    auto report = run::run(plan, config_for(run::Adapter::Shell, scratch.workdir()));
    expect(report.success, "merge run failed");

    std::map<std::string, std::string> oracle;
    for (int i = 0; i < 2; ++i) {
      fs::path part = node_of(report, "varre.passo#" + std::to_string(i)).outputs.at("r");
      expect(fs::is_directory(part), "merge part is not a directory");
      std::vector<std::string> names;
      for (const auto& entry : fs::directory_iterator(part))
        names.push_back(entry.path().filename().string());
      std::sort(names.begin(), names.end());
      for (const auto& name : names) {
        std::string target = oracle.count(name) ? name + ".__i" + std::to_string(i) : name;
        oracle[target] = read_file((part / name).string());
      }
    }

    fs::path dir = node_of(report, "varre.juntada#0").outputs.at("juntada");
    std::map<std::string, std::string> actual;
    for (const auto& entry : fs::directory_iterator(dir))
      actual[entry.path().filename().string()] = read_file(entry.path().string());
    expect(actual == oracle, "merge contents differ from the enumeration oracle");
  }
}

// Scripted retry matrix plus the timeout reason.
void criterion_retries() {
  for (int n = 1; n <= 4; ++n) {
    for (int k = 0; k <= 4; ++k) {
      for (bool ignorar : {false, true}) {
        std::ostringstream src;
        src << "Family F = {\n  Component unica : Executavel, RedundanciaTemporal = {\n"
            << "    Property comando = \"true\";\n"
            << "    Property num_tentativas = " << n << ";\n"
            << "    Property ignorar = " << (ignorar ? "true" : "false") << ";\n"
            << "    Port out saida = {}\n  }\n}\n";
        nlohmann::json faults = nlohmann::json::object();
        for (int j = 1; j <= k; ++j)
          faults["unica@" + std::to_string(j)] = nlohmann::json::object();

        Scratch scratch;
        auto plan = plan_of(src.str(), "retry matrix");
        auto report = run::run(plan, config_for(run::Adapter::Simulated, scratch.workdir(), 1,
                                                scratch.faults(faults)));

        std::string at = "k=" + std::to_string(k) + " n=" + std::to_string(n) +
                         " ignorar=" + (ignorar ? "t" : "f");
        auto expected = k < n ? run::NodeStatus::Success
                              : (ignorar ? run::NodeStatus::Ignored : run::NodeStatus::Failed);
        const auto& unica = node_of(report, "unica#0");
        expect(unica.status == expected, at + ": status " + to_string(unica.status));
        size_t attempts = static_cast<size_t>(k < n ? k + 1 : n);
        expect(unica.attempts.size() == attempts,
               at + ": made " + std::to_string(unica.attempts.size()) + " attempts");
        expect(report.success == (expected != run::NodeStatus::Failed), at + ": run verdict");
      }
    }
  }

  std::string timed =
      "Family F = {\n  Component lenta : Executavel, MonitoramentoDeTempo, RedundanciaTemporal = "
      "{\n    Property comando = \"slow\";\n    Property tempo_limite = 1.0;\n"
      "    Property num_tentativas = 1;\n    Port out saida = {}\n  }\n}\n";
  Scratch scratch;
  auto plan = plan_of(timed, "timeout scenario");
  auto report =
      run::run(plan, config_for(run::Adapter::Simulated, scratch.workdir(), 1,
                                scratch.faults({{"lenta", {{"outcome", "timeout"}}}})));
  const auto& lenta = node_of(report, "lenta#0");
  expect(lenta.status == run::NodeStatus::Failed, "timeout scenario did not fail");
  expect(lenta.attempts.size() == 1 && lenta.attempts[0].failure &&
             *lenta.attempts[0].failure == run::FailReason::Timeout,
         "timeout reason not recorded");
  expect(std::string(to_string(run::FailReason::Timeout)) == "timeout", "reason renders oddly");
}

// Exhaustive 3-replica votes over a 2-symbol alphabet, invariant across
// worker counts.
void criterion_masking() {
  auto source = fixture("run/masked.osc");
  for (int assignment = 0; assignment < 8; ++assignment) {
    std::vector<std::string> symbols;
    nlohmann::json faults;
    for (int replica = 0; replica < 3; ++replica) {
      std::string symbol = (assignment >> replica) & 1 ? "B" : "A";
      symbols.push_back(symbol);
      faults["copiado%r" + std::to_string(replica)] = {{"outcome", "ok"},
                                                       {"outputs", {{"r", symbol}}}};
    }

    std::map<std::string, int> votes;
    for (const auto& s : symbols) ++votes[s];
    std::string winner;
    for (const auto& [symbol, count] : votes)
      if (count * 2 > 3) winner = symbol;

    std::string at = "assignment " + symbols[0] + symbols[1] + symbols[2];
    nlohmann::ordered_json seen;
    for (int jobs : {1, 3}) {
      Scratch scratch;
      auto plan = plan_of(source, "masked.osc");
      auto report = run::run(plan, config_for(run::Adapter::Simulated, scratch.workdir(), jobs,
                                              scratch.faults(faults)));
      const auto& copiado = node_of(report, "copiado#0");
      if (winner.empty()) {
        expect(copiado.status == run::NodeStatus::Failed, at + ": expected no majority");
        expect(copiado.signal && copiado.signal->reason == run::FailReason::NoMajority,
               at + ": wrong failure reason");
      } else {
        expect(copiado.status == run::NodeStatus::Success, at + ": vote failed");
        expect(read_file(copiado.outputs.at("r")) == winner, at + ": wrong majority output");
      }
      auto doc = normalize(plan, report, scratch.workdir());
      if (seen.is_null())
        seen = doc;
      else
        expect(seen == doc, at + ": result depends on worker count");
    }
  }
}

// Word count over a generated corpus against a direct-count oracle.
void criterion_mapreduce() {
  const std::vector<std::string> vocab = {"abre",   "branco", "cinza", "dado",
                                          "eixo",   "fita",   "grade", "hora",
                                          "indice", "junta",  "kilo",  "linha"};
  std::mt19937 rng(99);
  std::ostringstream corpus;
  std::map<std::string, long> counts;
  for (int line = 0; line < 1000; ++line) {
    int words = 1 + static_cast<int>(rng() % 6);
    for (int w = 0; w < words; ++w) {
      const auto& word = vocab[rng() % vocab.size()];
      ++counts[word];
      corpus << word << (w + 1 < words ? " " : "");
    }
    corpus << "\n";
  }

  Scratch scratch;
  auto path = scratch.file("corpus.txt", corpus.str());
  auto source = replace_once(fixture("run/mr_wc.osc"),
                             "printf 'b a\\\\na b\\\\nc\\\\n' > {out:texto}",
                             "cat " + path + " > {out:texto}");
  auto plan = plan_of(source, "wordcount");
  auto report = run::run(plan, config_for(run::Adapter::Shell, scratch.workdir()));
  expect(report.success, "wordcount run failed");

  std::ostringstream oracle;
  for (const auto& [word, count] : counts) oracle << word << "\t" << count << "\n";
  auto actual = read_file(node_of(report, "conta#0").outputs.at("contagem"));
  expect(actual == oracle.str(), "wordcount differs from the direct-count oracle");
}

// Version projections, the nested-flow collapse, and dataflow acyclicity.
void criterion_provenance() {
  std::vector<nlohmann::ordered_json> exports;

  {
    auto plan = plan_of(fixture("run/opm.osc"), "opm.osc");
    Scratch scratch;
    prov::Recorder recorder((scratch.dir / "events.jsonl").string());
    auto report =
        run::run(plan, config_for(run::Adapter::Simulated, scratch.workdir()), &recorder);
    expect(report.success, "opm run failed");

    auto known = prov::known_versions(recorder.path());
    expect(known == std::vector<std::string>{"v1", "v2"}, "known versions are off");
    for (const auto& version : known) {
      auto doc = prov::export_opm(recorder.path(), version);
      std::set<std::string> tagged;
      for (const auto& node : plan.nodes)
        for (const auto& v : node.versions)
          if (v == version) tagged.insert(node.id);
      expect(process_ids(doc) == tagged, version + " is not an exact projection");
      exports.push_back(std::move(doc));
    }
  }

  {
    auto plan = plan_of(fixture("run/granular.osc"), "granular.osc");
    Scratch scratch;
    prov::Recorder recorder((scratch.dir / "events.jsonl").string());
    auto report =
        run::run(plan, config_for(run::Adapter::Simulated, scratch.workdir()), &recorder);
    expect(report.success, "granular run failed");

    auto full = prov::export_opm(recorder.path(), "v2", {{"meio", "alta"}});
    auto collapsed = prov::export_opm(recorder.path(), "v2");
    expect(process_ids(full).count("meio.fundo.nucleo#0") == 1, "full export lost the core");
    expect(process_ids(collapsed).count("meio#0") == 1, "collapse lost the flow process");
    expect(process_ids(collapsed).count("meio.fundo.nucleo#0") == 0, "collapse kept internals");
    expect(artifact_ids(collapsed).count("c1#0/entrega") == 1 &&
               artifact_ids(collapsed).count("meio.co#0/entrega") == 1,
           "collapse dropped a boundary artifact");
    expect(reaches(full, "fonte#0", "usa#0"), "full export breaks reachability");
    expect(reaches(collapsed, "fonte#0", "usa#0"), "collapse breaks boundary reachability");
    exports.push_back(std::move(full));
    exports.push_back(std::move(collapsed));
    exports.push_back(prov::export_opm(recorder.path(), "v1"));
  }

  for (size_t i = 0; i < exports.size(); ++i)
    expect(dataflow_acyclic(exports[i]),
           "export " + std::to_string(i) + " has a used/wasGeneratedBy cycle");
}

// Two identical runs at jobs=4: reports equal modulo timestamps, artifact
// trees byte-identical.
void criterion_determinism() {
  auto source = fixture("run/sweep_ignore.osc");
  nlohmann::json faults;
  faults["varre.passo#1"] = nlohmann::json::object();

  auto plan = plan_of(source, "sweep_ignore.osc");
  Scratch a, b;
  auto report_a = run::run(plan, config_for(run::Adapter::Simulated, a.workdir(), 4,
                                            a.faults(faults)));
  auto report_b = run::run(plan, config_for(run::Adapter::Simulated, b.workdir(), 4,
                                            b.faults(faults)));
  expect(report_a.success && report_b.success, "runs did not succeed");
  expect(normalize(plan, report_a, a.workdir()) == normalize(plan, report_b, b.workdir()),
         "reports differ beyond timestamps");

  auto tree_of = [](const std::string& root) {
    std::map<std::string, std::string> tree;
    for (const auto& entry : fs::recursive_directory_iterator(root))
      if (entry.is_regular_file()) {
        auto rel = fs::relative(entry.path(), root).string();
        tree[rel] = read_file(entry.path().string());
      }
    return tree;
  };
  expect(tree_of(a.workdir()) == tree_of(b.workdir()), "artifact trees differ");
}

// parse . render . parse is a fixpoint over the whole fixture corpus.
void criterion_roundtrip() {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(OSC_FIXTURE_DIR))
    if (entry.is_regular_file() && entry.path().extension() == ".osc")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  expect(files.size() >= 20,
         "corpus has only " + std::to_string(files.size()) + " fixtures");

  for (const auto& path : files) {
    auto name = path.filename().string();
    auto first = parse::render_workflow(parse::parse_workflow(read_file(path.string()), name));
    auto second = parse::render_workflow(parse::parse_workflow(first, name + " (rendered)"));
    expect(first == second, name + " is not a render fixpoint");
  }
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* name;
    std::function<void()> body;
  };
  const std::vector<Criterion> criteria = {
      {1, "profrager fragment scenario", criterion_profrager},
      {2, "rule catalog", criterion_rules},
      {3, "sweep cardinality property", criterion_sweeps},
      {4, "join semantics", criterion_joins},
      {5, "retry and timeout semantics", criterion_retries},
      {6, "masking vote", criterion_masking},
      {7, "mapreduce word count", criterion_mapreduce},
      {8, "provenance projections", criterion_provenance},
      {9, "determinism at four workers", criterion_determinism},
      {10, "parser roundtrip fixpoint", criterion_roundtrip},
  };

  int failed = 0;
  for (const auto& criterion : criteria) {
    try {
      criterion.body();
      std::printf("[PASS] %2d %s\n", criterion.number, criterion.name);
    } catch (const std::exception& e) {
      std::printf("[FAIL] %2d %s: %s\n", criterion.number, criterion.name, e.what());
      ++failed;
    }
  }
  return failed == 0 ? 0 : 1;
}
