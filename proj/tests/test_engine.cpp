#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "osc/engine.hpp"
#include "osc/parser.hpp"
#include "osc/planner.hpp"
#include "osc/typesystem.hpp"

using namespace osc;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string fixture(const std::string& name) {
  return read_file(std::string(OSC_FIXTURE_DIR) + "/run/" + name);
}

plan::ExecutionPlan plan_source(const std::string& source, const std::string& name,
                                const plan::PlanOptions& options = {}) {
  model::WorkflowModel model = parse::parse_workflow(source, name);
  std::vector<types::ResolveError> errors;
  types::TypeRegistry registry = types::registry_for(model, errors);
  REQUIRE(errors.empty());
  types::Resolution resolution = types::resolve_types(model, registry);
  REQUIRE(resolution.ok());
  auto diagnostics = types::validate(model, registry, resolution);
  for (const auto& d : diagnostics) CAPTURE(types::render_diagnostic(d));
  REQUIRE(diagnostics.empty());
  return plan::build_plan(model, resolution, options);
}

plan::ExecutionPlan plan_fixture(const std::string& name, const plan::PlanOptions& options = {}) {
  return plan_source(fixture(name), name, options);
}

// Unique scratch directory per test case, removed on destruction.
struct Scratch {
  fs::path dir;

  Scratch() {
    static int counter = 0;
    dir = fs::temp_directory_path() /
          ("osc_engine_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }

  std::string workdir() const { return (dir / "work").string(); }

  std::string faults(const nlohmann::json& script) const {
    fs::path path = dir / "faults.json";
    std::ofstream out(path);
    out << script.dump();
    return path.string();
  }
};

run::RunConfig sim_config(const Scratch& scratch) {
  run::RunConfig config;
  config.adapter = run::Adapter::Simulated;
  config.workdir = scratch.workdir();
  return config;
}

run::RunConfig shell_config(const Scratch& scratch) {
  run::RunConfig config;
  config.adapter = run::Adapter::Shell;
  config.workdir = scratch.workdir();
  return config;
}

const run::NodeResult& node_of(const run::RunReport& report, const std::string& id) {
  for (const auto& node : report.nodes)
    if (node.id == id) return node;
  FAIL("no node " << id << " in report");
  static run::NodeResult none;
  return none;
}

// MapReduce family with pluggable producer and map commands.
std::string mapreduce_family(const std::string& produce, const std::string& map) {
  return std::string("Family F = {\n") +
         "  Connector Type Duto = {}\n" +
         "  Component gera : Executavel = {\n" +
         "    Property comando = \"" + produce + "\";\n" +
         "    Port out texto = {}\n" +
         "  }\n" +
         "  Component conta : MapReduce = {\n" +
         "    Port in linhas = {}\n" +
         "    Port out contagem = {}\n" +
         "    Family Corpo = {\n" +
         "      Component map : Executavel = {\n" +
         "        Property comando = \"" + map + "\";\n" +
         "      }\n" +
         "      Component reduce : Executavel = {\n" +
         "        Property comando = \"wc -l\";\n" +
         "      }\n" +
         "    }\n" +
         "  }\n" +
         "  Connector c1 : Duto = {\n" +
         "    Role source origem = {}\n" +
         "    Role dest destino = {}\n" +
         "  }\n" +
         "  Attachment gera.texto to c1.origem;\n" +
         "  Attachment conta.linhas from c1.destino;\n" +
         "}\n";
}

}  // namespace

TEST_CASE("sim chain runs every node and passes artifacts through the connector") {
  Scratch scratch;
  auto plan = plan_fixture("conn_retry.osc");
  auto report = run::run(plan, sim_config(scratch));

  CHECK(report.success);
  CHECK(report.adapter == "sim");
  for (const auto& node : report.nodes) CHECK(node.status == run::NodeStatus::Success);

  const auto& a = node_of(report, "a#0");
  CHECK(read_file(a.outputs.at("saida")) == "a#0/saida\n");

  const auto& c = node_of(report, "c#0");
  CHECK(c.outputs.at("destino") == a.outputs.at("saida"));
}

TEST_CASE("retry recovers when a later attempt succeeds") {
  Scratch scratch;
  auto plan = plan_fixture("retry.osc");
  auto config = sim_config(scratch);
  config.fault_script = scratch.faults({
      {"unica@1", {{"outcome", "fail"}, {"exit_code", 3}}},
      {"unica@2", {{"outcome", "fail"}}},
  });
  auto report = run::run(plan, config);

  CHECK(report.success);
  const auto& node = node_of(report, "unica#0");
  CHECK(node.status == run::NodeStatus::Success);
  REQUIRE(node.attempts.size() == 3);
  CHECK(node.attempts[0].failure == run::FailReason::NonzeroExit);
  CHECK(node.attempts[0].exit_code == 3);
  CHECK(node.attempts[1].failure == run::FailReason::NonzeroExit);
  CHECK(node.attempts[1].exit_code == 1);
  CHECK_FALSE(node.attempts[2].failure.has_value());
}

TEST_CASE("num_tentativas counts total attempts") {
  Scratch scratch;
  auto plan = plan_fixture("retry.osc");
  auto config = sim_config(scratch);
  config.fault_script = scratch.faults({{"unica", {{"outcome", "fail"}}}});
  auto report = run::run(plan, config);

  CHECK_FALSE(report.success);
  const auto& node = node_of(report, "unica#0");
  CHECK(node.status == run::NodeStatus::Failed);
  CHECK(node.attempts.size() == 3);
  REQUIRE(node.signal.has_value());
  CHECK(node.signal->origin == "unica#0");
  CHECK(node.signal->attempt_count == 3);
  CHECK(node.signal->reason == run::FailReason::NonzeroExit);
}

TEST_CASE("retries_are_additional grants one extra attempt") {
  Scratch scratch;
  auto plan = plan_fixture("retry.osc");
  auto config = sim_config(scratch);
  config.retries_are_additional = true;
  config.fault_script = scratch.faults({
      {"unica@1", {{"outcome", "fail"}}},
      {"unica@2", {{"outcome", "fail"}}},
      {"unica@3", {{"outcome", "fail"}}},
  });
  auto report = run::run(plan, config);

  CHECK(report.success);
  CHECK(node_of(report, "unica#0").attempts.size() == 4);
}

TEST_CASE("exhausted budget with ignorar masks the failure") {
  Scratch scratch;
  auto plan = plan_fixture("retry_ignore.osc");
  auto config = sim_config(scratch);
  config.fault_script = scratch.faults({{"unica", {{"outcome", "fail"}}}});
  auto report = run::run(plan, config);

  CHECK(report.success);  // the ignored task has no consumers
  const auto& node = node_of(report, "unica#0");
  CHECK(node.status == run::NodeStatus::Ignored);
  REQUIRE(node.signal.has_value());
  CHECK(node.signal->attempt_count == 3);
}

TEST_CASE("specific fault rules win over generic ones") {
  Scratch scratch;
  auto plan = plan_fixture("retry.osc");
  auto config = sim_config(scratch);
  config.fault_script = scratch.faults({
      {"unica", {{"outcome", "fail"}}},
      {"unica@3", {{"outcome", "ok"}}},
  });
  auto report = run::run(plan, config);

  CHECK(report.success);
  CHECK(node_of(report, "unica#0").attempts.size() == 3);
}

TEST_CASE("timeout outranks log matches which outrank exit codes") {
  Scratch scratch;
  auto plan = plan_fixture("detect.osc");

  SUBCASE("log text with a matching pattern flags log_match even on exit 0") {
    auto config = sim_config(scratch);
    config.fault_script = scratch.faults(
        {{"vigiado", {{"outcome", "ok"}, {"log_text", "step done\nERROR: died\n"}}}});
    auto report = run::run(plan, config);
    const auto& node = node_of(report, "vigiado#0");
    CHECK(node.status == run::NodeStatus::Failed);
    REQUIRE(node.attempts.size() == 1);
    CHECK(node.attempts[0].failure == run::FailReason::LogMatch);
    CHECK(node.attempts[0].log_excerpt == "step done\nERROR: died");
  }

  SUBCASE("delay beyond tempo_limite flags timeout even when the log also matches") {
    auto config = sim_config(scratch);
    config.fault_script = scratch.faults(
        {{"vigiado", {{"outcome", "fail"}, {"delay", 2.5}, {"log_text", "ERROR: slow\n"}}}});
    auto report = run::run(plan, config);
    const auto& node = node_of(report, "vigiado#0");
    REQUIRE(node.attempts.size() == 1);
    CHECK(node.attempts[0].failure == run::FailReason::Timeout);
    CHECK(node.attempts[0].duration == doctest::Approx(2.5));
  }

  SUBCASE("scripted timeout outcome forces a timeout") {
    auto config = sim_config(scratch);
    config.fault_script = scratch.faults({{"vigiado", {{"outcome", "timeout"}}}});
    auto report = run::run(plan, config);
    CHECK(node_of(report, "vigiado#0").attempts[0].failure == run::FailReason::Timeout);
  }
}

TEST_CASE("propagation delivers the first healthy source") {
  Scratch scratch;
  auto plan = plan_fixture("propagate.osc");

  SUBCASE("primary healthy") {
    auto report = run::run(plan, sim_config(scratch));
    CHECK(report.success);
    const auto& alt = node_of(report, "alt#0");
    CHECK(alt.outputs.at("entrega") == node_of(report, "p1#0").outputs.at("r"));
  }

  SUBCASE("primary ignored, reserve takes over") {
    auto config = sim_config(scratch);
    config.fault_script = scratch.faults({{"p1", {{"outcome", "fail"}}}});
    auto report = run::run(plan, config);
    CHECK(report.success);
    CHECK(node_of(report, "p1#0").status == run::NodeStatus::Ignored);
    const auto& alt = node_of(report, "alt#0");
    CHECK(alt.status == run::NodeStatus::Success);
    CHECK(alt.outputs.at("entrega") == node_of(report, "p2#0").outputs.at("r"));
    CHECK(node_of(report, "usa#0").status == run::NodeStatus::Success);
  }

  SUBCASE("every source ignored fails the transfer without retries") {
    auto config = sim_config(scratch);
    config.fault_script =
        scratch.faults({{"p1", {{"outcome", "fail"}}}, {"p2", {{"outcome", "fail"}}}});
    auto report = run::run(plan, config);
    CHECK_FALSE(report.success);
    const auto& alt = node_of(report, "alt#0");
    CHECK(alt.status == run::NodeStatus::Failed);
    REQUIRE(alt.signal.has_value());
    CHECK(alt.signal->reason == run::FailReason::TransferFailure);
    CHECK(alt.signal->attempt_count == 1);
    CHECK(node_of(report, "usa#0").status == run::NodeStatus::NotRun);
  }
}

TEST_CASE("a signal reaching a task input stops the run") {
  Scratch scratch;
  auto plan = plan_fixture("unconsumed.osc");
  auto config = sim_config(scratch);
  config.fault_script = scratch.faults({{"a", {{"outcome", "fail"}}}});
  auto report = run::run(plan, config);

  CHECK_FALSE(report.success);
  CHECK(node_of(report, "a#0").status == run::NodeStatus::Ignored);
  CHECK(node_of(report, "c#0").status == run::NodeStatus::Ignored);
  const auto& b = node_of(report, "b#0");
  CHECK(b.status == run::NodeStatus::NotRun);
  REQUIRE(b.signal.has_value());
  CHECK(b.signal->origin == "a#0");
}

TEST_CASE("connector retry rides out transfer faults") {
  Scratch scratch;
  auto plan = plan_fixture("conn_retry.osc");
  auto config = sim_config(scratch);
  config.fault_script = scratch.faults({
      {"c@1", {{"outcome", "fail"}}},
      {"c@2", {{"outcome", "fail"}}},
  });
  auto report = run::run(plan, config);

  CHECK(report.success);
  const auto& c = node_of(report, "c#0");
  CHECK(c.status == run::NodeStatus::Success);
  REQUIRE(c.attempts.size() == 3);
  CHECK(c.attempts[0].failure == run::FailReason::TransferFailure);
  CHECK(c.attempts[1].failure == run::FailReason::TransferFailure);
  CHECK_FALSE(c.attempts[2].failure.has_value());
  CHECK(node_of(report, "b#0").status == run::NodeStatus::Success);
}

TEST_CASE("masking votes byte-identical majorities per port") {
  Scratch scratch;
  auto plan = plan_fixture("masked.osc");

  SUBCASE("one divergent replica loses the vote") {
    auto config = sim_config(scratch);
    config.fault_script =
        scratch.faults({{"copiado%r1", {{"outcome", "ok"}, {"output", "corrompido"}}}});
    auto report = run::run(plan, config);
    CHECK(report.success);
    const auto& masked = node_of(report, "copiado#0");
    CHECK(masked.status == run::NodeStatus::Success);
    CHECK(masked.attempts.size() == 3);
    CHECK(masked.attempts[0].replica == 0);
    CHECK(masked.attempts[1].replica == 1);
    CHECK(masked.attempts[2].replica == 2);
    CHECK(read_file(masked.outputs.at("r")) == "copiado#0/r\n");
  }

  SUBCASE("a crashed replica is outvoted by the healthy pair") {
    auto config = sim_config(scratch);
    config.fault_script = scratch.faults({{"copiado%r0", {{"outcome", "fail"}}}});
    auto report = run::run(plan, config);
    CHECK(report.success);
    const auto& masked = node_of(report, "copiado#0");
    CHECK(masked.status == run::NodeStatus::Success);
    CHECK(read_file(masked.outputs.at("r")) == "copiado#0/r\n");
  }

  SUBCASE("three distinct outputs leave no majority") {
    auto config = sim_config(scratch);
    config.fault_script = scratch.faults({
        {"copiado%r0", {{"outcome", "ok"}, {"output", "um"}}},
        {"copiado%r1", {{"outcome", "ok"}, {"output", "dois"}}},
        {"copiado%r2", {{"outcome", "ok"}, {"output", "tres"}}},
    });
    auto report = run::run(plan, config);
    CHECK_FALSE(report.success);
    const auto& masked = node_of(report, "copiado#0");
    CHECK(masked.status == run::NodeStatus::Failed);
    REQUIRE(masked.signal.has_value());
    CHECK(masked.signal->reason == run::FailReason::NoMajority);
  }

  SUBCASE("two agreeing survivors out of three carry the vote") {
    auto config = sim_config(scratch);
    config.fault_script = scratch.faults({{"copiado%r2", {{"outcome", "ok"}, {"output", "x"}}}});
    auto report = run::run(plan, config);
    CHECK(report.success);
    CHECK(read_file(node_of(report, "copiado#0").outputs.at("r")) == "copiado#0/r\n");
  }
}

TEST_CASE("masked replicas retry independently before the vote") {
  Scratch scratch;
  auto plan = plan_fixture("masked_retry.osc");
  auto config = sim_config(scratch);
  config.fault_script = scratch.faults({{"copiado%r1@1", {{"outcome", "fail"}}}});
  auto report = run::run(plan, config);

  CHECK(report.success);
  const auto& masked = node_of(report, "copiado#0");
  CHECK(masked.status == run::NodeStatus::Success);
  // replica 0: 1 attempt, replica 1: 2 attempts, replica 2: 1 attempt
  REQUIRE(masked.attempts.size() == 4);
  CHECK(masked.attempts[1].replica == 1);
  CHECK(masked.attempts[1].failure == run::FailReason::NonzeroExit);
  CHECK(masked.attempts[2].replica == 1);
  CHECK_FALSE(masked.attempts[2].failure.has_value());
}

TEST_CASE("masked failure with ignorar turns into an ignored node") {
  Scratch scratch;
  auto plan = plan_fixture("masked_retry.osc");
  auto config = sim_config(scratch);
  config.fault_script = scratch.faults({{"copiado", {{"outcome", "fail"}}}});
  auto report = run::run(plan, config);

  CHECK(report.success);
  const auto& masked = node_of(report, "copiado#0");
  CHECK(masked.status == run::NodeStatus::Ignored);
  CHECK(masked.attempts.size() == 6);  // 3 replicas x 2 attempts
  REQUIRE(masked.signal.has_value());
  CHECK(masked.signal->attempt_count == 6);
}

TEST_CASE("sweep instances feed the join in instance order") {
  Scratch scratch;
  auto plan = plan_fixture("sweep_ignore.osc");
  auto report = run::run(plan, sim_config(scratch));

  CHECK(report.success);
  const auto& join = node_of(report, "varre.juntada#0");
  CHECK(join.status == run::NodeStatus::Success);
  std::string joined = read_file(join.outputs.at("juntada"));
  CHECK(joined == "varre.passo#0/r\nvarre.passo#1/r\nvarre.passo#2/r\n");
  CHECK(node_of(report, "usa#0").status == run::NodeStatus::Success);
}

TEST_CASE("ignored sweep instances are omitted from the join") {
  Scratch scratch;
  auto plan = plan_fixture("sweep_ignore.osc");
  auto config = sim_config(scratch);
  config.fault_script = scratch.faults({{"varre.passo#1", {{"outcome", "fail"}}}});
  auto report = run::run(plan, config);

  CHECK(report.success);
  CHECK(node_of(report, "varre.passo#1").status == run::NodeStatus::Ignored);
  CHECK(node_of(report, "varre.leva#1").status == run::NodeStatus::Ignored);
  std::string joined = read_file(node_of(report, "varre.juntada#0").outputs.at("juntada"));
  CHECK(joined == "varre.passo#0/r\nvarre.passo#2/r\n");
}

TEST_CASE("include joins copy part files under collision-safe names") {
  Scratch scratch;
  auto plan = plan_fixture("sweep_include.osc");
  auto report = run::run(plan, sim_config(scratch));

  CHECK(report.success);
  const auto& join = node_of(report, "varre.juntada#0");
  fs::path dir = join.outputs.at("juntada");
  REQUIRE(fs::is_directory(dir));
  CHECK(read_file((dir / "r").string()) == "varre.passo#0/r\n");
  CHECK(read_file((dir / "r.__i1").string()) == "varre.passo#1/r\n");
}

TEST_CASE("merge joins combine part directories and rename collisions") {
  Scratch scratch;
  auto plan = plan_fixture("sweep_merge.osc");
  auto report = run::run(plan, shell_config(scratch));

  CHECK(report.success);
  fs::path dir = node_of(report, "varre.juntada#0").outputs.at("juntada");
  REQUIRE(fs::is_directory(dir));
  CHECK(read_file((dir / "comum.txt").string()) == "x");
  CHECK(read_file((dir / "comum.txt.__i1").string()) == "y");
  CHECK(read_file((dir / "so_x.txt").string()) == "x");
  CHECK(read_file((dir / "so_y.txt").string()) == "y");
}

TEST_CASE("merge join rejects file parts") {
  Scratch scratch;
  auto plan = plan_fixture("sweep_merge.osc");
  auto report = run::run(plan, sim_config(scratch));  // sim writes plain files

  CHECK_FALSE(report.success);
  const auto& join = node_of(report, "varre.juntada#0");
  CHECK(join.status == run::NodeStatus::Failed);
  CHECK(join.attempts[0].log_excerpt.find("expects directories") != std::string::npos);
}

TEST_CASE("shell adapter runs commands and wires artifact paths") {
  Scratch scratch;
  auto plan = plan_fixture("chain_shell.osc");
  auto report = run::run(plan, shell_config(scratch));

  CHECK(report.success);
  CHECK(read_file(node_of(report, "produtor#0").outputs.at("saida")) == "hi");
  CHECK(read_file(node_of(report, "consumidor#0").outputs.at("copia")) == "hihi");
}

TEST_CASE("shell adapter kills processes past tempo_limite") {
  Scratch scratch;
  auto plan = plan_fixture("shell_timeout.osc");
  auto started = std::chrono::steady_clock::now();
  auto report = run::run(plan, shell_config(scratch));
  auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started);

  CHECK(elapsed.count() < 4.0);  // nowhere near the sleep 5
  CHECK_FALSE(report.success);
  const auto& lento = node_of(report, "lento#0");
  CHECK(lento.status == run::NodeStatus::Failed);
  REQUIRE(lento.attempts.size() == 1);
  CHECK(lento.attempts[0].failure == run::FailReason::Timeout);
}

TEST_CASE("shell adapter flags log pattern matches on exit 0") {
  Scratch scratch;
  auto plan = plan_fixture("shell_log.osc");
  auto report = run::run(plan, shell_config(scratch));

  CHECK_FALSE(report.success);
  const auto& barulhento = node_of(report, "barulhento#0");
  CHECK(barulhento.status == run::NodeStatus::Failed);
  REQUIRE(barulhento.attempts.size() == 1);
  CHECK(barulhento.attempts[0].failure == run::FailReason::LogMatch);
  CHECK(barulhento.attempts[0].exit_code == 0);
  CHECK(barulhento.attempts[0].log_excerpt == "deu ERRO na etapa");
}

TEST_CASE("mapreduce counts words through real map and reduce commands") {
  Scratch scratch;
  auto plan = plan_fixture("mr_wc.osc");
  auto report = run::run(plan, shell_config(scratch));

  CHECK(report.success);
  const auto& conta = node_of(report, "conta#0");
  CHECK(conta.status == run::NodeStatus::Success);
  CHECK(read_file(conta.outputs.at("contagem")) == "a\t2\nb\t2\nc\t1\n");
  CHECK(read_file(node_of(report, "mostra#0").outputs.at("copia")) == "a\t2\nb\t2\nc\t1\n");
}

TEST_CASE("mapreduce with no input lines writes an empty output") {
  Scratch scratch;
  auto plan = plan_source(mapreduce_family(": > {out:texto}", "sed -e 's/$/\\t1/'"), "empty");
  auto report = run::run(plan, shell_config(scratch));

  CHECK(report.success);
  const auto& conta = node_of(report, "conta#0");
  CHECK(conta.status == run::NodeStatus::Success);
  CHECK(read_file(conta.outputs.at("contagem")).empty());
}

TEST_CASE("mapreduce fails when a map line has no tab") {
  Scratch scratch;
  auto plan = plan_source(mapreduce_family("printf 'a\\nb\\n' > {out:texto}", "cat"), "notab");
  auto report = run::run(plan, shell_config(scratch));

  CHECK_FALSE(report.success);
  const auto& conta = node_of(report, "conta#0");
  CHECK(conta.status == run::NodeStatus::Failed);
  CHECK(conta.attempts[0].log_excerpt.find("without a tab") != std::string::npos);
}

TEST_CASE("sequential sweeps order instances by rank even with many jobs") {
  Scratch scratch;
  model::WorkflowModel model = parse::parse_workflow(
      read_file(std::string(OSC_FIXTURE_DIR) + "/plan/sweep_serial.osc"), "serial");
  std::vector<types::ResolveError> errors;
  types::TypeRegistry registry = types::registry_for(model, errors);
  types::Resolution resolution = types::resolve_types(model, registry);
  auto plan = plan::build_plan(model, resolution);

  auto config = sim_config(scratch);
  config.jobs = 4;
  auto report = run::run(plan, config);
  CHECK(report.success);

  const auto& first = node_of(report, "varre.passo#0");
  const auto& second = node_of(report, "varre.passo#1");
  const auto& third = node_of(report, "varre.passo#2");
  CHECK(first.end_time < second.start_time);
  CHECK(second.end_time < third.start_time);
}

TEST_CASE("parallel runs produce the same artifacts and report as serial runs") {
  Scratch serial_scratch;
  auto plan = plan_fixture("sweep_ignore.osc");
  auto serial_report = run::run(plan, sim_config(serial_scratch));

  Scratch parallel_scratch;
  auto parallel_config = sim_config(parallel_scratch);
  parallel_config.jobs = 4;
  auto parallel_report = run::run(plan, parallel_config);

  auto normalize = [](nlohmann::ordered_json doc, const std::string& workdir) {
    doc["jobs"] = 0;
    for (auto& node : doc["nodes"]) {
      node["start"] = 0;
      node["end"] = 0;
      if (node.contains("outputs"))
        for (auto& [slot, path] : node["outputs"].items())
          path = std::string(path.get<std::string>()).substr(workdir.size());
    }
    return doc;
  };
  auto serial_doc = normalize(run::to_json(plan, serial_report), serial_scratch.workdir());
  auto parallel_doc = normalize(run::to_json(plan, parallel_report), parallel_scratch.workdir());
  CHECK(serial_doc == parallel_doc);

  CHECK(read_file(node_of(parallel_report, "varre.juntada#0").outputs.at("juntada")) ==
        read_file(node_of(serial_report, "varre.juntada#0").outputs.at("juntada")));
}

TEST_CASE("injected file datasets are copied for the connector") {
  Scratch scratch;
  fs::path data = scratch.dir / "data";
  fs::create_directories(data);
  std::ofstream(data / "um.txt") << "conteudo um";
  std::ofstream(data / "dois.txt") << "conteudo dois";

  plan::PlanOptions options;
  plan::PortBinding binding;
  binding.port = "faixa";
  binding.kind = plan::DatasetKind::Files;
  for (const auto& entry : {"dois.txt", "um.txt"})
    binding.items.push_back((data / entry).string());
  options.binds["varre.faixa"] = binding;

  auto plan = plan_fixture("sweep_ignore.osc", options);
  auto report = run::run(plan, sim_config(scratch));
  CHECK(report.success);

  const auto& alimenta = node_of(report, "varre.alimenta#0");
  CHECK(read_file(alimenta.outputs.at("entrega")) == "conteudo dois");
  const auto& alimenta1 = node_of(report, "varre.alimenta#1");
  CHECK(read_file(alimenta1.outputs.at("entrega")) == "conteudo um");
}

TEST_CASE("run validates its configuration up front") {
  Scratch scratch;
  auto plan = plan_fixture("retry.osc");

  SUBCASE("fault scripts are rejected under the shell adapter") {
    auto config = shell_config(scratch);
    config.fault_script = scratch.faults({{"unica", {{"outcome", "fail"}}}});
    CHECK_THROWS_WITH_AS(run::run(plan, config), doctest::Contains("simulated adapter"),
                         std::runtime_error);
  }

  SUBCASE("unknown outcomes are rejected") {
    auto config = sim_config(scratch);
    config.fault_script = scratch.faults({{"unica", {{"outcome", "explode"}}}});
    CHECK_THROWS_WITH_AS(run::run(plan, config), doctest::Contains("unknown outcome"),
                         std::runtime_error);
  }

  SUBCASE("malformed keys are rejected") {
    auto config = sim_config(scratch);
    config.fault_script = scratch.faults({{"unica@почти", {{"outcome", "fail"}}}});
    CHECK_THROWS_WITH_AS(run::run(plan, config), doctest::Contains("bad fault script key"),
                         std::runtime_error);
  }

  SUBCASE("jobs below one are rejected") {
    auto config = sim_config(scratch);
    config.jobs = 0;
    CHECK_THROWS_WITH_AS(run::run(plan, config), doctest::Contains("jobs"), std::runtime_error);
  }

  SUBCASE("a workdir is required") {
    run::RunConfig config;
    CHECK_THROWS_WITH_AS(run::run(plan, config), doctest::Contains("workdir"),
                         std::runtime_error);
  }
}

TEST_CASE("report json lists nodes in plan order with attempt details") {
  Scratch scratch;
  auto plan = plan_fixture("retry_ignore.osc");
  auto config = sim_config(scratch);
  config.fault_script = scratch.faults({{"unica", {{"outcome", "fail"}, {"log_text", "nope"}}}});
  auto report = run::run(plan, config);

  auto doc = run::to_json(plan, report);
  CHECK(doc["family"] == "F");
  CHECK(doc["adapter"] == "sim");
  CHECK(doc["success"] == true);
  REQUIRE(doc["nodes"].size() == plan.nodes.size());
  const auto& node = doc["nodes"][0];
  CHECK(node["id"] == "unica#0");
  CHECK(node["kind"] == "task");
  CHECK(node["status"] == "ignored");
  CHECK(node["attempts"].size() == 3);
  CHECK(node["attempts"][0]["outcome"] == "nonzero_exit");
  CHECK(node["attempts"][0]["log_excerpt"] == "nope");
  CHECK(node["signal"]["origin"] == "unica#0");
  CHECK(node["signal"]["reason"] == "nonzero_exit");
}
