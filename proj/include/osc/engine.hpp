#pragma once

#include <cstdint>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "osc/planner.hpp"
#include "osc/provenance.hpp"

namespace osc::run {

enum class Adapter { Simulated, Shell };
const char* to_string(Adapter adapter);

enum class NodeStatus { Success, Failed, Ignored, NotRun };
const char* to_string(NodeStatus status);

enum class FailReason { LogMatch, Timeout, NonzeroExit, NoMajority, TransferFailure };
const char* to_string(FailReason reason);

struct RunConfig {
  Adapter adapter = Adapter::Simulated;
  int jobs = 1;
  std::string workdir;
  std::string fault_script;  // path to a JSON fault script, simulated runs only
  bool retries_are_additional = false;
};

struct AttemptRecord {
  int index = 1;      // 1-based attempt number
  int replica = -1;   // replica number for masked execution, -1 otherwise
  std::optional<FailReason> failure;  // empty means the attempt succeeded
  int exit_code = 0;
  double duration = 0.0;
  std::string log_excerpt;
};

struct FailureSignal {
  std::string origin;
  int attempt_count = 1;
  FailReason reason = FailReason::NonzeroExit;
};

struct NodeResult {
  std::string id;
  NodeStatus status = NodeStatus::NotRun;
  std::vector<AttemptRecord> attempts;
  std::map<std::string, std::string> outputs;  // slot -> artifact path
  std::optional<FailureSignal> signal;
  std::uint64_t start_time = 0;  // logical ticks, 0 = never started
  std::uint64_t end_time = 0;
};

struct RunReport {
  std::string family;
  std::string adapter;
  int jobs = 1;
  bool success = false;
  std::vector<NodeResult> nodes;  // plan node order
};

nlohmann::ordered_json to_json(const plan::ExecutionPlan& plan, const RunReport& report);

/// Executes the plan under `config`, recording provenance events through
/// `recorder` when given. Throws std::runtime_error on configuration faults
/// (unwritable workdir, unreadable fault script); execution failures are
/// reported through the returned RunReport instead.
RunReport run(const plan::ExecutionPlan& plan, const RunConfig& config,
              prov::Recorder* recorder = nullptr);

}  // namespace osc::run
