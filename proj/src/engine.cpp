#include "osc/engine.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace fs = std::filesystem;

namespace osc::run {

const char* to_string(Adapter adapter) {
  return adapter == Adapter::Shell ? "shell" : "sim";
}

const char* to_string(NodeStatus status) {
  switch (status) {
    case NodeStatus::Success: return "success";
    case NodeStatus::Failed: return "failed";
    case NodeStatus::Ignored: return "ignored";
    case NodeStatus::NotRun: return "not_run";
  }
  return "not_run";
}

const char* to_string(FailReason reason) {
  switch (reason) {
    case FailReason::LogMatch: return "log_match";
    case FailReason::Timeout: return "timeout";
    case FailReason::NonzeroExit: return "nonzero_exit";
    case FailReason::NoMajority: return "no_majority";
    case FailReason::TransferFailure: return "transfer_failure";
  }
  return "nonzero_exit";
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good()) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string excerpt_of(const std::string& text) {
  std::string t = text;
  while (!t.empty() && (t.back() == '\n' || t.back() == '\r')) t.pop_back();
  if (t.size() > 200) t = "..." + t.substr(t.size() - 200);
  return t;
}

bool log_matches(const std::string& text, const std::vector<std::string>& patterns) {
  for (const auto& pattern : patterns) {
    std::string body = pattern;
    auto flags = std::regex::ECMAScript;
    if (body.rfind("(?i)", 0) == 0) {
      body = body.substr(4);
      flags |= std::regex::icase;
    }
    if (std::regex_search(text, std::regex(body, flags))) return true;
  }
  return false;
}

// --- fault scripts ---------------------------------------------------------

struct FaultRule {
  std::string path;
  bool has_instance = false;
  int instance = 0;
  bool has_replica = false;
  int replica = 0;
  bool has_attempt = false;
  int attempt = 0;

  std::string outcome = "fail";
  int exit_code = -1;  // -1 picks the outcome default
  std::string log_text;
  double delay = 0.0;
  std::optional<std::string> output_all;
  std::map<std::string, std::string> outputs;

  int specificity() const {
    return (has_instance ? 4 : 0) + (has_replica ? 2 : 0) + (has_attempt ? 1 : 0);
  }
  int effective_exit() const {
    if (exit_code >= 0) return exit_code;
    return outcome == "fail" ? 1 : 0;
  }
};

struct FaultScript {
  std::vector<FaultRule> rules;

  const FaultRule* match(const std::string& path, int instance, int replica, int attempt) const {
    const FaultRule* best = nullptr;
    for (const auto& r : rules) {
      if (r.path != path) continue;
      if (r.has_instance && r.instance != instance) continue;
      if (r.has_replica && r.replica != replica) continue;
      if (r.has_attempt && r.attempt != attempt) continue;
      if (!best || r.specificity() > best->specificity()) best = &r;
    }
    return best;
  }
};

int parse_int(const std::string& text, const std::string& key) {
  try {
    size_t used = 0;
    int value = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw std::runtime_error("bad fault script key '" + key + "'");
  }
}

FaultScript load_fault_script(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw std::runtime_error("cannot read fault script " + path);
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("fault script " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw std::runtime_error("fault script " + path + " must be an object");

  FaultScript script;
  for (const auto& [key, value] : doc.items()) {
    FaultRule rule;
    std::string rest = key;
    if (auto at = rest.rfind('@'); at != std::string::npos) {
      rule.has_attempt = true;
      rule.attempt = parse_int(rest.substr(at + 1), key);
      rest = rest.substr(0, at);
    }
    if (auto rep = rest.rfind("%r"); rep != std::string::npos) {
      rule.has_replica = true;
      rule.replica = parse_int(rest.substr(rep + 2), key);
      rest = rest.substr(0, rep);
    }
    if (auto hash = rest.rfind('#'); hash != std::string::npos) {
      rule.has_instance = true;
      rule.instance = parse_int(rest.substr(hash + 1), key);
      rest = rest.substr(0, hash);
    }
    rule.path = rest;
    if (!value.is_object())
      throw std::runtime_error("fault script entry '" + key + "' must be an object");
    rule.outcome = value.value("outcome", "fail");
    if (rule.outcome != "ok" && rule.outcome != "fail" && rule.outcome != "timeout")
      throw std::runtime_error("fault script entry '" + key + "' has unknown outcome '" +
                               rule.outcome + "'");
    rule.exit_code = value.value("exit_code", -1);
    rule.log_text = value.value("log_text", "");
    rule.delay = value.value("delay", 0.0);
    if (value.contains("output")) rule.output_all = value["output"].get<std::string>();
    if (value.contains("outputs"))
      for (const auto& [slot, text] : value["outputs"].items())
        rule.outputs[slot] = text.get<std::string>();
    script.rules.push_back(std::move(rule));
  }
  return script;
}

// --- process spawning ------------------------------------------------------

struct ExecResult {
  int exit_code = 0;
  bool timed_out = false;
  double duration = 0.0;
  bool launch_failed = false;
};

ExecResult spawn_shell(const std::string& command, const fs::path& stdin_path,
                       const fs::path& stdout_path, const fs::path& stderr_path,
                       std::optional<double> tempo_limite) {
  auto started = std::chrono::steady_clock::now();
  pid_t pid = fork();
  if (pid == 0) {
    setpgid(0, 0);
    int in_fd = open(stdin_path.empty() ? "/dev/null" : stdin_path.c_str(), O_RDONLY);
    if (in_fd >= 0) dup2(in_fd, 0);
    int err_fd = open(stderr_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (err_fd >= 0) dup2(err_fd, 2);
    if (stdout_path.empty() || stdout_path == stderr_path) {
      if (err_fd >= 0) dup2(err_fd, 1);
    } else {
      int out_fd = open(stdout_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      if (out_fd >= 0) dup2(out_fd, 1);
    }
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }

  ExecResult result;
  if (pid < 0) {
    result.exit_code = 127;
    result.launch_failed = true;
    return result;
  }
  setpgid(pid, pid);

  int status = 0;
  while (true) {
    pid_t done = waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0) {
      status = 127 << 8;
      break;
    }
    auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started);
    if (tempo_limite && elapsed.count() > *tempo_limite) {
      kill(-pid, SIGKILL);
      waitpid(pid, &status, 0);
      result.timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  result.duration =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  else if (WIFSIGNALED(status)) result.exit_code = 128 + WTERMSIG(status);
  return result;
}

// --- attempts --------------------------------------------------------------

struct AttemptOutcome {
  bool ok = false;
  FailReason reason = FailReason::NonzeroExit;
  int exit_code = 0;
  double duration = 0.0;
  std::string log_excerpt;
};

bool identifier_shaped(const std::string& name) {
  if (name.empty() || (!std::isalpha(static_cast<unsigned char>(name[0])) && name[0] != '_'))
    return false;
  for (char c : name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

std::string substitute_io(const std::string& tpl, const std::map<std::string, std::string>& inputs,
                          const fs::path& out_dir) {
  std::string out;
  size_t pos = 0;
  while (pos < tpl.size()) {
    size_t open = tpl.find('{', pos);
    if (open == std::string::npos) {
      out += tpl.substr(pos);
      break;
    }
    size_t close = tpl.find('}', open);
    if (close == std::string::npos) {
      out += tpl.substr(pos);
      break;
    }
    out += tpl.substr(pos, open - pos);
    std::string inner = tpl.substr(open + 1, close - open - 1);
    if (inner.rfind("in:", 0) == 0 && identifier_shaped(inner.substr(3))) {
      auto it = inputs.find(inner.substr(3));
      out += it == inputs.end() ? "" : it->second;
    } else if (inner.rfind("out:", 0) == 0 && identifier_shaped(inner.substr(4))) {
      out += (out_dir / inner.substr(4)).string();
    } else {
      out += "{" + inner + "}";
    }
    pos = close + 1;
  }
  return out;
}

class Engine;

struct SlotState {
  std::optional<std::string> artifact;
  std::optional<FailureSignal> signal;
  std::optional<std::string> artifact_id;  // provenance id of the value consumed
};

struct NodeInputs {
  // keyed by input slot; slots with neither entry carry no data (control only)
  std::map<std::string, SlotState> slots;
};

class Engine {
 public:
  Engine(const plan::ExecutionPlan& plan, const RunConfig& config, prov::Recorder* recorder)
      : plan_(plan), config_(config), recorder_(recorder) {}

  RunReport execute();

 private:
  const plan::ExecutionPlan& plan_;
  const RunConfig& config_;
  prov::Recorder* recorder_;
  FaultScript faults_;

  std::vector<NodeResult> results_;
  std::map<std::string, size_t> index_;
  std::vector<std::vector<const plan::PlanEdge*>> incoming_;
  std::vector<std::vector<const plan::PlanEdge*>> outgoing_;

  std::mutex mutex_;
  std::condition_variable cv_;
  std::set<size_t> ready_;
  std::vector<int> pending_deps_;
  std::map<std::string, std::map<int, int>> serial_pending_;  // group -> rank -> unfinished
  bool abort_ = false;
  int in_flight_ = 0;
  std::atomic<std::uint64_t> clock_{0};

  int budget_of(const plan::PlanNode& node) const {
    if (!node.has_retry) return 1;
    if (config_.retries_are_additional) return std::max(0, node.num_tentativas) + 1;
    return std::max(1, node.num_tentativas);
  }

  fs::path node_dir(const plan::PlanNode& node) const {
    return fs::path(config_.workdir) / node.id;
  }

  bool serial_clear(const plan::PlanNode& node) {
    for (const auto& constraint : node.serial) {
      auto group = serial_pending_.find(constraint.group);
      if (group == serial_pending_.end()) continue;
      for (const auto& [rank, left] : group->second) {
        if (rank >= constraint.rank) break;
        if (left > 0) return false;
      }
    }
    return true;
  }

  void refresh_ready_locked() {
    if (abort_) return;
    for (size_t i = 0; i < plan_.nodes.size(); ++i) {
      if (results_[i].status != NodeStatus::NotRun || results_[i].start_time != 0) continue;
      if (ready_.count(i)) continue;
      if (pending_deps_[i] == 0 && serial_clear(plan_.nodes[i])) ready_.insert(i);
    }
  }

  void finish_locked(size_t index);
  void worker();
  NodeResult execute_node(const plan::PlanNode& node, const NodeInputs& inputs);
  NodeResult execute_task(const plan::PlanNode& node, const NodeInputs& inputs);
  void materialize_injected(const plan::PlanNode& node, NodeInputs& inputs);
  NodeResult execute_connector(const plan::PlanNode& node, const NodeInputs& inputs);
  NodeResult execute_join(const plan::PlanNode& node, const NodeInputs& inputs);
  NodeResult execute_mapreduce(const plan::PlanNode& node, const NodeInputs& inputs);
  AttemptOutcome task_attempt(const plan::PlanNode& node, const NodeInputs& inputs, int replica,
                              int attempt, const fs::path& out_dir, const fs::path& log_path);
  AttemptOutcome sim_attempt(const plan::PlanNode& node, int replica, int attempt,
                             const fs::path& out_dir, const fs::path& log_path);
  NodeInputs gather_inputs(const plan::PlanNode& node);
  void record_provenance(const plan::PlanNode& node, const NodeResult& result,
                         const NodeInputs& inputs);
};

// --- simulated attempts ----------------------------------------------------

AttemptOutcome Engine::sim_attempt(const plan::PlanNode& node, int replica, int attempt,
                                   const fs::path& out_dir, const fs::path& log_path) {
  const FaultRule* rule = faults_.match(node.path, node.instance_index, replica, attempt);
  AttemptOutcome out;
  std::string log_text = rule ? rule->log_text : "";
  write_file(log_path, log_text);
  out.log_excerpt = excerpt_of(log_text);
  out.duration = rule ? rule->delay : 0.0;

  bool timed_out = rule && rule->outcome == "timeout";
  if (node.tempo_limite && rule && rule->delay > *node.tempo_limite) timed_out = true;
  if (timed_out) {
    if (node.tempo_limite) out.duration = std::max(out.duration, *node.tempo_limite);
    out.reason = FailReason::Timeout;
    out.exit_code = 124;
    return out;
  }
  if (log_matches(log_text, node.log_padroes)) {
    out.reason = FailReason::LogMatch;
    out.exit_code = rule ? rule->effective_exit() : 0;
    return out;
  }
  int exit_code = rule ? rule->effective_exit() : 0;
  if (exit_code != 0) {
    out.reason = FailReason::NonzeroExit;
    out.exit_code = exit_code;
    return out;
  }
  for (const auto& slot : node.output_slots) {
    std::string content = node.id + "/" + slot + "\n";
    if (rule) {
      if (auto it = rule->outputs.find(slot); it != rule->outputs.end()) content = it->second;
      else if (rule->output_all) content = *rule->output_all;
    }
    write_file(out_dir / slot, content);
  }
  out.ok = true;
  return out;
}

AttemptOutcome Engine::task_attempt(const plan::PlanNode& node, const NodeInputs& inputs,
                                    int replica, int attempt, const fs::path& out_dir,
                                    const fs::path& log_path) {
  fs::create_directories(out_dir);
  if (config_.adapter == Adapter::Simulated)
    return sim_attempt(node, replica, attempt, out_dir, log_path);

  std::map<std::string, std::string> in_paths;
  for (const auto& [slot, state] : inputs.slots)
    if (state.artifact) in_paths[slot] = *state.artifact;
  std::string command = substitute_io(node.comando, in_paths, out_dir);

  ExecResult exec = spawn_shell(command, {}, log_path, log_path, node.tempo_limite);
  AttemptOutcome out;
  out.exit_code = exec.exit_code;
  out.duration = exec.duration;
  std::string log_text = read_file(log_path);
  out.log_excerpt = excerpt_of(log_text);
  if (exec.timed_out) {
    out.reason = FailReason::Timeout;
    return out;
  }
  if (log_matches(log_text, node.log_padroes)) {
    out.reason = FailReason::LogMatch;
    return out;
  }
  if (exec.exit_code != 0) {
    out.reason = FailReason::NonzeroExit;
    return out;
  }
  for (const auto& slot : node.output_slots) {
    fs::path artifact = out_dir / slot;
    if (!fs::exists(artifact)) write_file(artifact, "");
  }
  out.ok = true;
  return out;
}

// --- node execution --------------------------------------------------------

NodeResult Engine::execute_task(const plan::PlanNode& node, const NodeInputs& inputs) {
  NodeResult result;
  result.id = node.id;
  fs::path dir = node_dir(node);
  int budget = budget_of(node);

  auto clear_outputs = [&](const fs::path& out_dir) {
    for (const auto& slot : node.output_slots) fs::remove_all(out_dir / slot);
  };

  if (node.num_copias > 0) {
    int copies = node.num_copias;
    std::vector<std::optional<fs::path>> replica_dirs(copies);
    FailReason last_reason = FailReason::NonzeroExit;
    int total_attempts = 0;
    bool any_success = false;
    for (int replica = 0; replica < copies; ++replica) {
      fs::path rep_dir = dir / ("r" + std::to_string(replica));
      for (int attempt = 1; attempt <= budget; ++attempt) {
        fs::path log_path =
            dir / ("r" + std::to_string(replica) + "_log_a" + std::to_string(attempt) + ".txt");
        AttemptOutcome out = task_attempt(node, inputs, replica, attempt, rep_dir, log_path);
        ++total_attempts;
        AttemptRecord record{attempt, replica,
                             out.ok ? std::optional<FailReason>{} : std::optional{out.reason},
                             out.exit_code, out.duration, out.log_excerpt};
        result.attempts.push_back(std::move(record));
        if (out.ok) {
          replica_dirs[replica] = rep_dir;
          any_success = true;
          break;
        }
        clear_outputs(rep_dir);
        last_reason = out.reason;
      }
    }

    bool voted = true;
    for (const auto& slot : node.output_slots) {
      std::map<std::string, std::pair<int, int>> tally;  // content -> {count, first replica}
      for (int replica = 0; replica < copies; ++replica) {
        if (!replica_dirs[replica]) continue;
        std::string content = read_file(*replica_dirs[replica] / slot);
        auto [it, inserted] = tally.try_emplace(content, std::pair<int, int>{0, replica});
        ++it->second.first;
      }
      const std::pair<int, int>* winner = nullptr;
      for (const auto& [content, info] : tally)
        if (info.first * 2 > copies) winner = &info;
      if (!winner) {
        voted = false;
        break;
      }
      fs::path source = dir / ("r" + std::to_string(winner->second)) / slot;
      fs::remove_all(dir / slot);
      fs::copy(source, dir / slot, fs::copy_options::recursive);
    }
    if (voted) {
      result.status = NodeStatus::Success;
      for (const auto& slot : node.output_slots) result.outputs[slot] = (dir / slot).string();
      return result;
    }
    FailReason reason = any_success ? FailReason::NoMajority : last_reason;
    result.status = node.ignorar ? NodeStatus::Ignored : NodeStatus::Failed;
    result.signal = FailureSignal{node.id, total_attempts, reason};
    return result;
  }

  FailReason last_reason = FailReason::NonzeroExit;
  for (int attempt = 1; attempt <= budget; ++attempt) {
    fs::path log_path = dir / ("log_a" + std::to_string(attempt) + ".txt");
    AttemptOutcome out = task_attempt(node, inputs, -1, attempt, dir, log_path);
    AttemptRecord record{attempt, -1,
                         out.ok ? std::optional<FailReason>{} : std::optional{out.reason},
                         out.exit_code, out.duration, out.log_excerpt};
    result.attempts.push_back(std::move(record));
    if (out.ok) {
      result.status = NodeStatus::Success;
      for (const auto& slot : node.output_slots) result.outputs[slot] = (dir / slot).string();
      return result;
    }
    clear_outputs(dir);
    last_reason = out.reason;
  }
  result.status = node.ignorar ? NodeStatus::Ignored : NodeStatus::Failed;
  result.signal = FailureSignal{node.id, budget, last_reason};
  return result;
}

void Engine::materialize_injected(const plan::PlanNode& node, NodeInputs& inputs) {
  // Bifurcacao faces inject sweep items in place of an upstream edge.
  fs::path dir = node_dir(node);
  for (const auto& [slot, injected] : node.injected) {
    SlotState& state = inputs.slots[slot];
    if (state.artifact || state.signal) continue;
    fs::path target = dir / slot;
    if (injected.kind == plan::DatasetKind::Files)
      fs::copy_file(injected.item, target, fs::copy_options::overwrite_existing);
    else
      write_file(target, injected.item);
    state.artifact = target.string();
    state.artifact_id = node.id + "/" + slot;
  }
}

NodeResult Engine::execute_connector(const plan::PlanNode& node, const NodeInputs& inputs) {
  NodeResult result;
  result.id = node.id;

  int budget = budget_of(node);
  for (int attempt = 1; attempt <= budget; ++attempt) {
    const FaultRule* rule = faults_.match(node.path, node.instance_index, -1, attempt);
    if (rule && rule->outcome != "ok") {
      result.attempts.push_back({attempt, -1, FailReason::TransferFailure, rule->effective_exit(),
                                 rule->delay, excerpt_of(rule->log_text)});
      continue;
    }
    const std::string* chosen_slot = nullptr;
    if (node.propagacao) {
      for (const auto& slot : node.input_slots) {
        auto it = inputs.slots.find(slot);
        if (it != inputs.slots.end() && it->second.signal) continue;
        chosen_slot = &slot;
        break;
      }
      if (!chosen_slot) {
        // Every source was discarded; retrying cannot change that.
        result.attempts.push_back({attempt, -1, FailReason::TransferFailure, 1, 0.0, ""});
        result.status = node.ignorar ? NodeStatus::Ignored : NodeStatus::Failed;
        result.signal = FailureSignal{node.id, attempt, FailReason::TransferFailure};
        return result;
      }
    } else if (!node.input_slots.empty()) {
      auto it = inputs.slots.find(node.input_slots.front());
      if (it != inputs.slots.end() && it->second.signal) {
        // A plain connector passes the producer's signal through untouched.
        result.status = NodeStatus::Ignored;
        result.signal = it->second.signal;
        return result;
      }
      chosen_slot = &node.input_slots.front();
    }
    result.attempts.push_back({attempt, -1, std::nullopt, 0, 0.0, ""});
    result.status = NodeStatus::Success;
    std::string artifact;
    if (chosen_slot) {
      auto state = inputs.slots.find(*chosen_slot);
      if (state != inputs.slots.end() && state->second.artifact) artifact = *state->second.artifact;
    }
    for (const auto& slot : node.output_slots) result.outputs[slot] = artifact;
    return result;
  }
  result.status = node.ignorar ? NodeStatus::Ignored : NodeStatus::Failed;
  result.signal = FailureSignal{node.id, budget, FailReason::TransferFailure};
  return result;
}

void apply_join(const std::string& formato, const fs::path& destino,
                const std::vector<std::pair<int, fs::path>>& parts) {
  auto claim = [](std::set<std::string>& taken, const std::string& name, int instance) {
    if (taken.insert(name).second) return name;
    std::string renamed = name + ".__i" + std::to_string(instance);
    taken.insert(renamed);
    return renamed;
  };

  if (formato == "concat") {
    std::ofstream out(destino, std::ios::binary | std::ios::trunc);
    if (!out.good()) throw std::runtime_error("cannot write " + destino.string());
    for (const auto& [instance, part] : parts) {
      if (!fs::is_regular_file(part))
        throw std::runtime_error("concat join expects files, instance " +
                                 std::to_string(instance) + " produced " + part.string());
      out << read_file(part);
    }
    return;
  }
  if (formato == "include") {
    fs::create_directories(destino);
    std::set<std::string> taken;
    for (const auto& [instance, part] : parts) {
      if (!fs::is_regular_file(part))
        throw std::runtime_error("include join expects files, instance " +
                                 std::to_string(instance) + " produced " + part.string());
      fs::copy_file(part, destino / claim(taken, part.filename().string(), instance),
                    fs::copy_options::overwrite_existing);
    }
    return;
  }
  if (formato == "merge") {
    fs::create_directories(destino);
    std::set<std::string> taken;
    for (const auto& [instance, part] : parts) {
      if (!fs::is_directory(part))
        throw std::runtime_error("merge join expects directories, instance " +
                                 std::to_string(instance) + " produced " + part.string());
      std::vector<std::string> names;
      for (const auto& entry : fs::directory_iterator(part))
        names.push_back(entry.path().filename().string());
      std::sort(names.begin(), names.end());
      for (const auto& name : names)
        fs::copy(part / name, destino / claim(taken, name, instance),
                 fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    }
    return;
  }
  throw std::runtime_error("unknown join formato '" + formato + "'");
}

NodeResult Engine::execute_join(const plan::PlanNode& node, const NodeInputs& inputs) {
  NodeResult result;
  result.id = node.id;
  fs::path dir = node_dir(node);
  fs::create_directories(dir);

  std::vector<std::pair<int, fs::path>> parts;
  for (int part = 0; part < node.join_parts; ++part) {
    auto it = inputs.slots.find(std::to_string(part));
    if (it == inputs.slots.end() || !it->second.artifact) continue;  // ignored instance
    parts.emplace_back(part, *it->second.artifact);
  }

  fs::path destino = dir / node.join_destino;
  try {
    apply_join(node.join_formato, destino, parts);
  } catch (const std::runtime_error& e) {
    result.attempts.push_back({1, -1, FailReason::NonzeroExit, 1, 0.0, e.what()});
    result.status = NodeStatus::Failed;
    result.signal = FailureSignal{node.id, 1, FailReason::NonzeroExit};
    return result;
  }
  result.attempts.push_back({1, -1, std::nullopt, 0, 0.0, ""});
  result.status = NodeStatus::Success;
  result.outputs[node.output_slots.front()] = destino.string();
  return result;
}

// Splits whole lines into `chunks` contiguous runs, earlier runs longer.
std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) lines.push_back(current);
  return lines;
}

NodeResult Engine::execute_mapreduce(const plan::PlanNode& node, const NodeInputs& inputs) {
  if (config_.adapter == Adapter::Simulated) return execute_task(node, inputs);

  NodeResult result;
  result.id = node.id;
  fs::path dir = node_dir(node);
  fs::create_directories(dir);
  const std::string& out_slot = node.output_slots.front();

  std::string input_text;
  for (const auto& [slot, state] : inputs.slots)
    if (state.artifact) input_text = read_file(*state.artifact);

  auto fail = [&](FailReason reason, int exit_code, const std::string& excerpt) {
    result.attempts.push_back({1, -1, reason, exit_code, 0.0, excerpt});
    result.status = NodeStatus::Failed;
    result.signal = FailureSignal{node.id, 1, reason};
    return result;
  };
  auto child_failure = [&](const ExecResult& exec, const fs::path& log_path,
                           const std::string& what) -> std::optional<NodeResult> {
    std::string log_text = read_file(log_path);
    if (exec.timed_out) return fail(FailReason::Timeout, exec.exit_code, what + " timed out");
    if (log_matches(log_text, node.log_padroes))
      return fail(FailReason::LogMatch, exec.exit_code, excerpt_of(log_text));
    if (exec.exit_code != 0)
      return fail(FailReason::NonzeroExit, exec.exit_code,
                  excerpt_of(log_text.empty() ? what + " failed" : log_text));
    return std::nullopt;
  };

  std::vector<std::string> lines = split_lines(input_text);
  if (lines.empty()) {
    write_file(dir / out_slot, "");
    result.attempts.push_back({1, -1, std::nullopt, 0, 0.0, ""});
    result.status = NodeStatus::Success;
    result.outputs[out_slot] = (dir / out_slot).string();
    return result;
  }

  int chunks = std::min<int>(4, static_cast<int>(lines.size()));
  int base = static_cast<int>(lines.size()) / chunks;
  int extra = static_cast<int>(lines.size()) % chunks;

  struct Emission {
    std::string key;
    std::string line;
  };
  std::vector<Emission> emissions;
  size_t next_line = 0;
  for (int split = 0; split < chunks; ++split) {
    int count = base + (split < extra ? 1 : 0);
    std::string chunk;
    for (int i = 0; i < count; ++i) chunk += lines[next_line++] + "\n";
    fs::path split_path = dir / ("split_" + std::to_string(split) + ".txt");
    fs::path map_out = dir / ("map_" + std::to_string(split) + ".out");
    fs::path map_log = dir / ("map_" + std::to_string(split) + ".log");
    write_file(split_path, chunk);
    ExecResult exec = spawn_shell(node.map_comando, split_path, map_out, map_log,
                                  node.tempo_limite);
    if (exec.launch_failed) return fail(FailReason::NonzeroExit, 127, "map launch failed");
    if (auto failed = child_failure(exec, map_log, "map")) return *failed;
    for (const auto& line : split_lines(read_file(map_out))) {
      auto tab = line.find('\t');
      if (tab == std::string::npos)
        return fail(FailReason::NonzeroExit, 1, "map emitted a line without a tab: " + line);
      emissions.push_back({line.substr(0, tab), line});
    }
  }

  std::stable_sort(emissions.begin(), emissions.end(),
                   [](const Emission& a, const Emission& b) { return a.key < b.key; });

  std::string output;
  size_t group = 0;
  int group_index = 0;
  while (group < emissions.size()) {
    size_t end = group;
    std::string grouped;
    while (end < emissions.size() && emissions[end].key == emissions[group].key)
      grouped += emissions[end++].line + "\n";
    fs::path group_path = dir / ("group_" + std::to_string(group_index) + ".txt");
    fs::path reduce_out = dir / ("reduce_" + std::to_string(group_index) + ".out");
    fs::path reduce_log = dir / ("reduce_" + std::to_string(group_index) + ".log");
    write_file(group_path, grouped);
    ExecResult exec = spawn_shell(node.reduce_comando, group_path, reduce_out, reduce_log,
                                  node.tempo_limite);
    if (exec.launch_failed) return fail(FailReason::NonzeroExit, 127, "reduce launch failed");
    if (auto failed = child_failure(exec, reduce_log, "reduce")) return *failed;
    output += read_file(reduce_out);
    group = end;
    ++group_index;
  }

  write_file(dir / out_slot, output);
  result.attempts.push_back({1, -1, std::nullopt, 0, 0.0, ""});
  result.status = NodeStatus::Success;
  result.outputs[out_slot] = (dir / out_slot).string();
  return result;
}

NodeResult Engine::execute_node(const plan::PlanNode& node, const NodeInputs& inputs) {
  switch (node.kind) {
    case plan::NodeKind::Task: return execute_task(node, inputs);
    case plan::NodeKind::Connector: return execute_connector(node, inputs);
    case plan::NodeKind::Join: return execute_join(node, inputs);
    case plan::NodeKind::MapReduce: return execute_mapreduce(node, inputs);
  }
  throw std::runtime_error("internal: unknown node kind");
}

// --- coordinator -----------------------------------------------------------

NodeInputs Engine::gather_inputs(const plan::PlanNode& node) {
  NodeInputs inputs;
  size_t index = index_.at(node.id);
  for (const auto* edge : incoming_[index]) {
    if (edge->payload != model::DependencyKind::Data) continue;
    const NodeResult& producer = results_[index_.at(edge->from)];
    SlotState& state = inputs.slots[edge->to_slot];
    if (producer.status == NodeStatus::Success) {
      auto it = producer.outputs.find(edge->from_slot);
      state.artifact = it == producer.outputs.end() ? "" : it->second;
      state.artifact_id = edge->from + "/" + edge->from_slot;
    } else if (producer.signal) {
      state.signal = producer.signal;
    } else {
      state.signal = FailureSignal{edge->from, 0, FailReason::NonzeroExit};
    }
  }
  return inputs;
}

void Engine::record_provenance(const plan::PlanNode& node, const NodeResult& result,
                               const NodeInputs& inputs) {
  if (!recorder_) return;
  recorder_->process_start(node.id, node.path, node.versions, node.scopes);

  size_t index = index_.at(node.id);
  for (const auto* edge : incoming_[index])
    if (edge->payload == model::DependencyKind::Control)
      recorder_->triggered(edge->from, node.id);

  std::optional<std::string> derived;
  for (const auto& slot : node.input_slots) {
    auto it = inputs.slots.find(slot);
    if (it == inputs.slots.end() || !it->second.artifact_id) continue;
    if (node.kind == plan::NodeKind::Connector && node.injected.count(slot) &&
        *it->second.artifact_id == node.id + "/" + slot) {
      auto versions = node.slot_versions.count(slot) ? node.slot_versions.at(slot)
                                                     : node.versions;
      recorder_->artifact_created(*it->second.artifact_id, it->second.artifact.value_or(""),
                                  "", slot, versions, std::nullopt, node.scopes);
    }
    recorder_->data_used(node.id, *it->second.artifact_id, slot);
    if (node.kind == plan::NodeKind::Connector && !derived && !it->second.signal)
      derived = it->second.artifact_id;
  }

  if (result.status == NodeStatus::Success) {
    for (const auto& slot : node.output_slots) {
      auto out = result.outputs.find(slot);
      auto versions = node.slot_versions.count(slot) ? node.slot_versions.at(slot)
                                                     : node.versions;
      recorder_->artifact_created(node.id + "/" + slot,
                                  out == result.outputs.end() ? "" : out->second, node.id, slot,
                                  versions, node.kind == plan::NodeKind::Connector ? derived
                                                                                   : std::nullopt,
                                  node.scopes);
    }
  }
  recorder_->process_end(node.id, to_string(result.status), static_cast<int>(result.attempts.size()));
}

void Engine::finish_locked(size_t index) {
  const plan::PlanNode& node = plan_.nodes[index];
  const NodeResult& result = results_[index];

  for (const auto& constraint : node.serial) --serial_pending_[constraint.group][constraint.rank];

  if (result.status == NodeStatus::Failed) {
    abort_ = true;
    ready_.clear();
    return;
  }
  if (result.status == NodeStatus::Ignored) {
    for (const auto* edge : outgoing_[index]) {
      if (edge->payload != model::DependencyKind::Data) continue;
      const plan::PlanNode& consumer = plan_.nodes[index_.at(edge->to)];
      // Connectors forward or discard signals and joins omit the part; a task
      // fed a signal has nothing to run on, so the run stops.
      bool consumes = consumer.kind == plan::NodeKind::Join ||
                      consumer.kind == plan::NodeKind::Connector;
      if (!consumes) {
        results_[index_.at(edge->to)].signal = result.signal;
        abort_ = true;
        ready_.clear();
        return;
      }
    }
  }
  for (const auto* edge : outgoing_[index]) --pending_deps_[index_.at(edge->to)];
  refresh_ready_locked();
}

void Engine::worker() {
  std::unique_lock<std::mutex> lock(mutex_);
  while (true) {
    cv_.wait(lock, [&] { return !ready_.empty() || (in_flight_ == 0 && ready_.empty()); });
    if (ready_.empty()) {
      cv_.notify_all();
      return;
    }
    size_t index = *ready_.begin();
    ready_.erase(ready_.begin());
    ++in_flight_;
    const plan::PlanNode& node = plan_.nodes[index];
    NodeInputs inputs = gather_inputs(node);
    results_[index].start_time = ++clock_;
    lock.unlock();

    NodeResult result;
    try {
      fs::create_directories(node_dir(node));
      if (node.kind == plan::NodeKind::Connector) materialize_injected(node, inputs);
      result = execute_node(node, inputs);
    } catch (const std::exception& e) {
      result = NodeResult{};
      result.id = node.id;
      result.status = NodeStatus::Failed;
      result.attempts.push_back({1, -1, FailReason::NonzeroExit, 1, 0.0, excerpt_of(e.what())});
      result.signal = FailureSignal{node.id, 1, FailReason::NonzeroExit};
    }
    record_provenance(node, result, inputs);

    lock.lock();
    result.start_time = results_[index].start_time;
    result.end_time = ++clock_;
    results_[index] = std::move(result);
    --in_flight_;
    finish_locked(index);
    cv_.notify_all();
  }
}

RunReport Engine::execute() {
  if (config_.workdir.empty()) throw std::runtime_error("run needs a workdir");
  if (config_.jobs < 1) throw std::runtime_error("jobs must be at least 1");
  std::error_code ec;
  fs::create_directories(config_.workdir, ec);
  if (ec || !fs::is_directory(config_.workdir))
    throw std::runtime_error("cannot create workdir " + config_.workdir);
  if (!config_.fault_script.empty()) {
    if (config_.adapter == Adapter::Shell)
      throw std::runtime_error("fault scripts apply to the simulated adapter only");
    faults_ = load_fault_script(config_.fault_script);
  }
  for (const auto& node : plan_.nodes) {
    for (const auto& pattern : node.log_padroes) {
      try {
        log_matches("", {pattern});
      } catch (const std::regex_error&) {
        throw std::runtime_error("invalid log pattern '" + pattern + "' on " + node.id);
      }
    }
  }

  results_.resize(plan_.nodes.size());
  incoming_.resize(plan_.nodes.size());
  outgoing_.resize(plan_.nodes.size());
  pending_deps_.assign(plan_.nodes.size(), 0);
  for (size_t i = 0; i < plan_.nodes.size(); ++i) {
    results_[i].id = plan_.nodes[i].id;
    index_[plan_.nodes[i].id] = i;
  }
  for (const auto& edge : plan_.edges) {
    incoming_[index_.at(edge.to)].push_back(&edge);
    outgoing_[index_.at(edge.from)].push_back(&edge);
    ++pending_deps_[index_.at(edge.to)];
  }
  for (const auto& node : plan_.nodes)
    for (const auto& constraint : node.serial)
      ++serial_pending_[constraint.group][constraint.rank];

  if (recorder_) {
    std::set<std::string> versions;
    for (const auto& node : plan_.nodes) {
      versions.insert(node.versions.begin(), node.versions.end());
      for (const auto& [slot, tags] : node.slot_versions)
        versions.insert(tags.begin(), tags.end());
    }
    for (const auto& flow : plan_.flows) {
      versions.insert(flow.opm_versions.begin(), flow.opm_versions.end());
      if (flow.alta) versions.insert(flow.alta->begin(), flow.alta->end());
      if (flow.baixa) versions.insert(flow.baixa->begin(), flow.baixa->end());
    }
    recorder_->run_meta(plan_.family, to_string(config_.adapter), config_.jobs, plan_.flows,
                        {versions.begin(), versions.end()});
  }

  refresh_ready_locked();
  std::vector<std::thread> workers;
  for (int i = 0; i < config_.jobs; ++i) workers.emplace_back([this] { worker(); });
  for (auto& thread : workers) thread.join();

  RunReport report;
  report.family = plan_.family;
  report.adapter = to_string(config_.adapter);
  report.jobs = config_.jobs;
  report.nodes = std::move(results_);
  report.success = !abort_;
  for (const auto& node : report.nodes)
    if (node.status == NodeStatus::Failed || node.status == NodeStatus::NotRun)
      report.success = false;
  return report;
}

}  // namespace

nlohmann::ordered_json to_json(const plan::ExecutionPlan& plan, const RunReport& report) {
  nlohmann::ordered_json doc;
  doc["family"] = report.family;
  doc["adapter"] = report.adapter;
  doc["jobs"] = report.jobs;
  doc["success"] = report.success;
  doc["nodes"] = nlohmann::ordered_json::array();
  for (const auto& node : report.nodes) {
    const plan::PlanNode* planned = plan.find(node.id);
    nlohmann::ordered_json n;
    n["id"] = node.id;
    if (planned) n["kind"] = plan::to_string(planned->kind);
    n["status"] = to_string(node.status);
    n["start"] = node.start_time;
    n["end"] = node.end_time;
    n["attempts"] = nlohmann::ordered_json::array();
    for (const auto& attempt : node.attempts) {
      nlohmann::ordered_json a;
      a["index"] = attempt.index;
      if (attempt.replica >= 0) a["replica"] = attempt.replica;
      a["outcome"] = attempt.failure ? to_string(*attempt.failure) : "ok";
      a["exit_code"] = attempt.exit_code;
      a["duration"] = attempt.duration;
      if (!attempt.log_excerpt.empty()) a["log_excerpt"] = attempt.log_excerpt;
      n["attempts"].push_back(std::move(a));
    }
    if (!node.outputs.empty()) {
      n["outputs"] = nlohmann::ordered_json::object();
      for (const auto& [slot, path] : node.outputs) n["outputs"][slot] = path;
    }
    if (node.signal) {
      n["signal"] = {{"origin", node.signal->origin},
                     {"attempts", node.signal->attempt_count},
                     {"reason", to_string(node.signal->reason)}};
    }
    doc["nodes"].push_back(std::move(n));
  }
  return doc;
}

RunReport run(const plan::ExecutionPlan& plan, const RunConfig& config,
              prov::Recorder* recorder) {
  Engine engine(plan, config, recorder);
  return engine.execute();
}

}  // namespace osc::run
