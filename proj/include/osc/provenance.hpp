#pragma once

#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "osc/planner.hpp"

namespace osc::prov {

/// Append-only event log with a process-wide logical clock. Safe to call from
/// concurrent engine workers; every event gets a unique, increasing tick.
class Recorder {
 public:
  explicit Recorder(const std::string& events_path);

  std::uint64_t tick();

  void run_meta(const std::string& family, const std::string& adapter, int jobs,
                const std::vector<plan::FlowMeta>& flows,
                const std::vector<std::string>& known_versions);
  void process_start(const std::string& id, const std::string& label,
                     const std::vector<std::string>& versions,
                     const std::vector<plan::ScopeRef>& scopes);
  void process_end(const std::string& id, const std::string& status, int attempts);
  void artifact_created(const std::string& id, const std::string& value,
                        const std::string& generated_by, const std::string& role,
                        const std::vector<std::string>& versions,
                        const std::optional<std::string>& derived_from,
                        const std::vector<plan::ScopeRef>& scopes);
  void data_used(const std::string& process, const std::string& artifact,
                 const std::string& role);
  void triggered(const std::string& producer, const std::string& consumer);

  const std::string& path() const { return path_; }

 private:
  void write(nlohmann::ordered_json event);

  std::string path_;
  std::ofstream out_;
  std::mutex mutex_;
  std::uint64_t clock_ = 0;
};

/// Versions any element, interface point, or granularity set of the recorded
/// run mentions. Empty when the run carried no version tags at all.
std::vector<std::string> known_versions(const std::string& events_path);

/// Projects the recorded run onto one version: only nodes tagged with the
/// version appear, flows marked BaixaGranularidade for it collapse to a single
/// process with boundary artifacts re-attached. `granularity_overrides` maps a
/// flow path to "alta" or "baixa" and wins over the recorded configuration.
/// Throws std::runtime_error for versions the run does not know (unless the
/// run knows none at all, which exports an empty graph).
nlohmann::ordered_json export_opm(const std::string& events_path, const std::string& version,
                                  const std::map<std::string, std::string>& granularity_overrides = {});

}  // namespace osc::prov
