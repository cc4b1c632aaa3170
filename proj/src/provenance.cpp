#include "osc/provenance.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace osc::prov {

using nlohmann::ordered_json;

Recorder::Recorder(const std::string& events_path) : path_(events_path) {
  out_.open(events_path, std::ios::binary | std::ios::trunc);
  if (!out_.good()) throw std::runtime_error("cannot open event log " + events_path);
}

std::uint64_t Recorder::tick() {
  std::lock_guard<std::mutex> lock(mutex_);
  return ++clock_;
}

void Recorder::write(ordered_json event) {
  std::lock_guard<std::mutex> lock(mutex_);
  event["logical_time"] = ++clock_;
  out_ << event.dump() << "\n";
  out_.flush();
}

namespace {

ordered_json scopes_json(const std::vector<plan::ScopeRef>& scopes) {
  ordered_json out = ordered_json::array();
  for (const auto& s : scopes) out.push_back({{"flow", s.flow}, {"replica", s.replica}});
  return out;
}

}  // namespace

void Recorder::run_meta(const std::string& family, const std::string& adapter, int jobs,
                        const std::vector<plan::FlowMeta>& flows,
                        const std::vector<std::string>& known_versions) {
  ordered_json flows_json = ordered_json::array();
  for (const auto& f : flows) {
    ordered_json j;
    j["path"] = f.path;
    j["opm_versions"] = f.opm_versions;
    if (f.alta) j["alta"] = *f.alta;
    if (f.baixa) j["baixa"] = *f.baixa;
    flows_json.push_back(std::move(j));
  }
  write({{"kind", "run_meta"},
         {"family", family},
         {"adapter", adapter},
         {"jobs", jobs},
         {"flows", flows_json},
         {"known_versions", known_versions}});
}

void Recorder::process_start(const std::string& id, const std::string& label,
                             const std::vector<std::string>& versions,
                             const std::vector<plan::ScopeRef>& scopes) {
  write({{"kind", "process_start"},
         {"subject", id},
         {"label", label},
         {"versions", versions},
         {"scopes", scopes_json(scopes)}});
}

void Recorder::process_end(const std::string& id, const std::string& status, int attempts) {
  write({{"kind", "process_end"}, {"subject", id}, {"status", status}, {"attempts", attempts}});
}

void Recorder::artifact_created(const std::string& id, const std::string& value,
                                const std::string& generated_by, const std::string& role,
                                const std::vector<std::string>& versions,
                                const std::optional<std::string>& derived_from,
                                const std::vector<plan::ScopeRef>& scopes) {
  ordered_json e = {{"kind", "artifact_created"},
                    {"subject", id},
                    {"value", value},
                    {"generated_by", generated_by},
                    {"role", role},
                    {"versions", versions},
                    {"scopes", scopes_json(scopes)}};
  if (derived_from) e["derived_from"] = *derived_from;
  write(std::move(e));
}

void Recorder::data_used(const std::string& process, const std::string& artifact,
                         const std::string& role) {
  write({{"kind", "data_used"}, {"subject", process}, {"artifact", artifact}, {"role", role}});
}

void Recorder::triggered(const std::string& producer, const std::string& consumer) {
  write({{"kind", "triggered"}, {"subject", consumer}, {"source", producer}});
}

namespace {

struct Process {
  std::string id;
  std::string label;
  std::uint64_t start = 0;
  std::uint64_t end = 0;
  std::vector<std::string> versions;
  std::vector<plan::ScopeRef> scopes;
};

struct Artifact {
  std::string id;
  std::string value;
  std::string generated_by;
  std::string role;
  std::vector<std::string> versions;
  std::vector<plan::ScopeRef> scopes;
  std::optional<std::string> derived_from;
};

struct UsedEdge {
  std::string process;
  std::string artifact;
  std::string role;
};

struct TriggerEdge {
  std::string producer;
  std::string consumer;
};

struct EventLog {
  std::string family;
  std::string adapter;
  std::vector<plan::FlowMeta> flows;
  std::vector<std::string> known;
  bool has_meta = false;
  std::vector<Process> processes;
  std::vector<Artifact> artifacts;
  std::vector<UsedEdge> used;
  std::vector<TriggerEdge> triggers;
};

std::vector<plan::ScopeRef> scopes_of(const nlohmann::json& j) {
  std::vector<plan::ScopeRef> out;
  if (!j.contains("scopes")) return out;
  for (const auto& s : j["scopes"])
    out.push_back({s["flow"].get<std::string>(), s["replica"].get<int>()});
  return out;
}

EventLog load_events(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw std::runtime_error("cannot read event log " + path);
  EventLog log;
  std::map<std::string, size_t> by_id;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json e = nlohmann::json::parse(line);
    std::string kind = e.value("kind", "");
    if (kind == "run_meta") {
      log.has_meta = true;
      log.family = e.value("family", "");
      log.adapter = e.value("adapter", "");
      for (const auto& f : e["flows"]) {
        plan::FlowMeta meta;
        meta.path = f["path"].get<std::string>();
        meta.opm_versions = f["opm_versions"].get<std::vector<std::string>>();
        if (f.contains("alta")) meta.alta = f["alta"].get<std::vector<std::string>>();
        if (f.contains("baixa")) meta.baixa = f["baixa"].get<std::vector<std::string>>();
        log.flows.push_back(std::move(meta));
      }
      log.known = e["known_versions"].get<std::vector<std::string>>();
    } else if (kind == "process_start") {
      Process p;
      p.id = e["subject"].get<std::string>();
      p.label = e.value("label", p.id);
      p.start = e["logical_time"].get<std::uint64_t>();
      p.versions = e["versions"].get<std::vector<std::string>>();
      p.scopes = scopes_of(e);
      by_id[p.id] = log.processes.size();
      log.processes.push_back(std::move(p));
    } else if (kind == "process_end") {
      auto it = by_id.find(e["subject"].get<std::string>());
      if (it != by_id.end())
        log.processes[it->second].end = e["logical_time"].get<std::uint64_t>();
    } else if (kind == "artifact_created") {
      Artifact a;
      a.id = e["subject"].get<std::string>();
      a.value = e.value("value", "");
      a.generated_by = e.value("generated_by", "");
      a.role = e.value("role", "");
      a.versions = e["versions"].get<std::vector<std::string>>();
      a.scopes = scopes_of(e);
      if (e.contains("derived_from")) a.derived_from = e["derived_from"].get<std::string>();
      log.artifacts.push_back(std::move(a));
    } else if (kind == "data_used") {
      log.used.push_back({e["subject"].get<std::string>(), e["artifact"].get<std::string>(),
                          e.value("role", "")});
    } else if (kind == "triggered") {
      log.triggers.push_back({e["source"].get<std::string>(), e["subject"].get<std::string>()});
    }
  }
  if (!log.has_meta) throw std::runtime_error("event log " + path + " has no run metadata");
  return log;
}

bool contains(const std::vector<std::string>& versions, const std::string& v) {
  return std::find(versions.begin(), versions.end(), v) != versions.end();
}

struct Exporter {
  const EventLog& log;
  const std::string& version;
  const std::map<std::string, std::string>& overrides;

  std::map<std::string, const plan::FlowMeta*> flow_meta;
  std::set<std::string> baixa_flows;  // flows collapsed for this version

  void decide_modes() {
    for (const auto& f : log.flows) flow_meta[f.path] = &f;
    for (const auto& f : log.flows) {
      auto ov = overrides.find(f.path);
      if (ov != overrides.end()) {
        if (ov->second == "baixa") baixa_flows.insert(f.path);
        else if (ov->second != "alta")
          throw std::runtime_error("granularity override for " + f.path +
                                   " must be alta or baixa");
        continue;
      }
      if (f.baixa && (f.baixa->empty() || contains(*f.baixa, version)))
        baixa_flows.insert(f.path);
    }
  }

  // Collapsed process id owning this scope chain, or empty when uncollapsed.
  std::string group_of(const std::vector<plan::ScopeRef>& scopes) const {
    for (const auto& s : scopes)
      if (baixa_flows.count(s.flow))
        return s.flow + "#" + std::to_string(s.replica);
    return "";
  }

  std::string map_process(const Process& p) const {
    std::string g = group_of(p.scopes);
    return g.empty() ? p.id : g;
  }

  std::vector<std::string> collapsed_versions(const std::string& flow) const {
    auto it = flow_meta.find(flow);
    if (it == flow_meta.end()) return {};
    const plan::FlowMeta& f = *it->second;
    if (!f.opm_versions.empty()) return f.opm_versions;
    if (f.baixa && !f.baixa->empty()) return *f.baixa;
    return log.known;  // baixa with an open version set tags every version
  }

  ordered_json build() {
    decide_modes();

    std::map<std::string, const Process*> by_id;
    for (const auto& p : log.processes) by_id[p.id] = &p;
    std::map<std::string, const Artifact*> artifact_by_id;
    for (const auto& a : log.artifacts) artifact_by_id[a.id] = &a;

    std::map<std::string, std::string> pmap;  // original process id -> exported id
    for (const auto& p : log.processes) pmap[p.id] = map_process(p);

    auto map_id = [&](const std::string& id) {
      auto it = pmap.find(id);
      return it == pmap.end() ? id : it->second;
    };

    std::map<std::string, std::string> agroup;  // artifact id -> collapsed group or ""
    for (const auto& a : log.artifacts) agroup[a.id] = group_of(a.scopes);

    // An artifact inside a collapsed flow survives only when something beyond
    // the collapsed node references it.
    std::set<std::string> crossing;
    for (const auto& u : log.used) {
      auto a = agroup.find(u.artifact);
      if (a != agroup.end() && !a->second.empty() && map_id(u.process) != a->second)
        crossing.insert(u.artifact);
    }
    for (const auto& a : log.artifacts) {
      if (!a.derived_from) continue;
      auto parent = agroup.find(*a.derived_from);
      if (parent == agroup.end()) continue;
      // An outside artifact derived from an inside one keeps the parent
      // visible; the reverse direction exposes nothing.
      if (parent->second != agroup[a.id] && !parent->second.empty())
        crossing.insert(*a.derived_from);
    }

    // Processes visible in this version.
    std::map<std::string, Process> kept_processes;
    for (const auto& p : log.processes) {
      std::string mapped = pmap[p.id];
      if (mapped == p.id) {
        if (contains(p.versions, version)) kept_processes[p.id] = p;
        continue;
      }
      std::string flow = mapped.substr(0, mapped.rfind('#'));
      if (!contains(collapsed_versions(flow), version)) continue;
      auto [it, inserted] = kept_processes.try_emplace(mapped);
      Process& c = it->second;
      if (inserted) {
        c.id = mapped;
        c.label = flow;
        c.start = p.start;
        c.end = p.end;
      } else {
        c.start = std::min(c.start, p.start);
        c.end = std::max(c.end, p.end);
      }
    }

    std::map<std::string, const Artifact*> kept_artifacts;
    for (const auto& a : log.artifacts) {
      if (!agroup[a.id].empty() && !crossing.count(a.id)) continue;
      if (!contains(a.versions, version)) continue;
      kept_artifacts[a.id] = &a;
    }

    struct Edge {
      std::string kind, from, to, role;
      bool operator<(const Edge& o) const {
        return std::tie(kind, from, to, role) < std::tie(o.kind, o.from, o.to, o.role);
      }
    };
    std::set<Edge> edges;

    for (const auto& [id, a] : kept_artifacts) {
      if (!a->generated_by.empty()) {
        std::string gen = map_id(a->generated_by);
        if (kept_processes.count(gen))
          edges.insert({"wasGeneratedBy", id, gen, a->role});
      }
      if (a->derived_from && kept_artifacts.count(*a->derived_from))
        edges.insert({"wasDerivedFrom", id, *a->derived_from, ""});
    }
    for (const auto& u : log.used) {
      std::string p = map_id(u.process);
      if (!kept_processes.count(p) || !kept_artifacts.count(u.artifact)) continue;
      auto art = artifact_by_id.find(u.artifact);
      // A collapsed flow never "uses" what it generated itself.
      if (art != artifact_by_id.end() && !art->second->generated_by.empty() &&
          map_id(art->second->generated_by) == p && p != u.process)
        continue;
      edges.insert({"used", p, u.artifact, u.role});
    }
    for (const auto& t : log.triggers) {
      std::string from = map_id(t.producer), to = map_id(t.consumer);
      if (from == to) continue;
      if (kept_processes.count(from) && kept_processes.count(to))
        edges.insert({"wasTriggeredBy", to, from, ""});
    }
    std::string agent_id = "agent:" + log.adapter;
    for (const auto& [id, p] : kept_processes)
      edges.insert({"wasControlledBy", id, agent_id, ""});

    ordered_json doc;
    doc["artifacts"] = ordered_json::array();
    for (const auto& [id, a] : kept_artifacts)
      doc["artifacts"].push_back({{"id", id}, {"value", a->value}});
    doc["processes"] = ordered_json::array();
    for (const auto& [id, p] : kept_processes)
      doc["processes"].push_back(
          {{"id", id}, {"label", p.label}, {"start", p.start}, {"end", p.end}});
    doc["agents"] = ordered_json::array();
    if (!kept_processes.empty())
      doc["agents"].push_back({{"id", agent_id}, {"label", log.adapter}});
    doc["edges"] = ordered_json::array();
    for (const auto& e : edges)
      doc["edges"].push_back({{"kind", e.kind}, {"from", e.from}, {"to", e.to}, {"role", e.role}});
    doc["account"] = version;
    return doc;
  }
};

}  // namespace

std::vector<std::string> known_versions(const std::string& events_path) {
  return load_events(events_path).known;
}

ordered_json export_opm(const std::string& events_path, const std::string& version,
                        const std::map<std::string, std::string>& granularity_overrides) {
  EventLog log = load_events(events_path);
  if (!log.known.empty() && !contains(log.known, version)) {
    std::string listing;
    for (const auto& k : log.known) listing += (listing.empty() ? "" : ", ") + k;
    throw std::runtime_error("unknown version '" + version + "'; known versions: " + listing);
  }
  Exporter exporter{log, version, granularity_overrides};
  return exporter.build();
}

}  // namespace osc::prov
