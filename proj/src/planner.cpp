#include "osc/planner.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <filesystem>
#include <set>
#include <stdexcept>

namespace osc::plan {

namespace fs = std::filesystem;
using model::DependencyKind;
using model::Direction;
using model::ElementInstance;
using model::ElementKind;
using model::WorkflowModel;
using types::ResolvedElement;
using types::ResolvedInterface;
using types::Resolution;

const char* to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Files: return "files";
    case DatasetKind::Values: return "values";
    case DatasetKind::Repetitions: return "repetitions";
  }
  return "?";
}

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Task: return "task";
    case NodeKind::Connector: return "connector";
    case NodeKind::Join: return "join";
    case NodeKind::MapReduce: return "mapreduce";
  }
  return "?";
}

namespace {

std::vector<std::string> list_directory(const std::string& dir, const std::string& port) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec))
    throw std::runtime_error("dataset directory for " + port + " does not exist: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<std::string> interface_versions(const ResolvedInterface& ri) {
  if (!ri.has_type("OPM")) return {};
  const auto* p = ri.find("versao");
  return p && p->has_value() ? p->value->items : std::vector<std::string>{};
}

std::string render_scalar(const types::EffectiveProperty& p) {
  using model::ValueKind;
  switch (p.value->kind) {
    case ValueKind::String:
    case ValueKind::Enum: return p.value->text;
    case ValueKind::Int: return std::to_string(p.value->int_value);
    case ValueKind::Bool: return p.value->int_value ? "true" : "false";
    case ValueKind::Float: return p.value->render();
    case ValueKind::Set: break;
  }
  throw std::runtime_error("property has no scalar rendering");
}

}  // namespace

SweepExpansion expand_sweep(const ResolvedElement& flow,
                            const std::map<std::string, PortBinding>& overrides) {
  SweepExpansion out;
  out.flow = flow.path;
  for (const auto& ri : flow.interfaces) {
    if (ri.point->direction != Direction::Input || !ri.has_type("Bifurcacao")) continue;
    PortBinding binding;
    binding.port = ri.point->name;
    auto it = overrides.find(binding.port);
    if (it != overrides.end()) {
      binding.kind = it->second.kind;
      binding.items = it->second.items;
    } else if (const auto* dir = ri.find("diretorio"); dir && dir->has_value()) {
      binding.kind = DatasetKind::Files;
      binding.items = list_directory(dir->value->text, ri.path);
    } else if (const auto* vals = ri.find("valores"); vals && vals->has_value()) {
      binding.kind = DatasetKind::Values;
      binding.items = vals->value->items;
    } else if (const auto* reps = ri.find("repeticoes"); reps && reps->has_value()) {
      binding.kind = DatasetKind::Repetitions;
      if (reps->value->int_value < 1)
        throw std::runtime_error("repeticoes on " + ri.path + " must be >= 1");
      for (std::int64_t i = 0; i < reps->value->int_value; ++i)
        binding.items.push_back(std::to_string(i));
    } else {
      throw std::runtime_error("Bifurcacao port " + ri.path + " has no dataset bound");
    }
    if (binding.items.empty())
      throw std::runtime_error("empty dataset on Bifurcacao port " + ri.path);
    out.bindings.push_back(std::move(binding));
  }
  if (out.bindings.empty())
    throw std::runtime_error("parameter sweep " + flow.path + " has no Bifurcacao port");

  size_t total = 1;
  for (const auto& b : out.bindings) total *= b.items.size();
  std::vector<size_t> odometer(out.bindings.size(), 0);
  for (size_t n = 0; n < total; ++n) {
    InstanceAssignment inst;
    inst.instance_index = static_cast<int>(n);
    for (size_t j = 0; j < out.bindings.size(); ++j)
      inst.items.push_back(out.bindings[j].items[odometer[j]]);
    out.instances.push_back(std::move(inst));
    for (size_t j = out.bindings.size(); j-- > 0;) {
      if (++odometer[j] < out.bindings[j].items.size()) break;
      odometer[j] = 0;
    }
  }
  return out;
}

JoinManifest join_manifest(const SweepExpansion& expansion, const std::string& port,
                           const std::string& formato, const std::string& destino,
                           const JoinInputs& inputs) {
  JoinManifest manifest;
  manifest.port = port;
  manifest.formato = formato;
  manifest.destino = destino;
  for (const auto& inst : expansion.instances) {
    auto it = inputs.find(inst.instance_index);
    if (it == inputs.end())
      throw std::runtime_error("join on " + port + " is missing instance " +
                               std::to_string(inst.instance_index));
    if (it->second) manifest.parts.push_back({inst.instance_index, *it->second});
  }
  return manifest;
}

namespace {

class Builder {
 public:
  Builder(const WorkflowModel& model, const Resolution& resolution,
          const types::TypeRegistry& registry, const PlanOptions& options)
      : model_(model), resolution_(resolution), registry_(registry), options_(options) {}

  ExecutionPlan build() {
    plan_.family = model_.name;
    Ambient root;
    root.index = 0;
    walk_scope(model_, "", nullptr, {root});
    check_binds();
    for (const auto& x : expansions_) plan_.expansions.push_back(x);
    toposort();
    return std::move(plan_);
  }

 private:
  struct Feed {
    std::string node;
    std::string slot;
    DependencyKind dep = DependencyKind::Data;
  };

  struct Boundary {
    std::map<std::string, std::vector<Feed>> in_feeds;
    std::map<std::string, std::vector<Feed>> out_sinks;
  };

  struct Ambient {
    int index = 0;
    std::vector<ScopeRef> scopes;
    std::vector<SerialConstraint> serial;
    std::map<std::string, InjectedItem> items;  // enclosing sweep items by port name
    const Boundary* boundary = nullptr;         // wiring of the enclosing flow's ports
    std::map<std::string, Feed> join_targets;   // enclosing Juncao port -> join part slot
    bool sweep_boundary = false;                // enclosing flow is a sweep
  };

  const WorkflowModel& model_;
  const Resolution& resolution_;
  const types::TypeRegistry& registry_;
  const PlanOptions& options_;
  ExecutionPlan plan_;
  std::map<std::string, size_t> node_index_;
  std::deque<Boundary> boundaries_;        // stable addresses across the walk
  std::deque<SweepExpansion> expansions_;  // same
  std::set<std::string> flow_meta_done_;

  [[noreturn]] void fail(const std::string& message) const { throw std::runtime_error(message); }

  PlanNode& node(const std::string& id) {
    auto it = node_index_.find(id);
    if (it == node_index_.end()) fail("internal: unknown plan node " + id);
    return plan_.nodes[it->second];
  }

  bool has_node(const std::string& id) const { return node_index_.count(id) > 0; }

  PlanNode& add_node(const ResolvedElement* element, const std::string& path, int index,
                     NodeKind kind, const Ambient& ambient) {
    PlanNode n;
    n.path = path;
    n.instance_index = index;
    n.id = path + "#" + std::to_string(index);
    n.kind = kind;
    n.scopes = ambient.scopes;
    n.serial = ambient.serial;
    if (element) {
      if (element->has_type("OPM")) n.versions = element->set_of("versao");
      if (element->has_type("RedundanciaTemporal")) {
        n.has_retry = true;
        n.num_tentativas = static_cast<int>(element->int_of("num_tentativas").value_or(1));
        n.ignorar = element->bool_of("ignorar").value_or(false);
      }
      if (element->has_type("MonitoramentoDeTempo"))
        n.tempo_limite = element->float_of("tempo_limite");
      if (element->has_type("Log")) n.log_padroes = element->set_of("padroes");
      if (element->has_type("Mascaramento"))
        n.num_copias = static_cast<int>(element->int_of("num_copias").value_or(0));
      if (element->has_type("Propagacao")) n.propagacao = true;
      for (const auto& ri : element->interfaces) {
        if (ri.point->direction == Direction::Input || ri.point->direction == Direction::Source)
          n.input_slots.push_back(ri.point->name);
        else
          n.output_slots.push_back(ri.point->name);
        if (ri.has_type("OPM")) n.slot_versions[ri.point->name] = interface_versions(ri);
      }
    }
    node_index_[n.id] = plan_.nodes.size();
    plan_.nodes.push_back(std::move(n));
    return plan_.nodes.back();
  }

  void add_edge(const std::string& from, const std::string& from_slot, const std::string& to,
                const std::string& to_slot, DependencyKind dep) {
    plan_.edges.push_back({from, from_slot, to, to_slot, dep});
  }

  static DependencyKind merge_dep(DependencyKind a, DependencyKind b) {
    return (a == DependencyKind::Control || b == DependencyKind::Control)
               ? DependencyKind::Control
               : DependencyKind::Data;
  }

  // --- command templates -------------------------------------------------

  // Only identifier-shaped tokens (optionally in:/out: prefixed) act as
  // placeholders; anything else stays literal so comandos can carry shell code.
  static bool placeholder_shaped(const std::string& name) {
    std::string body = name;
    if (name.rfind("in:", 0) == 0) body = name.substr(3);
    else if (name.rfind("out:", 0) == 0) body = name.substr(4);
    if (body.empty() || (!std::isalpha(static_cast<unsigned char>(body[0])) && body[0] != '_'))
      return false;
    for (char c : body)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
  }

  std::string render_comando(const ResolvedElement& element, const Ambient& ambient) const {
    const auto* slot = element.find("comando");
    std::string tpl = slot && slot->has_value() ? slot->value->text : "";
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
      std::string name = tpl.substr(open + 1, close - open - 1);
      if (!placeholder_shaped(name)) {
        // Shell or awk syntax, not a template slot.
        out += "{" + name + "}";
      } else if (name.rfind("in:", 0) == 0 || name.rfind("out:", 0) == 0) {
        bool is_in = name[0] == 'i';
        std::string port = name.substr(is_in ? 3 : 4);
        const ResolvedInterface* ri = element.find_interface(port);
        if (!ri || ri->point->direction != (is_in ? Direction::Input : Direction::Output))
          fail("comando of " + element.path + " references unknown port placeholder {" + name +
               "}");
        out += "{" + name + "}";  // engine substitutes artifact paths at exec time
      } else if (auto item = ambient.items.find(name); item != ambient.items.end()) {
        out += item->second.item;
      } else if (const auto* prop = element.find(name); prop && prop->has_value()) {
        out += render_scalar(*prop);
      } else {
        fail("comando of " + element.path + " references unknown placeholder {" + name + "}");
      }
      pos = close + 1;
    }
    return out;
  }

  // --- flow metadata -----------------------------------------------------

  std::vector<std::string> chain_versions(const std::string& type_name,
                                          const std::string& base) const {
    // Nearest versao default along the granularity branch; none means every
    // version applies.
    std::deque<std::string> work{type_name};
    while (!work.empty()) {
      std::string cur = work.front();
      work.pop_front();
      const model::TypeDef* def = registry_.find(cur);
      if (!def) continue;
      if (registry_.is_subtype(cur, base)) {
        for (const auto& p : def->properties)
          if (p.name == "versao" && p.default_value) return p.default_value->items;
      }
      for (const auto& parent : def->extends) work.push_back(parent);
    }
    return {};
  }

  void record_flow_meta(const ResolvedElement& flow) {
    if (!flow_meta_done_.insert(flow.path).second) return;
    FlowMeta meta;
    meta.path = flow.path;
    if (flow.has_type("OPM")) meta.opm_versions = flow.set_of("versao");
    for (const auto& assigned : flow.instance->assigned_types) {
      if (registry_.is_subtype(assigned, "AltaGranularidade"))
        meta.alta = chain_versions(assigned, "AltaGranularidade");
      if (registry_.is_subtype(assigned, "BaixaGranularidade"))
        meta.baixa = chain_versions(assigned, "BaixaGranularidade");
    }
    plan_.flows.push_back(std::move(meta));
  }

  // --- scope walking -----------------------------------------------------

  struct FlowChild {
    const ElementInstance* instance = nullptr;
    const ResolvedElement* element = nullptr;
    std::string path;
    bool is_sweep = false;
    bool sequential = false;
    const SweepExpansion* expansion = nullptr;
    std::vector<Boundary*> per_ambient;  // parallel to the scope's ambient list
  };

  void walk_scope(const WorkflowModel& scope, const std::string& prefix,
                  const ElementInstance* enclosing, const std::vector<Ambient>& ambients) {
    std::vector<FlowChild> flows;
    const ResolvedElement* enclosing_element = enclosing ? resolution_.find(prefix) : nullptr;

    // Nodes, declaration order, replicated per ambient.
    for (const auto& inst : scope.instances) {
      std::string path = prefix.empty() ? inst.name : prefix + "." + inst.name;
      const ResolvedElement* element = resolution_.find(path);
      if (!element) fail("internal: unresolved element " + path);
      if (inst.kind == ElementKind::Connector) {
        for (const auto& ambient : ambients)
          add_node(element, path, ambient.index, NodeKind::Connector, ambient);
        continue;
      }
      if (element->structure_type == std::optional<std::string>(types::kExecutavel)) {
        for (const auto& ambient : ambients) {
          PlanNode& n = add_node(element, path, ambient.index, NodeKind::Task, ambient);
          n.comando = render_comando(*element, ambient);
        }
        continue;
      }
      if (element->has_type("MapReduce")) {
        for (const auto& ambient : ambients) make_mapreduce_node(*element, path, ambient);
        record_flow_meta(*element);
        continue;
      }
      FlowChild child;
      child.instance = &inst;
      child.element = element;
      child.path = path;
      child.is_sweep = element->has_type("VarreduraDeParametros");
      if (child.is_sweep) {
        child.sequential = element->text_of("modo") == std::optional<std::string>("sequencial");
        child.expansion = add_expansion(*element);
      }
      for (size_t i = 0; i < ambients.size(); ++i) {
        boundaries_.emplace_back();
        child.per_ambient.push_back(&boundaries_.back());
      }
      record_flow_meta(*element);
      flows.push_back(std::move(child));
    }

    // Join nodes, one per sweep Juncao port per ambient.
    for (const auto& child : flows) {
      if (!child.is_sweep) continue;
      for (const auto& ri : child.element->interfaces) {
        if (ri.point->direction != Direction::Output || !ri.has_type("Juncao")) continue;
        const auto* formato = ri.find("formato");
        const auto* destino = ri.find("destino");
        if (!formato || !formato->has_value()) fail("Juncao port " + ri.path + " needs formato");
        if (!destino || !destino->has_value()) fail("Juncao port " + ri.path + " needs destino");
        int parts = child.expansion->size();
        for (const auto& ambient : ambients) {
          PlanNode& n = add_node(nullptr, ri.path, ambient.index, NodeKind::Join, ambient);
          n.scopes.push_back({child.path, ambient.index});
          n.join_formato = formato->value->text;
          n.join_destino = destino->value->text;
          n.join_parts = parts;
          n.versions = interface_versions(ri);
          for (int e = 0; e < parts; ++e) n.input_slots.push_back(std::to_string(e));
          n.output_slots.push_back(ri.point->name);
        }
      }
    }

    auto flow_child_for = [&](const std::string& name) -> const FlowChild* {
      for (const auto& child : flows)
        if (child.instance->name == name) return &child;
      return nullptr;
    };

    // Edges from this scope's attachments, one set per ambient replica.
    for (const auto& att : scope.attachments) {
      for (size_t ai = 0; ai < ambients.size(); ++ai) {
        const Ambient& ambient = ambients[ai];
        std::string conn_id = prefix.empty() ? att.connector_side.instance
                                             : prefix + "." + att.connector_side.instance;
        conn_id += "#" + std::to_string(ambient.index);
        const std::string& role = att.connector_side.point;
        const std::string& port = att.task_side.point;
        bool to_form = att.form == model::AttachmentForm::To;

        if (enclosing && att.task_side.instance == enclosing->name) {
          // Inner face of the enclosing flow's boundary.
          const ResolvedInterface* ri =
              enclosing_element ? enclosing_element->find_interface(port) : nullptr;
          if (!ri) fail("internal: missing boundary interface " + prefix + "." + port);
          if (to_form) {
            if (ri->has_type("Bifurcacao")) {
              auto item = ambient.items.find(port);
              if (item == ambient.items.end())
                fail("Bifurcacao port " + ri->path + " is only usable inside a parameter sweep");
              node(conn_id).injected[role] = item->second;
            } else if (ambient.boundary) {
              auto feeds = ambient.boundary->in_feeds.find(port);
              if (feeds != ambient.boundary->in_feeds.end())
                for (const auto& feed : feeds->second)
                  add_edge(feed.node, feed.slot, conn_id, role,
                           merge_dep(feed.dep, att.dependency));
            }
          } else {
            auto target = ambient.join_targets.find(port);
            if (target != ambient.join_targets.end()) {
              add_edge(conn_id, role, target->second.node, target->second.slot, att.dependency);
            } else if (ambient.boundary) {
              auto sinks = ambient.boundary->out_sinks.find(port);
              if (sinks != ambient.boundary->out_sinks.end())
                for (const auto& sink : sinks->second) {
                  DependencyKind dep = merge_dep(sink.dep, att.dependency);
                  if (ambient.sweep_boundary) dep = DependencyKind::Control;
                  add_edge(conn_id, role, sink.node, sink.slot, dep);
                }
            }
          }
          continue;
        }

        const FlowChild* child = flow_child_for(att.task_side.instance);
        if (!child) {
          std::string task_id =
              prefix.empty() ? att.task_side.instance : prefix + "." + att.task_side.instance;
          task_id += "#" + std::to_string(ambient.index);
          if (to_form)
            add_edge(task_id, port, conn_id, role, att.dependency);
          else
            add_edge(conn_id, role, task_id, port, att.dependency);
          continue;
        }

        // Outer face of a child flow's boundary.
        const ResolvedInterface* ri = child->element->find_interface(port);
        if (!ri) fail("internal: missing interface " + child->path + "." + port);
        if (to_form) {
          if (child->is_sweep && ri->has_type("Juncao")) {
            std::string join_id = ri->path + "#" + std::to_string(ambient.index);
            add_edge(join_id, port, conn_id, role, att.dependency);
          } else {
            child->per_ambient[ai]->out_sinks[port].push_back({conn_id, role, att.dependency});
          }
        } else {
          if (ri->has_type("Bifurcacao"))
            fail("Bifurcacao port " + ri->path + " is dataset-bound and cannot receive data");
          child->per_ambient[ai]->in_feeds[port].push_back({conn_id, role, att.dependency});
        }
      }
    }

    // Flow bodies, declaration order.
    for (const auto& child : flows) {
      if (!child.instance->body) fail("flow " + child.path + " has no body");
      std::vector<Ambient> inner;
      if (child.is_sweep) {
        const SweepExpansion& expansion = *child.expansion;
        int width = expansion.size();
        for (size_t ai = 0; ai < ambients.size(); ++ai) {
          const Ambient& parent = ambients[ai];
          for (int e = 0; e < width; ++e) {
            Ambient a;
            a.index = parent.index * width + e;
            a.scopes = parent.scopes;
            a.scopes.push_back({child.path, parent.index});
            a.serial = parent.serial;
            if (child.sequential)
              a.serial.push_back({child.path + "#" + std::to_string(parent.index), e});
            a.items = parent.items;
            for (size_t b = 0; b < expansion.bindings.size(); ++b)
              a.items[expansion.bindings[b].port] = {expansion.bindings[b].kind,
                                                     expansion.instances[e].items[b]};
            a.boundary = child.per_ambient[ai];
            a.sweep_boundary = true;
            for (const auto& ri : child.element->interfaces) {
              if (ri.point->direction == Direction::Output && ri.has_type("Juncao")) {
                std::string join_id = ri.path + "#" + std::to_string(parent.index);
                a.join_targets[ri.point->name] = {join_id, std::to_string(e),
                                                  DependencyKind::Data};
              }
            }
            inner.push_back(std::move(a));
          }
        }
      } else {
        for (size_t ai = 0; ai < ambients.size(); ++ai) {
          const Ambient& parent = ambients[ai];
          Ambient a;
          a.index = parent.index;
          a.scopes = parent.scopes;
          a.scopes.push_back({child.path, parent.index});
          a.serial = parent.serial;
          a.items = parent.items;
          a.boundary = child.per_ambient[ai];
          inner.push_back(std::move(a));
        }
      }
      walk_scope(*child.instance->body, child.path, child.instance, inner);
    }
  }

  const SweepExpansion* add_expansion(const ResolvedElement& flow) {
    for (const auto& existing : expansions_)
      if (existing.flow == flow.path) return &existing;
    std::map<std::string, PortBinding> overrides;
    std::string port_prefix = flow.path + ".";
    for (const auto& [path, binding] : options_.binds) {
      if (path.rfind(port_prefix, 0) == 0 &&
          path.find('.', port_prefix.size()) == std::string::npos)
        overrides[path.substr(port_prefix.size())] = binding;
    }
    expansions_.push_back(expand_sweep(flow, overrides));
    return &expansions_.back();
  }

  void check_binds() const {
    std::set<std::string> targets;
    for (const auto& x : expansions_)
      for (const auto& b : x.bindings) targets.insert(x.flow + "." + b.port);
    for (const auto& [path, binding] : options_.binds)
      if (!targets.count(path))
        fail("--bind target " + path + " is not a Bifurcacao port of any parameter sweep");
  }

  void make_mapreduce_node(const ResolvedElement& element, const std::string& path,
                           const Ambient& ambient) {
    if (!element.instance->body) fail("MapReduce flow " + path + " has no body");
    int inputs = 0, outputs = 0;
    for (const auto& ri : element.interfaces) {
      if (ri.point->direction == Direction::Input) ++inputs;
      if (ri.point->direction == Direction::Output) ++outputs;
    }
    if (inputs != 1 || outputs != 1)
      fail("MapReduce flow " + path + " needs exactly one input and one output port");
    PlanNode& n = add_node(&element, path, ambient.index, NodeKind::MapReduce, ambient);
    for (const char* role : {"map", "reduce"}) {
      const ResolvedElement* step = resolution_.find(path + "." + role);
      if (!step || step->structure_type != std::optional<std::string>(types::kExecutavel))
        fail("MapReduce flow " + path + " needs an Executavel body task named '" + role + "'");
      std::string comando = render_comando(*step, ambient);
      if (comando.empty()) fail("MapReduce task " + step->path + " has an empty comando");
      (role[0] == 'm' ? n.map_comando : n.reduce_comando) = comando;
    }
  }

  void toposort() {
    std::map<std::string, int> indegree;
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& n : plan_.nodes) indegree[n.id] = 0;
    for (const auto& e : plan_.edges) {
      if (!has_node(e.from)) fail("internal: edge from unknown node " + e.from);
      if (!has_node(e.to)) fail("internal: edge to unknown node " + e.to);
      ++indegree[e.to];
      out[e.from].push_back(e.to);
    }
    std::set<size_t> ready;
    for (const auto& n : plan_.nodes)
      if (indegree[n.id] == 0) ready.insert(node_index_[n.id]);
    while (!ready.empty()) {
      size_t i = *ready.begin();
      ready.erase(ready.begin());
      const std::string& id = plan_.nodes[i].id;
      plan_.order.push_back(id);
      for (const auto& next : out[id])
        if (--indegree[next] == 0) ready.insert(node_index_[next]);
    }
    if (plan_.order.size() != plan_.nodes.size()) {
      std::string cycle;
      for (const auto& [id, deg] : indegree)
        if (deg > 0) cycle += (cycle.empty() ? "" : ", ") + id;
      fail("plan graph has a cycle among: " + cycle);
    }
  }
};

}  // namespace

const PlanNode* ExecutionPlan::find(const std::string& id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

std::vector<const PlanEdge*> ExecutionPlan::edges_into(const std::string& id) const {
  std::vector<const PlanEdge*> out;
  for (const auto& e : edges)
    if (e.to == id) out.push_back(&e);
  return out;
}

std::vector<const PlanEdge*> ExecutionPlan::edges_from(const std::string& id) const {
  std::vector<const PlanEdge*> out;
  for (const auto& e : edges)
    if (e.from == id) out.push_back(&e);
  return out;
}

ExecutionPlan build_plan(const WorkflowModel& model, const Resolution& resolution,
                         const PlanOptions& options) {
  std::vector<types::ResolveError> errors;
  types::TypeRegistry registry = types::registry_for(model, errors);
  if (!errors.empty()) throw std::runtime_error("model failed to resolve: " + errors[0].message);
  Builder builder(model, resolution, registry, options);
  return builder.build();
}

nlohmann::ordered_json to_json(const ExecutionPlan& plan) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["family"] = plan.family;
  doc["nodes"] = ordered_json::array();
  for (const auto& n : plan.nodes) {
    ordered_json j;
    j["id"] = n.id;
    j["path"] = n.path;
    j["instance"] = n.instance_index;
    j["kind"] = to_string(n.kind);
    ordered_json config = ordered_json::object();
    if (n.kind == NodeKind::Task) config["comando"] = n.comando;
    if (n.has_retry) {
      config["num_tentativas"] = n.num_tentativas;
      config["ignorar"] = n.ignorar;
    }
    if (n.tempo_limite) config["tempo_limite"] = *n.tempo_limite;
    if (!n.log_padroes.empty()) config["log_padroes"] = n.log_padroes;
    if (n.num_copias > 0) config["num_copias"] = n.num_copias;
    if (n.propagacao) config["propagacao"] = true;
    if (n.kind == NodeKind::Join) {
      config["formato"] = n.join_formato;
      config["destino"] = n.join_destino;
      config["parts"] = n.join_parts;
    }
    if (n.kind == NodeKind::MapReduce) {
      config["map"] = n.map_comando;
      config["reduce"] = n.reduce_comando;
    }
    if (!n.injected.empty()) {
      ordered_json injected = ordered_json::object();
      for (const auto& [role, item] : n.injected)
        injected[role] = {{"kind", to_string(item.kind)}, {"item", item.item}};
      config["injected"] = injected;
    }
    j["config"] = config;
    if (!n.versions.empty()) j["versions"] = n.versions;
    if (!n.slot_versions.empty()) {
      ordered_json sv = ordered_json::object();
      for (const auto& [slot, versions] : n.slot_versions) sv[slot] = versions;
      j["slot_versions"] = sv;
    }
    j["inputs"] = n.input_slots;
    j["outputs"] = n.output_slots;
    if (!n.scopes.empty()) {
      ordered_json scopes = ordered_json::array();
      for (const auto& s : n.scopes) scopes.push_back({{"flow", s.flow}, {"replica", s.replica}});
      j["scopes"] = scopes;
    }
    if (!n.serial.empty()) {
      ordered_json serial = ordered_json::array();
      for (const auto& s : n.serial) serial.push_back({{"group", s.group}, {"rank", s.rank}});
      j["serial"] = serial;
    }
    doc["nodes"].push_back(std::move(j));
  }
  doc["edges"] = ordered_json::array();
  for (const auto& e : plan.edges) {
    doc["edges"].push_back(
        {{"from", e.from},
         {"from_slot", e.from_slot},
         {"to", e.to},
         {"to_slot", e.to_slot},
         {"payload", e.payload == model::DependencyKind::Control ? "control" : "data"}});
  }
  doc["order"] = plan.order;
  doc["expansions"] = ordered_json::array();
  for (const auto& x : plan.expansions) {
    ordered_json j;
    j["flow"] = x.flow;
    j["bindings"] = ordered_json::array();
    for (const auto& b : x.bindings)
      j["bindings"].push_back({{"port", b.port}, {"kind", to_string(b.kind)}, {"items", b.items}});
    j["instances"] = ordered_json::array();
    for (const auto& inst : x.instances)
      j["instances"].push_back({{"index", inst.instance_index}, {"items", inst.items}});
    doc["expansions"].push_back(std::move(j));
  }
  doc["flows"] = ordered_json::array();
  for (const auto& f : plan.flows) {
    ordered_json j;
    j["path"] = f.path;
    j["opm_versions"] = f.opm_versions;
    if (f.alta) j["alta"] = *f.alta;
    if (f.baixa) j["baixa"] = *f.baixa;
    doc["flows"].push_back(std::move(j));
  }
  return doc;
}

}  // namespace osc::plan
