#pragma once

#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "osc/typesystem.hpp"

namespace osc::plan {

enum class DatasetKind { Files, Values, Repetitions };
const char* to_string(DatasetKind kind);

/// One Bifurcacao port's dataset: file paths, literal values, or repetition
/// indices ("0".."k-1"), in iteration order.
struct PortBinding {
  std::string port;
  DatasetKind kind = DatasetKind::Values;
  std::vector<std::string> items;
};

struct InstanceAssignment {
  int instance_index = 0;
  std::vector<std::string> items;  // one per binding, binding order
};

/// Full cross product over the bound ports of one parameter-sweep flow.
/// Instances are dense and ordered row-major: the first declared port is the
/// most significant position, the last varies fastest.
struct SweepExpansion {
  std::string flow;
  std::vector<PortBinding> bindings;
  std::vector<InstanceAssignment> instances;

  int size() const { return static_cast<int>(instances.size()); }
};

/// Expands one sweep flow. `overrides` (keyed by port name) replace the
/// dataset bound through port properties. Throws on empty or unreadable
/// datasets and on unbound ports.
SweepExpansion expand_sweep(const types::ResolvedElement& flow,
                            const std::map<std::string, PortBinding>& overrides = {});

enum class NodeKind { Task, Connector, Join, MapReduce };
const char* to_string(NodeKind kind);

/// Sweep item a connector's source role receives instead of an upstream edge.
struct InjectedItem {
  DatasetKind kind = DatasetKind::Values;
  std::string item;
};

/// Ordering constraint from a `modo = sequencial` sweep: within `group`, all
/// nodes of rank r finish before any node of rank r+1 starts.
struct SerialConstraint {
  std::string group;
  int rank = 0;
};

struct ScopeRef {
  std::string flow;  // dotted path of the enclosing flow
  int replica = 0;   // that flow body's replica index
};

struct PlanNode {
  std::string id;  // path#instance
  std::string path;
  int instance_index = 0;
  NodeKind kind = NodeKind::Task;

  std::string comando;  // task nodes, already rendered except {in:}/{out:}
  bool has_retry = false;
  int num_tentativas = 1;
  bool ignorar = false;
  std::optional<double> tempo_limite;
  std::vector<std::string> log_padroes;
  int num_copias = 0;  // > 0 means masked execution
  bool propagacao = false;

  std::vector<std::string> versions;  // element-level OPM tags
  std::map<std::string, std::vector<std::string>> slot_versions;

  std::vector<std::string> input_slots;   // ports / source roles / join parts
  std::vector<std::string> output_slots;  // ports / dest roles / join output

  std::map<std::string, InjectedItem> injected;  // connector nodes only

  std::string join_formato;  // join nodes only
  std::string join_destino;
  int join_parts = 0;

  std::string map_comando;  // mapreduce nodes only
  std::string reduce_comando;

  std::vector<ScopeRef> scopes;  // enclosing flows, outermost first
  std::vector<SerialConstraint> serial;
};

struct PlanEdge {
  std::string from;
  std::string from_slot;
  std::string to;
  std::string to_slot;
  model::DependencyKind payload = model::DependencyKind::Data;
};

/// Granularity configuration of one flow, for the provenance exporter.
struct FlowMeta {
  std::string path;
  std::vector<std::string> opm_versions;
  // Version sets each granularity type applies to; empty vector = every
  // version. Read from the granularity type's own declaration chain.
  std::optional<std::vector<std::string>> alta;
  std::optional<std::vector<std::string>> baixa;
};

struct ExecutionPlan {
  std::string family;
  std::vector<PlanNode> nodes;
  std::vector<PlanEdge> edges;
  std::vector<std::string> order;  // topological, consistent with edges
  std::vector<SweepExpansion> expansions;
  std::vector<FlowMeta> flows;

  const PlanNode* find(const std::string& id) const;
  std::vector<const PlanEdge*> edges_into(const std::string& id) const;
  std::vector<const PlanEdge*> edges_from(const std::string& id) const;
};

struct PlanOptions {
  // CLI dataset overrides, keyed by dotted port path ("varre.faixa").
  std::map<std::string, PortBinding> binds;
};

/// Expands sweeps and builds the execution DAG for a validated model.
/// Throws std::runtime_error on planning faults (bad datasets, missing join
/// config, unknown placeholders, malformed MapReduce bodies).
ExecutionPlan build_plan(const model::WorkflowModel& model, const types::Resolution& resolution,
                         const PlanOptions& options = {});

/// Join input for one sweep instance: the artifact produced by that instance,
/// or nothing when the instance was ignored.
using JoinInputs = std::map<int, std::optional<std::string>>;

struct JoinPart {
  int instance_index = 0;
  std::string artifact;
};

struct JoinManifest {
  std::string port;
  std::string formato;
  std::string destino;
  std::vector<JoinPart> parts;  // ascending instance_index, ignored omitted
};

/// Builds the ordered manifest for one Juncao port. Every instance of the
/// expansion must have an entry in `inputs`; ignored instances are omitted
/// from the manifest.
JoinManifest join_manifest(const SweepExpansion& expansion, const std::string& port,
                           const std::string& formato, const std::string& destino,
                           const JoinInputs& inputs);

nlohmann::ordered_json to_json(const ExecutionPlan& plan);

}  // namespace osc::plan
