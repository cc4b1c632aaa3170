#include "osc/typesystem.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <sstream>

namespace osc::types {

using model::Attachment;
using model::AttachmentForm;
using model::Direction;
using model::ElementInstance;
using model::ElementKind;
using model::InterfacePoint;
using model::PowertypeClass;
using model::PropertyDecl;
using model::PropertyValue;
using model::SourceSpan;
using model::TypeDef;
using model::ValueKind;
using model::WorkflowModel;

void TypeRegistry::add(TypeDef def) {
  std::string name = def.name;
  defs_.emplace(std::move(name), std::move(def));
}

const TypeDef* TypeRegistry::find(const std::string& name) const {
  auto it = defs_.find(name);
  return it == defs_.end() ? nullptr : &it->second;
}

bool TypeRegistry::is_subtype(const std::string& name, const std::string& ancestor) const {
  if (name == ancestor) return true;
  const TypeDef* def = find(name);
  if (!def) return false;
  for (const auto& parent : def->extends)
    if (is_subtype(parent, ancestor)) return true;
  return false;
}

std::set<std::string> TypeRegistry::closure(const std::string& name) const {
  std::set<std::string> out;
  std::deque<std::string> work{name};
  while (!work.empty()) {
    std::string cur = work.front();
    work.pop_front();
    if (!out.insert(cur).second) continue;
    if (const TypeDef* def = find(cur))
      for (const auto& parent : def->extends) work.push_back(parent);
  }
  return out;
}

namespace {

TypeDef make_type(std::string name, std::set<ElementKind> kinds, PowertypeClass cls,
                  std::vector<std::string> extends, std::vector<PropertyDecl> props) {
  TypeDef def;
  def.name = std::move(name);
  def.kinds = std::move(kinds);
  def.powertype_class = cls;
  def.extends = std::move(extends);
  def.properties = std::move(props);
  def.span = {"<builtin>", 1, 1};
  return def;
}

PropertyDecl prop(std::string name, ValueKind kind,
                  std::optional<PropertyValue> def = std::nullopt,
                  std::vector<std::string> enum_tokens = {}) {
  PropertyDecl d;
  d.name = std::move(name);
  d.kind = kind;
  d.enum_tokens = std::move(enum_tokens);
  d.default_value = std::move(def);
  d.span = {"<builtin>", 1, 1};
  return d;
}

const std::set<ElementKind> kTaskOnly = {ElementKind::Task};
const std::set<ElementKind> kConnectorOnly = {ElementKind::Connector};
const std::set<ElementKind> kTaskConnector = {ElementKind::Task, ElementKind::Connector};
const std::set<ElementKind> kPortOnly = {ElementKind::Port};
const std::set<ElementKind> kAllKinds = {ElementKind::Task, ElementKind::Connector,
                                         ElementKind::Port, ElementKind::Role};

}  // namespace

TypeRegistry builtin_style() {
  TypeRegistry r;
  r.add(make_type(kExecutavel, kTaskOnly, PowertypeClass::Structure, {},
                  {prop("comando", ValueKind::String, PropertyValue::of_string(""))}));
  r.add(make_type(kFluxo, kTaskOnly, PowertypeClass::Structure, {}, {}));
  r.add(make_type("MemoriaCompartilhada", kTaskOnly, PowertypeClass::TaskParallelism,
                  {kExecutavel}, {prop("num_threads", ValueKind::Int, PropertyValue::of_int(1))}));
  r.add(make_type("MemoriaDistribuida", kTaskOnly, PowertypeClass::TaskParallelism, {kExecutavel},
                  {prop("num_nos", ValueKind::Int, PropertyValue::of_int(1)),
                   prop("procs_por_no", ValueKind::Int, PropertyValue::of_int(1))}));
  r.add(make_type("VarreduraDeParametros", kTaskOnly, PowertypeClass::DataParallelism, {kFluxo},
                  {prop("modo", ValueKind::Enum, PropertyValue::of_enum("paralelo"),
                        {"sequencial", "paralelo"})}));
  r.add(make_type("MapReduce", kTaskOnly, PowertypeClass::DataParallelism, {kFluxo}, {}));
  r.add(make_type("Bifurcacao", kPortOnly, PowertypeClass::DataParallelism, {},
                  {prop("diretorio", ValueKind::String), prop("valores", ValueKind::Set),
                   prop("repeticoes", ValueKind::Int)}));
  r.add(make_type("Juncao", kPortOnly, PowertypeClass::DataParallelism, {},
                  {prop("formato", ValueKind::Enum, std::nullopt, {"include", "merge", "concat"}),
                   prop("destino", ValueKind::String)}));
  r.add(make_type("Log", kTaskConnector, PowertypeClass::FaultDetection, {},
                  {prop("padroes", ValueKind::Set,
                        PropertyValue::of_set({"(?i)\\berror\\b"}))}));
  r.add(make_type("MonitoramentoDeTempo", kTaskConnector, PowertypeClass::FaultDetection, {},
                  {prop("tempo_limite", ValueKind::Float)}));
  r.add(make_type("RedundanciaTemporal", kTaskConnector, PowertypeClass::FaultCorrection, {},
                  {prop("num_tentativas", ValueKind::Int),
                   prop("ignorar", ValueKind::Bool, PropertyValue::of_bool(false))}));
  r.add(make_type("Propagacao", kConnectorOnly, PowertypeClass::FaultCorrection, {}, {}));
  r.add(make_type("Mascaramento", kTaskOnly, PowertypeClass::Masking, {},
                  {prop("num_copias", ValueKind::Int)}));
  r.add(make_type("OPM", kAllKinds, PowertypeClass::Provenance, {},
                  {prop("versao", ValueKind::Set)}));
  r.add(make_type("AltaGranularidade", kTaskOnly, PowertypeClass::Granularity, {},
                  {prop("versao", ValueKind::Set)}));
  r.add(make_type("BaixaGranularidade", kTaskOnly, PowertypeClass::Granularity, {},
                  {prop("versao", ValueKind::Set)}));
  return r;
}

const EffectiveProperty* ResolvedInterface::find(const std::string& name) const {
  auto it = properties.find(name);
  return it == properties.end() ? nullptr : &it->second;
}

const EffectiveProperty* ResolvedElement::find(const std::string& name) const {
  auto it = properties.find(name);
  return it == properties.end() ? nullptr : &it->second;
}

const ResolvedInterface* ResolvedElement::find_interface(const std::string& name) const {
  for (const auto& i : interfaces)
    if (i.point->name == name) return &i;
  return nullptr;
}

std::optional<std::int64_t> ResolvedElement::int_of(const std::string& name) const {
  const EffectiveProperty* p = find(name);
  if (!p || !p->value) return std::nullopt;
  return p->value->int_value;
}

std::optional<double> ResolvedElement::float_of(const std::string& name) const {
  const EffectiveProperty* p = find(name);
  if (!p || !p->value) return std::nullopt;
  if (p->value->kind == ValueKind::Int) return static_cast<double>(p->value->int_value);
  return p->value->float_value;
}

std::optional<bool> ResolvedElement::bool_of(const std::string& name) const {
  const EffectiveProperty* p = find(name);
  if (!p || !p->value) return std::nullopt;
  return p->value->bool_value();
}

std::optional<std::string> ResolvedElement::text_of(const std::string& name) const {
  const EffectiveProperty* p = find(name);
  if (!p || !p->value) return std::nullopt;
  return p->value->text;
}

std::vector<std::string> ResolvedElement::set_of(const std::string& name) const {
  const EffectiveProperty* p = find(name);
  if (!p || !p->value) return {};
  return p->value->items;
}

const ResolvedElement* Resolution::find(const std::string& path) const {
  for (const auto& e : elements)
    if (e.path == path) return &e;
  return nullptr;
}

namespace {

void collect_user_types(const WorkflowModel& m, std::vector<const TypeDef*>& out) {
  for (const auto& def : m.type_defs) out.push_back(&def);
  for (const auto& inst : m.instances)
    if (inst.body) collect_user_types(*inst.body, out);
}

}  // namespace

TypeRegistry registry_for(const WorkflowModel& model, std::vector<ResolveError>& errors) {
  TypeRegistry registry = builtin_style();
  std::vector<const TypeDef*> user;
  collect_user_types(model, user);
  for (const TypeDef* def : user) {
    if (registry.find(def->name)) {
      errors.push_back({def->name, def->span, "type '" + def->name + "' redefines a builtin type"});
      continue;
    }
    registry.add(*def);
  }
  for (const TypeDef* def : user) {
    for (const auto& parent_name : def->extends) {
      const TypeDef* parent = registry.find(parent_name);
      if (!parent) {
        errors.push_back({def->name, def->span,
                          "type '" + def->name + "' extends unknown type '" + parent_name + "'"});
        continue;
      }
      for (ElementKind k : def->kinds) {
        if (!parent->applies_to(k))
          errors.push_back({def->name, def->span,
                            "type '" + def->name + "' extends '" + parent_name +
                                "' of a different element kind"});
      }
    }
  }
  return registry;
}

namespace {

const std::set<std::string> kMemoryTypes = {"MemoriaCompartilhada", "MemoriaDistribuida"};
const std::set<std::string> kFlowExtensions = {"VarreduraDeParametros", "MapReduce"};
const std::set<std::string> kGranularityTypes = {"AltaGranularidade", "BaixaGranularidade"};

bool intersects(const std::set<std::string>& closure, const std::set<std::string>& names) {
  return std::any_of(names.begin(), names.end(),
                     [&](const std::string& n) { return closure.count(n) > 0; });
}

class Resolver {
 public:
  Resolver(const TypeRegistry& registry, Resolution& out) : registry_(registry), out_(out) {}

  void resolve_scope(const WorkflowModel& scope, const std::string& prefix) {
    for (const auto& inst : scope.instances) {
      std::string path = prefix.empty() ? inst.name : prefix + "." + inst.name;
      resolve_instance(scope, inst, path);
      if (inst.body) resolve_scope(*inst.body, path);
    }
  }

 private:
  void error(const std::string& path, const SourceSpan& span, const std::string& message) {
    out_.errors.push_back({path, span, message});
  }

  // Misuses of these families are rule violations (R3/R4/R8/R9/R10), not
  // resolution failures; everything else that cannot apply is rejected here.
  bool kind_check_deferred(const std::set<std::string>& closure) {
    return intersects(closure, kMemoryTypes) || intersects(closure, kFlowExtensions) ||
           closure.count("Mascaramento") > 0 || closure.count("Propagacao") > 0 ||
           intersects(closure, kGranularityTypes);
  }

  std::set<std::string> resolve_closure(const std::string& path, const SourceSpan& span,
                                        const std::vector<std::string>& assigned,
                                        ElementKind kind) {
    std::set<std::string> closure;
    bool instance_kind = kind == ElementKind::Task || kind == ElementKind::Connector;
    for (const auto& name : assigned) {
      const TypeDef* def = registry_.find(name);
      if (!def) {
        error(path, span, "unknown type '" + name + "'");
        continue;
      }
      std::set<std::string> c = registry_.closure(name);
      if (!def->applies_to(kind) && !(instance_kind && kind_check_deferred(c))) {
        error(path, span, "type '" + name + "' does not apply to a " +
                              std::string(model::to_string(kind)));
        continue;
      }
      closure.insert(c.begin(), c.end());
    }
    return closure;
  }

  struct Slot {
    std::string declared_by;
    const PropertyDecl* decl;
  };

  static bool same_decl(const PropertyDecl& a, const PropertyDecl& b) {
    return a.kind == b.kind && a.enum_tokens == b.enum_tokens &&
           a.default_value == b.default_value;
  }

  std::map<std::string, EffectiveProperty> merge_properties(
      const std::string& path, const SourceSpan& span, const std::set<std::string>& closure) {
    std::map<std::string, std::vector<Slot>> candidates;
    for (const auto& type_name : closure) {
      const TypeDef* def = registry_.find(type_name);
      if (!def) continue;
      // Granularity version sets are read per-type by the provenance layer,
      // not merged into the flat property map.
      if (registry_.is_subtype(type_name, "AltaGranularidade") ||
          registry_.is_subtype(type_name, "BaixaGranularidade"))
        continue;
      for (const auto& decl : def->properties)
        candidates[decl.name].push_back({type_name, &decl});
    }
    std::map<std::string, EffectiveProperty> out;
    for (auto& [name, slots] : candidates) {
      // Keep the most-derived declaration along each subtype chain.
      std::vector<Slot> survivors;
      for (const auto& slot : slots) {
        bool shadowed = std::any_of(slots.begin(), slots.end(), [&](const Slot& other) {
          return other.declared_by != slot.declared_by &&
                 registry_.is_subtype(other.declared_by, slot.declared_by);
        });
        if (!shadowed) survivors.push_back(slot);
      }
      bool conflict = false;
      for (size_t i = 1; i < survivors.size(); ++i) {
        if (!same_decl(*survivors[0].decl, *survivors[i].decl)) {
          error(path, span, "property '" + name + "' declared incompatibly by types '" +
                                survivors[0].declared_by + "' and '" + survivors[i].declared_by +
                                "'");
          conflict = true;
          break;
        }
      }
      if (conflict || survivors.empty()) continue;
      EffectiveProperty eff;
      eff.kind = survivors[0].decl->kind;
      eff.enum_tokens = survivors[0].decl->enum_tokens;
      eff.declared_by = survivors[0].declared_by;
      if (survivors[0].decl->default_value) eff.value = survivors[0].decl->default_value;
      out.emplace(name, std::move(eff));
    }
    return out;
  }

  void apply_assignments(const std::string& path,
                         const std::vector<model::PropertyAssignment>& assignments,
                         std::map<std::string, EffectiveProperty>& properties) {
    for (const auto& assign : assignments) {
      auto it = properties.find(assign.name);
      if (it == properties.end()) {
        error(path, assign.span,
              "property '" + assign.name + "' is not declared by any assigned type");
        continue;
      }
      EffectiveProperty& eff = it->second;
      PropertyValue value = assign.value;
      if (eff.kind == ValueKind::Float && value.kind == ValueKind::Int)
        value = PropertyValue::of_float(static_cast<double>(value.int_value));
      if (value.kind != eff.kind) {
        error(path, assign.span, "property '" + assign.name + "' expects " +
                                     std::string(model::to_string(eff.kind)) + ", got " +
                                     model::to_string(value.kind));
        continue;
      }
      if (eff.kind == ValueKind::Enum && !eff.enum_tokens.empty() &&
          std::find(eff.enum_tokens.begin(), eff.enum_tokens.end(), value.text) ==
              eff.enum_tokens.end()) {
        error(path, assign.span,
              "'" + value.text + "' is not a valid token for property '" + assign.name + "'");
        continue;
      }
      eff.value = std::move(value);
      eff.explicitly_set = true;
    }
  }

  void resolve_instance(const WorkflowModel& scope, const ElementInstance& inst,
                        const std::string& path) {
    ResolvedElement element;
    element.instance = &inst;
    element.scope = &scope;
    element.path = path;
    element.type_closure = resolve_closure(path, inst.span, inst.assigned_types, inst.kind);
    element.properties = merge_properties(path, inst.span, element.type_closure);
    apply_assignments(path, inst.property_values, element.properties);

    bool has_exec = element.type_closure.count(kExecutavel) > 0;
    bool has_flow = element.type_closure.count(kFluxo) > 0;
    if (inst.kind == ElementKind::Task && (has_exec != has_flow))
      element.structure_type = has_exec ? kExecutavel : kFluxo;

    for (const auto& type_name : element.type_closure)
      if (const TypeDef* def = registry_.find(type_name))
        if (def->powertype_class) element.quality_attributes.insert(*def->powertype_class);

    for (const auto& point : inst.interfaces) {
      ResolvedInterface ri;
      ri.point = &point;
      ri.path = path + "." + point.name;
      ri.type_closure = resolve_closure(ri.path, point.span, point.assigned_types, point.kind);
      ri.properties = merge_properties(ri.path, point.span, ri.type_closure);
      apply_assignments(ri.path, point.property_values, ri.properties);
      element.interfaces.push_back(std::move(ri));
    }
    out_.elements.push_back(std::move(element));
  }

  const TypeRegistry& registry_;
  Resolution& out_;
};

}  // namespace

Resolution resolve_types(const WorkflowModel& model, const TypeRegistry& registry) {
  Resolution out;
  Resolver(registry, out).resolve_scope(model, "");
  return out;
}

// ---------------------------------------------------------------------------
// Validation (rules R1..R14)

namespace {

struct Endpoint {
  const ElementInstance* instance = nullptr;
  const InterfacePoint* point = nullptr;
  const ResolvedElement* resolved = nullptr;
  const ResolvedInterface* rpoint = nullptr;
  bool boundary = false;  // references the enclosing flow from inside its body
  std::string path;
};

class Validator {
 public:
  Validator(const TypeRegistry& registry, const Resolution& resolution)
      : registry_(registry), resolution_(resolution) {}

  std::vector<Diagnostic> run(const WorkflowModel& model) {
    walk(model, "", nullptr);
    std::sort(diagnostics_.begin(), diagnostics_.end(), [](const Diagnostic& a,
                                                           const Diagnostic& b) {
      auto key = [](const Diagnostic& d) {
        return std::tie(d.span.file, d.span.line, d.span.column, d.rule_id, d.path);
      };
      return key(a) < key(b);
    });
    return std::move(diagnostics_);
  }

 private:
  void report(const std::string& rule, const std::string& path, const SourceSpan& span,
              const std::string& message) {
    diagnostics_.push_back({rule, Severity::Error, path, span, message});
  }

  void walk(const WorkflowModel& scope, const std::string& prefix,
            const ResolvedElement* enclosing) {
    for (const auto& inst : scope.instances) {
      std::string path = prefix.empty() ? inst.name : prefix + "." + inst.name;
      const ResolvedElement* element = resolution_.find(path);
      if (!element) continue;
      check_element(*element);
      if (inst.body) walk(*inst.body, path, element);
    }
    check_attachments(scope, prefix, enclosing);
    check_graph_acyclic(scope, prefix, enclosing);
    check_port_attachment_counts(scope, prefix, enclosing);
  }

  // --- per-element rules -------------------------------------------------

  void check_element(const ResolvedElement& e) {
    const ElementInstance& inst = *e.instance;
    const auto& closure = e.type_closure;
    bool is_task = inst.kind == ElementKind::Task;

    // R2: exactly one structure type, and a body exactly for flows.
    if (is_task) {
      int structures = (closure.count(kExecutavel) > 0 ? 1 : 0) +
                       (closure.count(kFluxo) > 0 ? 1 : 0);
      if (structures != 1) {
        report("R2", e.path, inst.span,
               structures == 0 ? "task has no structure type (Executavel or Fluxo)"
                               : "task combines the disjoint structure types Executavel and Fluxo");
      } else if (e.structure_type == kFluxo && !inst.body) {
        report("R2", e.path, inst.span, "flow is missing its nested Family body");
      } else if (e.structure_type == kExecutavel && inst.body) {
        report("R2", e.path, inst.span, "an Executavel task cannot contain a nested Family");
      }
    }

    // R3: memory parallelism types only on Executavel elements.
    if (intersects(closure, kMemoryTypes) && !(is_task && closure.count(kExecutavel) > 0))
      report("R3", e.path, inst.span,
             "task-parallelism types apply only to Executavel tasks");

    // R4: sweep/mapreduce types only on Fluxo elements.
    if (intersects(closure, kFlowExtensions) && !(is_task && closure.count(kFluxo) > 0))
      report("R4", e.path, inst.span, "data-parallelism types apply only to Fluxo tasks");

    // R5: sweep flows fork through Bifurcacao and join through Juncao.
    if (closure.count("VarreduraDeParametros") > 0 && is_task) {
      bool has_fork = false;
      for (const auto& ri : e.interfaces)
        if (ri.point->direction == Direction::Input && ri.has_type("Bifurcacao")) has_fork = true;
      if (!has_fork)
        report("R5", e.path, inst.span,
               "parameter-sweep flow needs at least one Bifurcacao input port");
      for (const auto& ri : e.interfaces) {
        if (ri.point->direction != Direction::Output) continue;
        if (ri.has_type("Juncao")) continue;
        if (output_port_is_control_only(e, ri)) continue;
        report("R5", ri.path, ri.point->span,
               "data output ports of a parameter-sweep flow must be Juncao");
      }
    }

    // R6: a Bifurcacao port binds exactly one dataset source.
    for (const auto& ri : e.interfaces) {
      if (!ri.has_type("Bifurcacao")) continue;
      int bound = 0;
      for (const char* name : {"diretorio", "valores", "repeticoes"}) {
        const EffectiveProperty* p = ri.find(name);
        if (p && p->has_value()) ++bound;
      }
      if (bound != 1)
        report("R6", ri.path, ri.point->span,
               "Bifurcacao must bind exactly one of diretorio, valores, repeticoes (found " +
                   std::to_string(bound) + ")");
    }

    // R7: detection requires a correction type on the same element.
    bool detection = closure.count("Log") > 0 || closure.count("MonitoramentoDeTempo") > 0;
    if (detection) {
      bool correction = closure.count("RedundanciaTemporal") > 0 ||
                        (is_task && closure.count("Mascaramento") > 0) ||
                        (!is_task && closure.count("Propagacao") > 0);
      if (!correction)
        report("R7", e.path, inst.span,
               "fault detection requires a correction type on the same element");
    }

    // R8 / R9: masking is task-only, propagation connector-only.
    if (closure.count("Mascaramento") > 0 && !is_task)
      report("R8", e.path, inst.span, "Mascaramento applies only to tasks");
    if (closure.count("Propagacao") > 0 && inst.kind != ElementKind::Connector)
      report("R9", e.path, inst.span, "Propagacao applies only to connectors");

    // R10: provenance granularity only on flows.
    if (intersects(closure, kGranularityTypes) &&
        !(is_task && e.structure_type == std::optional<std::string>(kFluxo)))
      report("R10", e.path, inst.span, "granularity types apply only to flows");

    // R11: OPM elements carry a non-empty versao.
    check_opm_versions(e.path, inst.span, closure, e.properties);
    for (const auto& ri : e.interfaces)
      check_opm_versions(ri.path, ri.point->span, ri.type_closure, ri.properties);

    // R13: numeric sanity of fault-tolerance and parallelism settings.
    check_numeric(e);
  }

  bool output_port_is_control_only(const ResolvedElement& e, const ResolvedInterface& ri) const {
    int total = 0;
    int control = 0;
    for (const auto& att : e.scope->attachments) {
      if (att.task_side.instance != e.instance->name || att.task_side.point != ri.point->name)
        continue;
      ++total;
      if (att.dependency == model::DependencyKind::Control) ++control;
    }
    return total > 0 && total == control;
  }

  void check_opm_versions(const std::string& path, const SourceSpan& span,
                          const std::set<std::string>& closure,
                          const std::map<std::string, EffectiveProperty>& properties) {
    if (closure.count("OPM") == 0) return;
    auto it = properties.find("versao");
    if (it == properties.end() || !it->second.value || it->second.value->items.empty())
      report("R11", path, span, "OPM elements need a non-empty versao set");
  }

  void check_numeric(const ResolvedElement& e) {
    const SourceSpan& span = e.instance->span;
    auto require_int = [&](const char* type, const char* name,
                           std::function<bool(std::int64_t)> ok, const std::string& what) {
      if (e.type_closure.count(type) == 0) return;
      auto v = e.int_of(name);
      if (!v)
        report("R13", e.path, span, std::string(name) + " must be set");
      else if (!ok(*v))
        report("R13", e.path, span, std::string(name) + " must be " + what);
    };
    require_int("RedundanciaTemporal", "num_tentativas",
                [](std::int64_t v) { return v >= 1; }, ">= 1");
    require_int("Mascaramento", "num_copias",
                [](std::int64_t v) { return v >= 3 && v % 2 == 1; }, "odd and >= 3");
    require_int("MemoriaCompartilhada", "num_threads", [](std::int64_t v) { return v >= 1; },
                ">= 1");
    require_int("MemoriaDistribuida", "num_nos", [](std::int64_t v) { return v >= 1; }, ">= 1");
    require_int("MemoriaDistribuida", "procs_por_no", [](std::int64_t v) { return v >= 1; },
                ">= 1");
    if (e.type_closure.count("MonitoramentoDeTempo") > 0) {
      auto v = e.float_of("tempo_limite");
      if (!v)
        report("R13", e.path, e.instance->span, "tempo_limite must be set");
      else if (*v <= 0)
        report("R13", e.path, e.instance->span, "tempo_limite must be > 0");
    }
  }

  // --- attachment rules --------------------------------------------------

  Endpoint resolve_endpoint(const WorkflowModel& scope, const std::string& prefix,
                            const ResolvedElement* enclosing, const model::EndpointRef& ref) {
    Endpoint ep;
    const ElementInstance* inst = scope.find_instance(ref.instance);
    if (!inst && enclosing && enclosing->instance->name == ref.instance) {
      inst = enclosing->instance;
      ep.boundary = true;
      ep.resolved = enclosing;
    }
    if (!inst) return ep;  // parser guarantees this does not happen
    ep.instance = inst;
    ep.point = inst->find_interface(ref.point);
    if (!ep.boundary) {
      std::string path = prefix.empty() ? inst->name : prefix + "." + inst->name;
      ep.resolved = resolution_.find(path);
    }
    if (ep.resolved && ep.point) {
      ep.rpoint = ep.resolved->find_interface(ref.point);
      ep.path = ep.resolved->path + "." + ref.point;
    }
    return ep;
  }

  void check_attachments(const WorkflowModel& scope, const std::string& prefix,
                         const ResolvedElement* enclosing) {
    for (const auto& att : scope.attachments) {
      Endpoint task_side = resolve_endpoint(scope, prefix, enclosing, att.task_side);
      Endpoint conn_side = resolve_endpoint(scope, prefix, enclosing, att.connector_side);
      if (!task_side.instance || !conn_side.instance || !task_side.point || !conn_side.point)
        continue;

      if (task_side.instance->kind != ElementKind::Task ||
          conn_side.instance->kind != ElementKind::Connector) {
        report("R1", att.task_side.dotted(), att.span,
               "tasks interact only through connectors (attachments bind a task port "
               "to a connector role)");
        continue;
      }
      // Direction compatibility. Seen from inside a flow's body, the flow's
      // own input ports produce and its output ports consume.
      Direction port_dir = task_side.point->direction;
      bool produces = task_side.boundary ? (port_dir == Direction::Input)
                                         : (port_dir == Direction::Output);
      Direction role_dir = conn_side.point->direction;
      bool compatible = (att.form == AttachmentForm::To && produces &&
                         role_dir == Direction::Source) ||
                        (att.form == AttachmentForm::From && !produces &&
                         role_dir == Direction::Destination);
      if (!compatible)
        report("R1", att.task_side.dotted(), att.span,
               "attachment direction mismatch: output ports feed source roles ('to'), "
               "destination roles feed input ports ('from')");
    }
  }

  void check_graph_acyclic(const WorkflowModel& scope, const std::string& prefix,
                           const ResolvedElement* enclosing) {
    // Boundary faces of the enclosing flow are split into a pure source and a
    // pure sink, so only internal dependencies can form cycles.
    std::map<std::string, std::set<std::string>> edges;
    for (const auto& att : scope.attachments) {
      std::string task_node = att.task_side.instance;
      if (enclosing && task_node == enclosing->instance->name)
        task_node = att.form == AttachmentForm::To ? "\x01in" : "\x01out";
      if (att.form == AttachmentForm::To)
        edges[task_node].insert(att.connector_side.instance);
      else
        edges[att.connector_side.instance].insert(task_node);
    }
    std::set<std::string> visiting, done;
    std::vector<std::string> stack;
    std::function<bool(const std::string&)> dfs = [&](const std::string& node) {
      if (done.count(node)) return false;
      if (visiting.count(node)) {
        auto it = std::find(stack.begin(), stack.end(), node);
        std::string cycle;
        for (; it != stack.end(); ++it) cycle += *it + " -> ";
        cycle += node;
        report("R12", prefix.empty() ? scope.name : prefix, scope.span,
               "workflow graph has a cycle: " + cycle);
        return true;
      }
      visiting.insert(node);
      stack.push_back(node);
      for (const auto& next : edges[node])
        if (dfs(next)) return true;
      stack.pop_back();
      visiting.erase(node);
      done.insert(node);
      return false;
    };
    std::vector<std::string> roots;
    for (const auto& [node, _] : edges) roots.push_back(node);
    for (const auto& node : roots)
      if (dfs(node)) return;  // one cycle report per scope
  }

  void check_port_attachment_counts(const WorkflowModel& scope, const std::string& prefix,
                                    const ResolvedElement* enclosing) {
    // R14: consuming faces take exactly one attachment. Consuming faces are
    // input ports (outer face), flow output ports (inner face), and connector
    // source roles. Bifurcacao ports draw from datasets instead of edges.
    auto count_refs = [&](const std::string& inst, const std::string& point,
                          std::optional<AttachmentForm> form) {
      int n = 0;
      for (const auto& att : scope.attachments) {
        const model::EndpointRef& ref =
            att.connector_side.instance == inst && att.connector_side.point == point
                ? att.connector_side
                : att.task_side;
        if (ref.instance != inst || ref.point != point) continue;
        if (form && att.form != *form) continue;
        ++n;
      }
      return n;
    };

    for (const auto& inst : scope.instances) {
      std::string path = prefix.empty() ? inst.name : prefix + "." + inst.name;
      const ResolvedElement* element = resolution_.find(path);
      if (!element) continue;
      if (inst.kind == ElementKind::Task) {
        for (const auto& ri : element->interfaces) {
          if (ri.point->direction != Direction::Input) continue;
          if (ri.has_type("Bifurcacao")) continue;
          int n = count_refs(inst.name, ri.point->name, AttachmentForm::From);
          if (n != 1)
            report("R14", ri.path, ri.point->span,
                   "input port needs exactly one attachment, found " + std::to_string(n));
        }
      } else {
        for (const auto& ri : element->interfaces) {
          if (ri.point->direction != Direction::Source) continue;
          int n = count_refs(inst.name, ri.point->name, std::nullopt);
          if (n != 1)
            report("R14", ri.path, ri.point->span,
                   "source role needs exactly one attachment, found " + std::to_string(n));
        }
      }
    }

    if (enclosing && enclosing->type_closure.count("MapReduce") == 0) {
      for (const auto& ri : enclosing->interfaces) {
        if (ri.point->direction != Direction::Output) continue;
        int n = 0;
        for (const auto& att : scope.attachments)
          if (att.task_side.instance == enclosing->instance->name &&
              att.task_side.point == ri.point->name && att.form == AttachmentForm::From)
            ++n;
        if (n != 1)
          report("R14", ri.path, ri.point->span,
                 "flow output port needs exactly one producer inside the body, found " +
                     std::to_string(n));
      }
    }
  }

  const TypeRegistry& registry_;
  const Resolution& resolution_;
  std::vector<Diagnostic> diagnostics_;
};

}  // namespace

std::string render_diagnostic(const Diagnostic& d) {
  std::ostringstream os;
  os << d.rule_id << " " << (d.severity == Severity::Error ? "error" : "warning") << " " << d.path
     << " " << model::to_string(d.span) << " " << d.message;
  return os.str();
}

std::vector<Diagnostic> validate(const WorkflowModel& model, const TypeRegistry& registry,
                                 const Resolution& resolution) {
  return Validator(registry, resolution).run(model);
}

}  // namespace osc::types
