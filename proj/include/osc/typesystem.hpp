#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "osc/model.hpp"

namespace osc::types {

/// Builtin style plus user extensions, with subtype queries over `extends`.
class TypeRegistry {
 public:
  void add(model::TypeDef def);

  const model::TypeDef* find(const std::string& name) const;

  /// True when `name` equals `ancestor` or reaches it through extends.
  bool is_subtype(const std::string& name, const std::string& ancestor) const;

  /// `name` plus all transitive ancestors (unknown names are kept as-is so
  /// the resolver can report them).
  std::set<std::string> closure(const std::string& name) const;

  const std::map<std::string, model::TypeDef>& defs() const { return defs_; }

 private:
  std::map<std::string, model::TypeDef> defs_;
};

/// The predefined OSC style: structure types, parallelism and data-parallel
/// extensions, fork/join port types, and the quality-attribute types.
TypeRegistry builtin_style();

/// Names of the two base structure types.
inline const char* kExecutavel = "Executavel";
inline const char* kFluxo = "Fluxo";

/// A property slot after inheritance flattening and default application.
struct EffectiveProperty {
  model::ValueKind kind = model::ValueKind::Int;
  std::vector<std::string> enum_tokens;
  std::optional<model::PropertyValue> value;
  bool explicitly_set = false;
  std::string declared_by;

  bool has_value() const { return value.has_value(); }
};

struct ResolvedInterface {
  const model::InterfacePoint* point = nullptr;
  std::string path;  // dotted, e.g. "F.psipred.saida"
  std::set<std::string> type_closure;
  std::map<std::string, EffectiveProperty> properties;

  bool has_type(const std::string& name) const { return type_closure.count(name) > 0; }
  const EffectiveProperty* find(const std::string& name) const;
};

/// An instance with flattened types: structure type, merged properties, and
/// quality-attribute classifiers, plus its resolved interface points.
struct ResolvedElement {
  const model::ElementInstance* instance = nullptr;
  const model::WorkflowModel* scope = nullptr;  // family containing the instance
  std::string path;                             // dotted from the top level
  std::optional<std::string> structure_type;    // Executavel or Fluxo, tasks only
  std::set<std::string> type_closure;
  std::map<std::string, EffectiveProperty> properties;
  std::set<model::PowertypeClass> quality_attributes;
  std::vector<ResolvedInterface> interfaces;

  bool has_type(const std::string& name) const { return type_closure.count(name) > 0; }
  const EffectiveProperty* find(const std::string& name) const;
  const ResolvedInterface* find_interface(const std::string& name) const;

  std::optional<std::int64_t> int_of(const std::string& name) const;
  std::optional<double> float_of(const std::string& name) const;
  std::optional<bool> bool_of(const std::string& name) const;
  std::optional<std::string> text_of(const std::string& name) const;
  std::vector<std::string> set_of(const std::string& name) const;
};

struct ResolveError {
  std::string path;
  model::SourceSpan span;
  std::string message;
};

/// Outcome of resolve_types: all elements of the model tree (depth-first,
/// declaration order) or the errors that prevented resolution.
struct Resolution {
  std::vector<ResolvedElement> elements;
  std::vector<ResolveError> errors;

  bool ok() const { return errors.empty(); }
  const ResolvedElement* find(const std::string& path) const;
};

/// Registry for a model: builtins plus the model's own type definitions.
/// Fails (via Resolution-style errors appended to `errors`) on clashes with
/// builtin names or unknown/incompatible extends.
TypeRegistry registry_for(const model::WorkflowModel& model, std::vector<ResolveError>& errors);

/// Flattens assigned types, applies defaults, and computes structure types
/// for every instance and interface point of the model tree.
Resolution resolve_types(const model::WorkflowModel& model, const TypeRegistry& registry);

enum class Severity { Error, Warning };

struct Diagnostic {
  std::string rule_id;  // R1..R14
  Severity severity = Severity::Error;
  std::string path;
  model::SourceSpan span;
  std::string message;
};

/// One line: `rule_id severity path file:line:col message`.
std::string render_diagnostic(const Diagnostic& d);

/// Checks composition rules R1..R14. Empty result means the model is valid.
/// Diagnostics are sorted by location.
std::vector<Diagnostic> validate(const model::WorkflowModel& model, const TypeRegistry& registry,
                                 const Resolution& resolution);

}  // namespace osc::types
