#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace osc::model {

/// Kind of modeling element a type or instance belongs to.
enum class ElementKind { Task, Connector, Port, Role };

/// Tagged kind of a property value.
enum class ValueKind { Int, Float, String, Bool, Set, Enum };

/// Classifier tags grouping the builtin style's types.
enum class PowertypeClass {
  Structure,
  TaskParallelism,
  DataParallelism,
  FaultDetection,
  FaultCorrection,
  Masking,
  Provenance,
  Granularity,
};

const char* to_string(ElementKind kind);
const char* to_string(ValueKind kind);
const char* to_string(PowertypeClass cls);

/// Location of a construct in its source file. Lines and columns are 1-based.
struct SourceSpan {
  std::string file;
  int line = 1;
  int column = 1;
};

std::string to_string(const SourceSpan& span);

/// A tagged property value: exactly one alternative is active, per `kind`.
struct PropertyValue {
  ValueKind kind = ValueKind::Int;
  std::int64_t int_value = 0;
  double float_value = 0.0;
  std::string text;                 // String and Enum payload
  std::vector<std::string> items;   // Set payload, declaration order

  static PropertyValue of_int(std::int64_t v);
  static PropertyValue of_float(double v);
  static PropertyValue of_string(std::string v);
  static PropertyValue of_bool(bool v);
  static PropertyValue of_set(std::vector<std::string> v);
  static PropertyValue of_enum(std::string token);

  bool bool_value() const { return int_value != 0; }
  bool operator==(const PropertyValue& other) const;
  std::string render() const;
};

/// Property slot declared by a type definition.
struct PropertyDecl {
  std::string name;
  ValueKind kind = ValueKind::Int;
  std::vector<std::string> enum_tokens;  // Enum kinds only
  std::optional<PropertyValue> default_value;
  SourceSpan span;
};

/// Property value assigned on an instance or interface point.
struct PropertyAssignment {
  std::string name;
  PropertyValue value;
  SourceSpan span;
};

/// A task, connector, port, or role type. User definitions apply to a single
/// element kind; builtin quality types may span several.
struct TypeDef {
  std::string name;
  std::set<ElementKind> kinds;
  std::vector<std::string> extends;
  std::vector<PropertyDecl> properties;
  std::optional<PowertypeClass> powertype_class;
  SourceSpan span;

  bool applies_to(ElementKind kind) const { return kinds.count(kind) > 0; }
};

/// Direction of an interface point. Ports are Input/Output, roles are
/// Source/Destination. Fixed at declaration.
enum class Direction { Input, Output, Source, Destination };

const char* to_string(Direction direction);

/// A port of a task or a role of a connector.
struct InterfacePoint {
  std::string name;
  ElementKind kind = ElementKind::Port;  // Port or Role
  Direction direction = Direction::Input;
  std::vector<std::string> assigned_types;
  std::vector<PropertyAssignment> property_values;
  SourceSpan span;

  const PropertyAssignment* find_assignment(const std::string& name) const;
};

struct WorkflowModel;

/// A task or connector instance. Tasks whose structure type is Fluxo carry a
/// nested model as their body.
struct ElementInstance {
  std::string name;
  ElementKind kind = ElementKind::Task;  // Task or Connector
  std::vector<std::string> assigned_types;
  std::vector<PropertyAssignment> property_values;
  std::vector<InterfacePoint> interfaces;
  std::unique_ptr<WorkflowModel> body;
  SourceSpan span;

  const InterfacePoint* find_interface(const std::string& name) const;
  const PropertyAssignment* find_assignment(const std::string& name) const;
};

/// One endpoint of an attachment: `instance.point` in the enclosing scope.
struct EndpointRef {
  std::string instance;
  std::string point;
  SourceSpan span;

  std::string dotted() const { return instance + "." + point; }
};

enum class DependencyKind { Data, Control };

/// Which surface form the attachment used. `To` binds an output port to a
/// source role; `From` binds an input port to a destination role.
enum class AttachmentForm { To, From };

struct Attachment {
  EndpointRef task_side;       // port side; may name the enclosing flow
  EndpointRef connector_side;  // role side
  AttachmentForm form = AttachmentForm::To;
  DependencyKind dependency = DependencyKind::Data;
  SourceSpan span;

  bool touches(const std::string& instance) const {
    return task_side.instance == instance || connector_side.instance == instance;
  }
};

/// A parsed workflow description: type definitions, instances, and
/// attachments in declaration order. Immutable after construction.
struct WorkflowModel {
  std::string name;
  std::vector<TypeDef> type_defs;
  std::vector<ElementInstance> instances;
  std::vector<Attachment> attachments;
  SourceSpan span;

  const ElementInstance* find_instance(const std::string& name) const;
  const TypeDef* find_type_def(const std::string& name) const;
};

/// Structural equality over whole models, bodies included.
bool equal(const WorkflowModel& a, const WorkflowModel& b);
bool equal(const ElementInstance& a, const ElementInstance& b);

/// Looks up an instance by dotted path, descending into flow bodies
/// ("F.T" finds task T inside flow F). Returns nullptr when absent.
const ElementInstance* lookup_instance(const WorkflowModel& model, const std::string& path);

/// All attachments touching `instance` (a dotted path): those of its own
/// scope first, then boundary attachments inside its body, declaration order.
/// Throws std::runtime_error when the instance does not exist.
std::vector<const Attachment*> collect_attachments(const WorkflowModel& model,
                                                   const std::string& path);

}  // namespace osc::model
