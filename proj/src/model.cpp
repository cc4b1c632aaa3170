#include "osc/model.hpp"

#include <sstream>
#include <stdexcept>

namespace osc::model {

const char* to_string(ElementKind kind) {
  switch (kind) {
    case ElementKind::Task: return "Task";
    case ElementKind::Connector: return "Connector";
    case ElementKind::Port: return "Port";
    case ElementKind::Role: return "Role";
  }
  return "?";
}

const char* to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::Int: return "int";
    case ValueKind::Float: return "float";
    case ValueKind::String: return "string";
    case ValueKind::Bool: return "bool";
    case ValueKind::Set: return "set";
    case ValueKind::Enum: return "enum";
  }
  return "?";
}

const char* to_string(PowertypeClass cls) {
  switch (cls) {
    case PowertypeClass::Structure: return "Structure";
    case PowertypeClass::TaskParallelism: return "TaskParallelism";
    case PowertypeClass::DataParallelism: return "DataParallelism";
    case PowertypeClass::FaultDetection: return "FaultDetection";
    case PowertypeClass::FaultCorrection: return "FaultCorrection";
    case PowertypeClass::Masking: return "Masking";
    case PowertypeClass::Provenance: return "Provenance";
    case PowertypeClass::Granularity: return "Granularity";
  }
  return "?";
}

const char* to_string(Direction direction) {
  switch (direction) {
    case Direction::Input: return "in";
    case Direction::Output: return "out";
    case Direction::Source: return "source";
    case Direction::Destination: return "dest";
  }
  return "?";
}

std::string to_string(const SourceSpan& span) {
  std::ostringstream os;
  os << span.file << ":" << span.line << ":" << span.column;
  return os.str();
}

PropertyValue PropertyValue::of_int(std::int64_t v) {
  PropertyValue p;
  p.kind = ValueKind::Int;
  p.int_value = v;
  return p;
}

PropertyValue PropertyValue::of_float(double v) {
  PropertyValue p;
  p.kind = ValueKind::Float;
  p.float_value = v;
  return p;
}

PropertyValue PropertyValue::of_string(std::string v) {
  PropertyValue p;
  p.kind = ValueKind::String;
  p.text = std::move(v);
  return p;
}

PropertyValue PropertyValue::of_bool(bool v) {
  PropertyValue p;
  p.kind = ValueKind::Bool;
  p.int_value = v ? 1 : 0;
  return p;
}

PropertyValue PropertyValue::of_set(std::vector<std::string> v) {
  PropertyValue p;
  p.kind = ValueKind::Set;
  p.items = std::move(v);
  return p;
}

PropertyValue PropertyValue::of_enum(std::string token) {
  PropertyValue p;
  p.kind = ValueKind::Enum;
  p.text = std::move(token);
  return p;
}

bool PropertyValue::operator==(const PropertyValue& other) const {
  if (kind != other.kind) return false;
  switch (kind) {
    case ValueKind::Int:
    case ValueKind::Bool: return int_value == other.int_value;
    case ValueKind::Float: return float_value == other.float_value;
    case ValueKind::String:
    case ValueKind::Enum: return text == other.text;
    case ValueKind::Set: return items == other.items;
  }
  return false;
}

static std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c; break;
    }
  }
  out += "\"";
  return out;
}

std::string PropertyValue::render() const {
  switch (kind) {
    case ValueKind::Int: return std::to_string(int_value);
    case ValueKind::Bool: return int_value ? "true" : "false";
    case ValueKind::Float: {
      std::ostringstream os;
      os.precision(17);
      os << float_value;
      std::string s = os.str();
      if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
          s.find("inf") == std::string::npos && s.find("nan") == std::string::npos) {
        s += ".0";
      }
      return s;
    }
    case ValueKind::String: return quote(text);
    case ValueKind::Enum: return text;
    case ValueKind::Set: {
      std::string out = "{";
      for (size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += quote(items[i]);
      }
      out += "}";
      return out;
    }
  }
  return "";
}

const PropertyAssignment* InterfacePoint::find_assignment(const std::string& name) const {
  for (const auto& p : property_values)
    if (p.name == name) return &p;
  return nullptr;
}

const InterfacePoint* ElementInstance::find_interface(const std::string& name) const {
  for (const auto& i : interfaces)
    if (i.name == name) return &i;
  return nullptr;
}

const PropertyAssignment* ElementInstance::find_assignment(const std::string& name) const {
  for (const auto& p : property_values)
    if (p.name == name) return &p;
  return nullptr;
}

const ElementInstance* WorkflowModel::find_instance(const std::string& name) const {
  for (const auto& i : instances)
    if (i.name == name) return &i;
  return nullptr;
}

const TypeDef* WorkflowModel::find_type_def(const std::string& name) const {
  for (const auto& t : type_defs)
    if (t.name == name) return &t;
  return nullptr;
}

static bool equal(const PropertyAssignment& a, const PropertyAssignment& b) {
  return a.name == b.name && a.value == b.value;
}

static bool equal(const std::vector<PropertyAssignment>& a,
                  const std::vector<PropertyAssignment>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!equal(a[i], b[i])) return false;
  return true;
}

static bool equal(const PropertyDecl& a, const PropertyDecl& b) {
  return a.name == b.name && a.kind == b.kind && a.enum_tokens == b.enum_tokens &&
         a.default_value == b.default_value;
}

static bool equal(const TypeDef& a, const TypeDef& b) {
  if (a.name != b.name || a.kinds != b.kinds || a.extends != b.extends ||
      a.powertype_class != b.powertype_class || a.properties.size() != b.properties.size())
    return false;
  for (size_t i = 0; i < a.properties.size(); ++i)
    if (!equal(a.properties[i], b.properties[i])) return false;
  return true;
}

static bool equal(const InterfacePoint& a, const InterfacePoint& b) {
  return a.name == b.name && a.kind == b.kind && a.direction == b.direction &&
         a.assigned_types == b.assigned_types && equal(a.property_values, b.property_values);
}

static bool equal(const Attachment& a, const Attachment& b) {
  return a.task_side.instance == b.task_side.instance && a.task_side.point == b.task_side.point &&
         a.connector_side.instance == b.connector_side.instance &&
         a.connector_side.point == b.connector_side.point && a.form == b.form &&
         a.dependency == b.dependency;
}

bool equal(const ElementInstance& a, const ElementInstance& b) {
  if (a.name != b.name || a.kind != b.kind || a.assigned_types != b.assigned_types)
    return false;
  if (!equal(a.property_values, b.property_values)) return false;
  if (a.interfaces.size() != b.interfaces.size()) return false;
  for (size_t i = 0; i < a.interfaces.size(); ++i)
    if (!equal(a.interfaces[i], b.interfaces[i])) return false;
  if ((a.body == nullptr) != (b.body == nullptr)) return false;
  if (a.body && !equal(*a.body, *b.body)) return false;
  return true;
}

bool equal(const WorkflowModel& a, const WorkflowModel& b) {
  if (a.name != b.name) return false;
  if (a.type_defs.size() != b.type_defs.size() || a.instances.size() != b.instances.size() ||
      a.attachments.size() != b.attachments.size())
    return false;
  for (size_t i = 0; i < a.type_defs.size(); ++i)
    if (!equal(a.type_defs[i], b.type_defs[i])) return false;
  for (size_t i = 0; i < a.instances.size(); ++i)
    if (!equal(a.instances[i], b.instances[i])) return false;
  for (size_t i = 0; i < a.attachments.size(); ++i)
    if (!equal(a.attachments[i], b.attachments[i])) return false;
  return true;
}

const ElementInstance* lookup_instance(const WorkflowModel& model, const std::string& path) {
  const WorkflowModel* scope = &model;
  size_t start = 0;
  const ElementInstance* found = nullptr;
  while (start <= path.size()) {
    size_t dot = path.find('.', start);
    std::string segment = path.substr(start, dot == std::string::npos ? dot : dot - start);
    found = scope->find_instance(segment);
    if (!found) return nullptr;
    if (dot == std::string::npos) return found;
    if (!found->body) return nullptr;
    scope = found->body.get();
    start = dot + 1;
  }
  return nullptr;
}

std::vector<const Attachment*> collect_attachments(const WorkflowModel& model,
                                                   const std::string& path) {
  // Walk to the instance's enclosing scope.
  const WorkflowModel* scope = &model;
  std::string name = path;
  size_t dot;
  while ((dot = name.find('.')) != std::string::npos) {
    const ElementInstance* flow = scope->find_instance(name.substr(0, dot));
    if (!flow || !flow->body)
      throw std::runtime_error("unknown instance: " + path);
    scope = flow->body.get();
    name = name.substr(dot + 1);
  }
  const ElementInstance* inst = scope->find_instance(name);
  if (!inst) throw std::runtime_error("unknown instance: " + path);

  std::vector<const Attachment*> out;
  for (const auto& a : scope->attachments)
    if (a.touches(name)) out.push_back(&a);
  if (inst->body) {
    // Boundary attachments inside the body refer to the flow by name.
    for (const auto& a : inst->body->attachments)
      if (a.touches(name)) out.push_back(&a);
  }
  return out;
}

}  // namespace osc::model
