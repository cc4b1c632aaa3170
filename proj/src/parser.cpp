#include "osc/parser.hpp"

#include <cctype>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace osc::parse {

using model::Attachment;
using model::AttachmentForm;
using model::Direction;
using model::ElementInstance;
using model::ElementKind;
using model::InterfacePoint;
using model::PropertyAssignment;
using model::PropertyDecl;
using model::PropertyValue;
using model::SourceSpan;
using model::TypeDef;
using model::ValueKind;
using model::WorkflowModel;

ParseError::ParseError(SourceSpan span, std::string expected, std::string found)
    : std::runtime_error(model::to_string(span) + ": expected " + expected + ", found " + found),
      span_(std::move(span)),
      expected_(std::move(expected)),
      found_(std::move(found)) {}

namespace {

enum class Tok { Ident, Int, Float, String, LBrace, RBrace, Colon, Semi, Comma, Eq, Dot, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;        // identifier or string payload
  std::int64_t int_value = 0;
  double float_value = 0.0;
  SourceSpan span;

  std::string describe() const {
    switch (kind) {
      case Tok::Ident: return "'" + text + "'";
      case Tok::Int:
      case Tok::Float: return "number";
      case Tok::String: return "string literal";
      case Tok::LBrace: return "'{'";
      case Tok::RBrace: return "'}'";
      case Tok::Colon: return "':'";
      case Tok::Semi: return "';'";
      case Tok::Comma: return "','";
      case Tok::Eq: return "'='";
      case Tok::Dot: return "'.'";
      case Tok::End: return "end of input";
    }
    return "?";
  }
};

class Lexer {
 public:
  Lexer(const std::string& src, std::string file) : src_(src), file_(std::move(file)) {}

  Token next() {
    skip_trivia();
    Token t;
    t.span = here();
    if (pos_ >= src_.size()) {
      t.kind = Tok::End;
      return t;
    }
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return lex_ident(t);
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && pos_ + 1 < src_.size() &&
         std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))))
      return lex_number(t);
    if (c == '"') return lex_string(t);
    switch (c) {
      case '{': t.kind = Tok::LBrace; break;
      case '}': t.kind = Tok::RBrace; break;
      case ':': t.kind = Tok::Colon; break;
      case ';': t.kind = Tok::Semi; break;
      case ',': t.kind = Tok::Comma; break;
      case '=': t.kind = Tok::Eq; break;
      case '.': t.kind = Tok::Dot; break;
      default:
        throw ParseError(t.span, "a token", std::string("'") + c + "'");
    }
    advance();
    return t;
  }

 private:
  SourceSpan here() const { return {file_, line_, col_}; }

  void advance() {
    if (pos_ < src_.size()) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_trivia() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  Token lex_ident(Token t) {
    std::string s;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                  src_[pos_] == '_')) {
      s += src_[pos_];
      advance();
    }
    t.kind = Tok::Ident;
    t.text = std::move(s);
    return t;
  }

  Token lex_number(Token t) {
    std::string s;
    bool is_float = false;
    if (src_[pos_] == '-') {
      s += '-';
      advance();
    }
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        s += src_[pos_];
        advance();
      }
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.' && pos_ + 1 < src_.size() &&
        std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
      is_float = true;
      s += '.';
      advance();
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      is_float = true;
      s += 'e';
      advance();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
        s += src_[pos_];
        advance();
      }
      digits();
    }
    if (is_float) {
      t.kind = Tok::Float;
      t.float_value = std::stod(s);
    } else {
      t.kind = Tok::Int;
      t.int_value = std::stoll(s);
    }
    return t;
  }

  Token lex_string(Token t) {
    advance();  // opening quote
    std::string s;
    while (true) {
      if (pos_ >= src_.size()) throw ParseError(t.span, "closing '\"'", "end of input");
      char c = src_[pos_];
      if (c == '"') {
        advance();
        break;
      }
      if (c == '\\') {
        advance();
        if (pos_ >= src_.size()) throw ParseError(t.span, "escape character", "end of input");
        char e = src_[pos_];
        switch (e) {
          case '"': s += '"'; break;
          case '\\': s += '\\'; break;
          case 'n': s += '\n'; break;
          case 't': s += '\t'; break;
          default: throw ParseError(here(), "a valid escape", std::string("'\\") + e + "'");
        }
        advance();
      } else if (c == '\n') {
        throw ParseError(t.span, "closing '\"'", "end of line");
      } else {
        s += c;
        advance();
      }
    }
    t.kind = Tok::String;
    t.text = std::move(s);
    return t;
  }

  const std::string& src_;
  std::string file_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

// Words that start declarations; not usable as names.
const std::unordered_set<std::string> kReserved = {
    "Family", "Component", "Connector", "Port", "Role", "Type", "Property", "Attachment"};

class Parser {
 public:
  Parser(const std::string& src, const std::string& file) : lexer_(src, file) {
    cur_ = lexer_.next();
  }

  WorkflowModel parse() {
    WorkflowModel m = parse_family();
    accept(Tok::Semi);
    expect(Tok::End, "end of input");
    check_type_defs(m);
    check_references(m, nullptr);
    return m;
  }

 private:
  Token cur_;
  Lexer lexer_;
  std::unordered_map<std::string, const TypeDef*> global_types_;

  [[noreturn]] void fail(const std::string& expected) {
    throw ParseError(cur_.span, expected, cur_.describe());
  }

  Token take() {
    Token t = cur_;
    cur_ = lexer_.next();
    return t;
  }

  bool at(Tok k) const { return cur_.kind == k; }
  bool at_word(const char* w) const { return cur_.kind == Tok::Ident && cur_.text == w; }

  bool accept(Tok k) {
    if (!at(k)) return false;
    take();
    return true;
  }

  bool accept_word(const char* w) {
    if (!at_word(w)) return false;
    take();
    return true;
  }

  Token expect(Tok k, const std::string& what) {
    if (!at(k)) fail(what);
    return take();
  }

  void expect_word(const char* w) {
    if (!at_word(w)) fail(std::string("'") + w + "'");
    take();
  }

  std::string expect_name() {
    if (!at(Tok::Ident)) fail("an identifier");
    if (kReserved.count(cur_.text)) fail("an identifier");
    return take().text;
  }

  WorkflowModel parse_family() {
    WorkflowModel m;
    m.span = cur_.span;
    expect_word("Family");
    m.name = expect_name();
    expect(Tok::Eq, "'='");
    expect(Tok::LBrace, "'{'");
    std::set<std::string> instance_names;
    while (!at(Tok::RBrace)) {
      if (at_word("Attachment")) {
        m.attachments.push_back(parse_attachment());
      } else if (at_word("Component") || at_word("Connector") || at_word("Port") ||
                 at_word("Role")) {
        Token head = take();
        if (at_word("Type")) {
          m.type_defs.push_back(parse_type_def(head));
        } else if (head.text == "Component" || head.text == "Connector") {
          ElementInstance inst = parse_instance(head);
          if (!instance_names.insert(inst.name).second)
            throw ParseError(inst.span, "a unique instance name",
                             "duplicate '" + inst.name + "'");
          m.instances.push_back(std::move(inst));
        } else {
          fail("'Type' (ports and roles are declared inside instances)");
        }
      } else {
        fail("'Component', 'Connector', 'Port', 'Role', 'Attachment' or '}'");
      }
    }
    expect(Tok::RBrace, "'}'");
    return m;
  }

  static ElementKind kind_of(const std::string& word) {
    if (word == "Component") return ElementKind::Task;
    if (word == "Connector") return ElementKind::Connector;
    if (word == "Port") return ElementKind::Port;
    return ElementKind::Role;
  }

  TypeDef parse_type_def(const Token& head) {
    TypeDef def;
    def.span = head.span;
    def.kinds = {kind_of(head.text)};
    expect_word("Type");
    def.name = expect_name();
    if (accept_word("extends")) {
      def.extends.push_back(expect_name());
      while (accept(Tok::Comma)) def.extends.push_back(expect_name());
    }
    expect(Tok::Eq, "'='");
    expect(Tok::LBrace, "'{'");
    std::set<std::string> names;
    while (at_word("Property")) {
      PropertyDecl decl = parse_prop_decl();
      if (!names.insert(decl.name).second)
        throw ParseError(decl.span, "a unique property name", "duplicate '" + decl.name + "'");
      def.properties.push_back(std::move(decl));
    }
    expect(Tok::RBrace, "'}'");
    accept(Tok::Semi);
    return def;
  }

  PropertyDecl parse_prop_decl() {
    PropertyDecl decl;
    decl.span = cur_.span;
    expect_word("Property");
    decl.name = expect_name();
    expect(Tok::Colon, "':'");
    parse_kind(decl.kind, decl.enum_tokens);
    if (accept(Tok::Eq)) decl.default_value = parse_value();
    expect(Tok::Semi, "';'");
    if (decl.default_value && !value_matches(decl.kind, *decl.default_value))
      throw ParseError(decl.span, std::string(model::to_string(decl.kind)) + " default",
                       std::string(model::to_string(decl.default_value->kind)) + " value");
    return decl;
  }

  void parse_kind(ValueKind& kind, std::vector<std::string>& enum_tokens) {
    if (!at(Tok::Ident)) fail("a property kind");
    std::string word = take().text;
    if (word == "int") kind = ValueKind::Int;
    else if (word == "float") kind = ValueKind::Float;
    else if (word == "string") kind = ValueKind::String;
    else if (word == "bool") kind = ValueKind::Bool;
    else if (word == "set") kind = ValueKind::Set;
    else if (word == "enum") {
      kind = ValueKind::Enum;
      if (accept(Tok::LBrace)) {
        enum_tokens.push_back(expect_name());
        while (accept(Tok::Comma)) enum_tokens.push_back(expect_name());
        expect(Tok::RBrace, "'}'");
      }
    } else {
      fail("one of int, float, string, bool, set, enum");
    }
  }

  static bool value_matches(ValueKind kind, const PropertyValue& v) {
    if (kind == v.kind) return true;
    if (kind == ValueKind::Float && v.kind == ValueKind::Int) return true;
    return false;
  }

  PropertyValue parse_value() {
    if (at(Tok::Int)) return PropertyValue::of_int(take().int_value);
    if (at(Tok::Float)) return PropertyValue::of_float(take().float_value);
    if (at(Tok::String)) return PropertyValue::of_string(take().text);
    if (at(Tok::LBrace)) {
      Token open = take();
      std::vector<std::string> items;
      std::set<std::string> seen;
      if (!at(Tok::RBrace)) {
        do {
          Token s = expect(Tok::String, "a string literal");
          if (!seen.insert(s.text).second)
            throw ParseError(s.span, "distinct set elements", "duplicate \"" + s.text + "\"");
          items.push_back(s.text);
        } while (accept(Tok::Comma));
      }
      expect(Tok::RBrace, "'}'");
      return PropertyValue::of_set(std::move(items));
    }
    if (at(Tok::Ident)) {
      Token t = take();
      if (t.text == "true") return PropertyValue::of_bool(true);
      if (t.text == "false") return PropertyValue::of_bool(false);
      return PropertyValue::of_enum(t.text);
    }
    fail("a value");
  }

  PropertyAssignment parse_prop_assign() {
    PropertyAssignment assign;
    assign.span = cur_.span;
    if (accept_word("Property")) {
      assign.name = expect_name();
      if (accept(Tok::Colon)) {
        ValueKind kind;
        std::vector<std::string> tokens;
        parse_kind(kind, tokens);
        expect(Tok::Eq, "'='");
        assign.value = parse_value();
        if (!value_matches(kind, assign.value))
          throw ParseError(assign.span, std::string(model::to_string(kind)) + " value",
                           std::string(model::to_string(assign.value.kind)) + " value");
        if (kind == ValueKind::Float && assign.value.kind == ValueKind::Int)
          assign.value = PropertyValue::of_float(static_cast<double>(assign.value.int_value));
      } else {
        expect(Tok::Eq, "'='");
        assign.value = parse_value();
      }
    } else {
      assign.name = expect_name();
      expect(Tok::Eq, "'='");
      assign.value = parse_value();
    }
    expect(Tok::Semi, "';'");
    return assign;
  }

  ElementInstance parse_instance(const Token& head) {
    ElementInstance inst;
    inst.span = head.span;
    inst.kind = kind_of(head.text);
    inst.name = expect_name();
    expect(Tok::Colon, "':'");
    inst.assigned_types.push_back(expect_name());
    while (accept(Tok::Comma)) inst.assigned_types.push_back(expect_name());
    expect(Tok::Eq, "'='");
    expect(Tok::LBrace, "'{'");
    std::set<std::string> prop_names;
    std::set<std::string> point_names;
    while (!at(Tok::RBrace)) {
      if (at_word("Port") || at_word("Role")) {
        InterfacePoint point = parse_interface(take());
        if (point.kind == ElementKind::Port && inst.kind != ElementKind::Task)
          throw ParseError(point.span, "'Role' (connectors have roles)", "'Port'");
        if (point.kind == ElementKind::Role && inst.kind != ElementKind::Connector)
          throw ParseError(point.span, "'Port' (tasks have ports)", "'Role'");
        if (!point_names.insert(point.name).second)
          throw ParseError(point.span, "a unique interface name", "duplicate '" + point.name + "'");
        inst.interfaces.push_back(std::move(point));
      } else if (at_word("Family")) {
        if (inst.body)
          throw ParseError(cur_.span, "at most one nested Family", "a second body");
        if (inst.kind != ElementKind::Task)
          throw ParseError(cur_.span, "no nested Family in a connector", "'Family'");
        inst.body = std::make_unique<WorkflowModel>(parse_family());
        accept(Tok::Semi);
        if (inst.body->find_instance(inst.name))
          throw ParseError(inst.span, "body instance names distinct from the flow's own name",
                           "shadowing '" + inst.name + "'");
      } else if (at_word("Property") || at(Tok::Ident)) {
        PropertyAssignment assign = parse_prop_assign();
        if (!prop_names.insert(assign.name).second)
          throw ParseError(assign.span, "a unique property assignment",
                           "duplicate '" + assign.name + "'");
        inst.property_values.push_back(std::move(assign));
      } else {
        fail("a property, interface, nested Family or '}'");
      }
    }
    expect(Tok::RBrace, "'}'");
    accept(Tok::Semi);
    return inst;
  }

  InterfacePoint parse_interface(const Token& head) {
    InterfacePoint point;
    point.span = head.span;
    point.kind = kind_of(head.text);
    if (!at(Tok::Ident)) fail("a direction");
    std::string dir = take().text;
    if (point.kind == ElementKind::Port) {
      if (dir == "in") point.direction = Direction::Input;
      else if (dir == "out") point.direction = Direction::Output;
      else fail("'in' or 'out'");
    } else {
      if (dir == "source") point.direction = Direction::Source;
      else if (dir == "dest") point.direction = Direction::Destination;
      else fail("'source' or 'dest'");
    }
    point.name = expect_name();
    if (accept(Tok::Colon)) {
      point.assigned_types.push_back(expect_name());
      while (accept(Tok::Comma)) point.assigned_types.push_back(expect_name());
    }
    expect(Tok::Eq, "'='");
    expect(Tok::LBrace, "'{'");
    std::set<std::string> names;
    while (!at(Tok::RBrace)) {
      PropertyAssignment assign = parse_prop_assign();
      if (!names.insert(assign.name).second)
        throw ParseError(assign.span, "a unique property assignment",
                         "duplicate '" + assign.name + "'");
      point.property_values.push_back(std::move(assign));
    }
    expect(Tok::RBrace, "'}'");
    accept(Tok::Semi);
    return point;
  }

  Attachment parse_attachment() {
    Attachment att;
    att.span = cur_.span;
    expect_word("Attachment");
    att.task_side = parse_endpoint();
    if (accept_word("to")) att.form = AttachmentForm::To;
    else if (accept_word("from")) att.form = AttachmentForm::From;
    else fail("'to' or 'from'");
    att.connector_side = parse_endpoint();
    if (accept_word("control")) att.dependency = model::DependencyKind::Control;
    expect(Tok::Semi, "';'");
    return att;
  }

  model::EndpointRef parse_endpoint() {
    model::EndpointRef ref;
    ref.span = cur_.span;
    ref.instance = expect_name();
    expect(Tok::Dot, "'.'");
    ref.point = expect_name();
    return ref;
  }

  // Global type-def uniqueness plus acyclic, same-kind extends among
  // definitions local to this model.
  void check_type_defs(const WorkflowModel& m) {
    collect_types(m);
    for (const auto& [name, def] : global_types_) {
      for (const auto& parent_name : def->extends) {
        auto it = global_types_.find(parent_name);
        if (it == global_types_.end()) continue;  // builtin or unknown; resolver decides
        if (it->second->kinds != def->kinds)
          throw ParseError(def->span, "extends of the same element kind",
                           "'" + name + "' extends '" + parent_name + "'");
      }
      std::set<std::string> visiting, done;
      check_extends_cycle(name, visiting, done);
    }
  }

  void collect_types(const WorkflowModel& m) {
    for (const auto& def : m.type_defs) {
      if (!global_types_.emplace(def.name, &def).second)
        throw ParseError(def.span, "a unique type name", "duplicate '" + def.name + "'");
    }
    for (const auto& inst : m.instances)
      if (inst.body) collect_types(*inst.body);
  }

  void check_extends_cycle(const std::string& name, std::set<std::string>& visiting,
                           std::set<std::string>& done) {
    if (done.count(name)) return;
    if (!visiting.insert(name).second) {
      const TypeDef* def = global_types_.at(name);
      throw ParseError(def->span, "an acyclic extends chain", "cycle through '" + name + "'");
    }
    auto it = global_types_.find(name);
    if (it != global_types_.end())
      for (const auto& parent : it->second->extends)
        if (global_types_.count(parent)) check_extends_cycle(parent, visiting, done);
    visiting.erase(name);
    done.insert(name);
  }

  // Attachment endpoints must name an instance of the scope (or the enclosing
  // flow) and an existing interface point on it.
  void check_references(const WorkflowModel& m, const ElementInstance* enclosing) {
    for (const auto& att : m.attachments) {
      check_endpoint(m, enclosing, att.task_side);
      check_endpoint(m, enclosing, att.connector_side);
    }
    for (const auto& inst : m.instances)
      if (inst.body) check_references(*inst.body, &inst);
  }

  void check_endpoint(const WorkflowModel& m, const ElementInstance* enclosing,
                      const model::EndpointRef& ref) {
    const ElementInstance* inst = m.find_instance(ref.instance);
    if (!inst && enclosing && enclosing->name == ref.instance) inst = enclosing;
    if (!inst)
      throw ParseError(ref.span, "a known instance", "'" + ref.instance + "'");
    if (!inst->find_interface(ref.point))
      throw ParseError(ref.span, "a port or role of '" + ref.instance + "'",
                       "'" + ref.point + "'");
  }
};

// ---------------------------------------------------------------------------
// Rendering

class Renderer {
 public:
  std::string render(const WorkflowModel& m) {
    family(m, 0);
    return std::move(out_);
  }

 private:
  std::string out_;

  void indent(int depth) { out_.append(static_cast<size_t>(depth) * 2, ' '); }

  void line(int depth, const std::string& text) {
    indent(depth);
    out_ += text;
    out_ += "\n";
  }

  static const char* keyword(ElementKind kind) {
    switch (kind) {
      case ElementKind::Task: return "Component";
      case ElementKind::Connector: return "Connector";
      case ElementKind::Port: return "Port";
      case ElementKind::Role: return "Role";
    }
    return "?";
  }

  static std::string join(const std::vector<std::string>& names) {
    std::string s;
    for (size_t i = 0; i < names.size(); ++i) {
      if (i) s += ", ";
      s += names[i];
    }
    return s;
  }

  void family(const WorkflowModel& m, int depth) {
    line(depth, "Family " + m.name + " = {");
    for (const auto& def : m.type_defs) type_def(def, depth + 1);
    for (const auto& inst : m.instances) instance(inst, depth + 1);
    for (const auto& att : m.attachments) attachment(att, depth + 1);
    line(depth, "}");
  }

  void type_def(const TypeDef& def, int depth) {
    std::string head = std::string(keyword(*def.kinds.begin())) + " Type " + def.name;
    if (!def.extends.empty()) head += " extends " + join(def.extends);
    line(depth, head + " = {");
    for (const auto& p : def.properties) {
      std::string decl = "Property " + p.name + " : " + model::to_string(p.kind);
      if (p.kind == ValueKind::Enum && !p.enum_tokens.empty())
        decl += " {" + join(p.enum_tokens) + "}";
      if (p.default_value) decl += " = " + p.default_value->render();
      line(depth + 1, decl + ";");
    }
    line(depth, "}");
  }

  void assignment(const PropertyAssignment& a, int depth) {
    line(depth, "Property " + a.name + " : " + model::to_string(a.value.kind) + " = " +
                    a.value.render() + ";");
  }

  void instance(const ElementInstance& inst, int depth) {
    line(depth, std::string(keyword(inst.kind)) + " " + inst.name + " : " +
                    join(inst.assigned_types) + " = {");
    for (const auto& a : inst.property_values) assignment(a, depth + 1);
    for (const auto& point : inst.interfaces) interface_point(point, depth + 1);
    if (inst.body) family(*inst.body, depth + 1);
    line(depth, "}");
  }

  void interface_point(const InterfacePoint& point, int depth) {
    std::string head = std::string(keyword(point.kind)) + " " +
                       model::to_string(point.direction) + " " + point.name;
    if (!point.assigned_types.empty()) head += " : " + join(point.assigned_types);
    line(depth, head + " = {");
    for (const auto& a : point.property_values) assignment(a, depth + 1);
    line(depth, "}");
  }

  void attachment(const Attachment& att, int depth) {
    std::string s = "Attachment " + att.task_side.dotted() +
                    (att.form == AttachmentForm::To ? " to " : " from ") +
                    att.connector_side.dotted();
    if (att.dependency == model::DependencyKind::Control) s += " control";
    line(depth, s + ";");
  }
};

}  // namespace

WorkflowModel parse_workflow(const std::string& source, const std::string& file) {
  return Parser(source, file).parse();
}

std::string render_workflow(const WorkflowModel& model) {
  return Renderer().render(model);
}

}  // namespace osc::parse
