#pragma once

#include <stdexcept>
#include <string>

#include "osc/model.hpp"

namespace osc::parse {

/// Syntax error at a concrete source location. `what()` renders the stable
/// one-line form `file:line:col: expected X, found Y`.
class ParseError : public std::runtime_error {
 public:
  ParseError(model::SourceSpan span, std::string expected, std::string found);

  const model::SourceSpan& span() const { return span_; }
  const std::string& expected() const { return expected_; }
  const std::string& found() const { return found_; }

 private:
  model::SourceSpan span_;
  std::string expected_;
  std::string found_;
};

/// Parses a textual workflow description. `file` is used for error spans
/// only. Throws ParseError on the first syntax error; duplicate names,
/// dangling attachment references, and cyclic local `extends` chains are
/// also reported as parse errors.
model::WorkflowModel parse_workflow(const std::string& source, const std::string& file = "<input>");

/// Emits the canonical textual form. parse(render(m)) is structurally
/// equal to m for every model produced by parse_workflow.
std::string render_workflow(const model::WorkflowModel& model);

}  // namespace osc::parse
