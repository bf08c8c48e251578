#include "bugsmc/common.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace bugsmc {

Dims squeeze(const Dims& dims) {
  Dims out;
  for (auto d : dims)
    if (d != 1) out.push_back(d);
  if (out.empty()) out.push_back(1);
  return out;
}

std::string to_string(const Dims& dims) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << ')';
  return os.str();
}

std::string format_number(double v) {
  char buf[40];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string to_string(const SourcePos& pos) {
  return std::to_string(pos.line) + ":" + std::to_string(pos.column);
}

LexError::LexError(SourcePos p, const std::string& message)
    : Error("lex error at " + to_string(p) + ": " + message), pos(p) {}

ParseError::ParseError(SourcePos p, std::string exp, std::string fnd)
    : Error("parse error at " + to_string(p) + ": expected " + exp + ", found " + fnd),
      pos(p),
      expected(std::move(exp)),
      found(std::move(fnd)) {}

DuplicateName::DuplicateName(const std::string& name)
    : Error("name already registered: " + name) {}

namespace {
std::string degenerate_message(std::size_t step, const std::vector<std::string>& nodes) {
  std::string msg = "all particles have zero weight at step " + std::to_string(step);
  if (!nodes.empty()) {
    msg += " (observed nodes:";
    for (const auto& n : nodes) msg += " " + n;
    msg += ")";
  }
  return msg;
}
}  // namespace

DegenerateWeights::DegenerateWeights(std::size_t s, std::vector<std::string> n)
    : InferenceError(degenerate_message(s, n)), step(s), nodes(std::move(n)) {}

}  // namespace bugsmc
