#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bugsmc {

/// Extents of a (possibly multidimensional) value. Scalars have extents {1}.
using Dims = std::vector<std::size_t>;

using NodeId = std::size_t;

inline std::size_t element_count(const Dims& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

inline bool is_scalar(const Dims& dims) { return element_count(dims) == 1; }

/// Extents with singleton dimensions dropped; scalars map to {1}.
Dims squeeze(const Dims& dims);

std::string to_string(const Dims& dims);

/// Shortest of %.15g/%.16g/%.17g that reads back to the same double.
std::string format_number(double v);

struct SourcePos {
  int line = 0;
  int column = 0;
};

std::string to_string(const SourcePos& pos);

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LexError : public Error {
 public:
  LexError(SourcePos pos, const std::string& message);
  SourcePos pos;
};

class ParseError : public Error {
 public:
  ParseError(SourcePos pos, std::string expected, std::string found);
  SourcePos pos;
  std::string expected;
  std::string found;
};

class CompileError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or command-line input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class DuplicateName : public Error {
 public:
  explicit DuplicateName(const std::string& name);
};

/// Distribution parameters outside the parameter space.
class ParamError : public Error {
 public:
  using Error::Error;
};

/// The truncation interval carries (numerically) zero mass.
class TruncationError : public ParamError {
 public:
  using ParamError::ParamError;
};

/// Failure while running an inference algorithm.
class InferenceError : public Error {
 public:
  using Error::Error;
};

/// Every particle received zero weight at some step.
class DegenerateWeights : public InferenceError {
 public:
  DegenerateWeights(std::size_t step, std::vector<std::string> nodes);
  std::size_t step;  // 1-based
  std::vector<std::string> nodes;
};

/// A user-registered function or sampler threw.
class ExtensionError : public InferenceError {
 public:
  using InferenceError::InferenceError;
};

}  // namespace bugsmc
