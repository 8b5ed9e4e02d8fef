#pragma once

#include <stdexcept>
#include <string>

namespace caoi {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of a closed form (e.g. rho >= 1 for M/M/1).
struct DomainError : Error {
  using Error::Error;
};

/// Simulator configuration that cannot produce a meaningful run.
struct ConfigError : Error {
  using Error::Error;
};

/// Malformed input text. `line` is 1-based, 0 when not applicable.
struct ParseError : Error {
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

/// Well-formed input that breaks a data invariant. `where` names the offending item.
struct ValidationError : Error {
  ValidationError(std::string where, const std::string& what)
      : Error(where + ": " + what), where(std::move(where)) {}
  std::string where;
};

/// An optional constraint required by the requested problem was not supplied.
struct MissingConstraint : Error {
  using Error::Error;
};

/// The constraint set admits no positive arrival rate.
struct Infeasible : Error {
  using Error::Error;
};

}  // namespace caoi
