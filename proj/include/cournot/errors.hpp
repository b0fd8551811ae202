#pragma once

#include <stdexcept>
#include <string>

namespace cournot {

// Every error raised by the core derives from Error. The C API maps each
// subclass onto one status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Scenario text could not be turned into valid specs. `line` is 1-based,
// 0 when no position is known.
class ParseError : public Error {
 public:
  ParseError(int line, const std::string& what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

// No equilibrium exists in the validity domain of the edge potentials, or
// Newton failed to find one.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Integration produced a non-finite state.
class NumericalError : public Error {
 public:
  NumericalError(double time, const std::string& what)
      : Error("t = " + std::to_string(time) + ": " + what), time_(time) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cournot
