#pragma once

#include <stdexcept>
#include <string>

namespace pacing {

/// Bad input: malformed files, out-of-range parameters, violated preconditions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The optimal-control problem has no feasible input sequence.
class InfeasibleProblem : public std::runtime_error {
 public:
  InfeasibleProblem(const std::string& what, int stage)
      : std::runtime_error(what), stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

}  // namespace pacing
