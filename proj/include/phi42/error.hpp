#pragma once

#include <stdexcept>
#include <string>

namespace phi42 {

// Raised when an input violates a documented constraint (CLI exit code 2).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a time integration leaves the stable regime (CLI exit code 3).
class NumericalInstability : public std::runtime_error {
 public:
  NumericalInstability(const std::string& what, double time)
      : std::runtime_error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

}  // namespace phi42
