#pragma once

#include <stdexcept>
#include <string>

namespace cewa {

// Malformed runtime input (sequences, loss matrices, config values).
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Constructor parameter outside its documented domain.
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// An exact/oracle routine refusing an instance above its cap.
struct CapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Broken internal invariant; indicates a bug, not bad input.
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace cewa
