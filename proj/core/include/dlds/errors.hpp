#pragma once

#include <stdexcept>
#include <string>

namespace dlds {

// Operands with incompatible or empty shapes.
struct dimension_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Values outside their mathematical domain (non-finite input, negative
// weight or budget, degenerate statistics).
struct domain_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Text that cannot be interpreted (CSV cells, config lines).
struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A binary artifact that is malformed, truncated, or fails validation.
struct integrity_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An archive whose format version this build does not understand.
struct version_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An iteration that produced non-finite state; carries the step index
// in the message.
struct divergence_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dlds
