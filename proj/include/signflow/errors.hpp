#pragma once

#include <stdexcept>
#include <string>

namespace signflow {

// Two fields defined on different grids were combined, or a field was handed
// to an operation expecting another grid.
struct GridMismatchError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// An iterative solver failed to meet its tolerance within its iteration cap,
// or a geometric search (radius doubling, alpha estimate) ran out of room.
struct SolveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed field file (bad header, wrong shape, non-numeric data).
struct FieldIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace signflow
