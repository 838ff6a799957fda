#pragma once

#include <string>

#include "signflow/errors.hpp"
#include "signflow/grid.hpp"

namespace signflow {

// CSV layout: one header line "# grid d=<d> n=<n>", then the node values as
// n comma-separated columns per row, n rows in 2D and a single row in 1D.
// Values are serialized with shortest round-trip precision, so a write/read
// cycle reproduces every finite double bit for bit.
void write_field(const std::string& path, const Field& u);
Field read_field(const std::string& path);

// Grayscale heatmap (plain PGM, P2, max value 65535).  Node values are mapped
// linearly from [min, max] onto [0, 65535]; a constant field renders as the
// middle gray level.  1D fields produce a single-row image.
void write_pgm(const std::string& path, const Field& u);

}  // namespace signflow
