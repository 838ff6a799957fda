#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "signflow/minimax.hpp"
#include "signflow/nonlinearity.hpp"

namespace signflow {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Batch-run settings.  Parsed from flat `key = value` text: one pair per
// line, `#` starts a comment, blank lines are skipped, keys may appear at
// most once, unknown keys are rejected.
struct RunConfig {
  int dimension = 2;
  int n = 63;
  NonlinearityKind kind = NonlinearityKind::odd_power;
  double p = 4.0;
  double eps = 1e-2;
  double residual_tol = 1e-8;
  std::uint64_t seed = 1;
  int mesh_level = 3;
  std::vector<SurfaceVariant> variants = {SurfaceVariant::gamma_s};
  std::string output_dir = "out";

  // Throws ConfigError naming the offending key.
  void validate() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace signflow
