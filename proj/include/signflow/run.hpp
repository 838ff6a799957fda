#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "signflow/config.hpp"
#include "signflow/minimax.hpp"

namespace signflow {

enum class Command {
  solve_positive,
  solve_negative,
  solve_sign_changing,
  solve_all,
  verify_lemmas,
  deform_demo,
  probe_cones,
};

const char* command_name(Command c);

struct SolutionEntry {
  std::string name;
  double level = 0.0;
  double residual = 0.0;
  Classification classification = Classification::trivial;
  std::string field_file;
};

struct LemmaEntry {
  std::string name;
  bool pass = false;
  double worst = 0.0;
};

struct StageTime {
  std::string name;
  double seconds = 0.0;
};

struct RunSummary {
  std::vector<std::string> header;  // command and configuration echo lines
  std::vector<SolutionEntry> solutions;
  std::vector<LemmaEntry> lemmas;
  std::vector<std::string> info;      // extra deterministic summary lines
  std::vector<std::string> failures;  // recorded stage failures
  std::vector<StageTime> stage_seconds;  // reported to the log only, never
                                         // written to summary.txt, which must
                                         // be byte-stable across reruns
  int exit_code = 0;  // 0 ok, 3 solver failure, 4 verification failure
};

// Runs one subcommand against the configuration, writes all artifacts
// (summary.txt, field CSVs, PGM heatmaps for 2D, per-solution traces) into
// cfg.output_dir, and streams progress/timing lines to log.  Output files
// depend only on (cfg, command); wall-clock timings go to the log alone.
RunSummary execute(Command cmd, const RunConfig& cfg, std::ostream& log);

void write_summary(const std::string& path, const RunSummary& summary);

}  // namespace signflow
