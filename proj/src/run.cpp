#include "signflow/run.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <utility>

#include "signflow/cones.hpp"
#include "signflow/energy.hpp"
#include "signflow/field_io.hpp"
#include "signflow/flow.hpp"
#include "signflow/format.hpp"
#include "signflow/rng.hpp"

namespace signflow {

namespace {

// Sweep cap for the batch solvers; a stage that cannot converge inside it is
// reported as a solver failure instead of spinning.
constexpr int kSweepCap = 20000;
constexpr int kPathNodes = 33;

EnergyModel build_model(const RunConfig& cfg) {
  return EnergyModel(Grid(cfg.dimension, cfg.n), Nonlinearity::odd_power(cfg.p));
}

FlowParams build_flow(const RunConfig& cfg) {
  FlowParams fp;
  fp.residual_tol = cfg.residual_tol;
  fp.max_steps = kSweepCap;
  return fp;
}

class StageClock {
 public:
  StageClock(RunSummary& summary, std::ostream& log, std::string name)
      : summary_(summary), log_(log), name_(std::move(name)),
        start_(std::chrono::steady_clock::now()) {}
  ~StageClock() {
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                start_).count();
    summary_.stage_seconds.push_back({name_, secs});
    log_ << "stage " << name_ << " seconds=" << format_double(secs) << "\n";
  }

 private:
  RunSummary& summary_;
  std::ostream& log_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

void raise_exit(RunSummary& summary, int code) {
  summary.exit_code = std::max(summary.exit_code, code);
}

// d=2 fields keep the grid CSV plus a PGM heatmap; d=1 fields are written as
// a two-column x,u table.
std::string write_field_artifacts(const RunConfig& cfg, const std::string& name,
                                  const Field& u) {
  namespace fs = std::filesystem;
  const std::string csv = name + ".csv";
  const fs::path dir(cfg.output_dir);
  if (u.grid().dimension() == 1) {
    std::ofstream out(dir / csv);
    if (!out) throw FieldIoError((dir / csv).string() + ": cannot open for writing");
    out << "x,u\n";
    for (int i = 0; i < u.grid().n(); ++i)
      out << format_double(u.grid().coordinate(i)) << ','
          << format_double(u[static_cast<std::size_t>(i)]) << '\n';
    if (!out) throw FieldIoError((dir / csv).string() + ": write failed");
  } else {
    write_field((dir / csv).string(), u);
    write_pgm((dir / (name + ".pgm")).string(), u);
  }
  return csv;
}

void record_solution(const RunConfig& cfg, RunSummary& summary, const std::string& name,
                     const CriticalPointReport& rep) {
  SolutionEntry e;
  e.name = name;
  e.level = rep.level;
  e.residual = rep.residual;
  e.classification = rep.classification;
  e.field_file = write_field_artifacts(cfg, name, rep.field);
  write_minimax_trace_csv(
      (std::filesystem::path(cfg.output_dir) / (name + ".trace.csv")).string(),
      rep.trace);
  summary.solutions.push_back(std::move(e));
}

void check_solution(RunSummary& summary, const std::string& name,
                    const CriticalPointReport& rep, Classification want) {
  if (!rep.converged) {
    std::string why = "did not converge";
    if (rep.collapsed) why = "path collapsed to the zero level";
    if (rep.swallowed) why = "surface was swallowed by the cone set";
    if (rep.linking_failed) why = "linking re-check found no witness";
    summary.failures.push_back(name + ": " + why);
    raise_exit(summary, 3);
    return;
  }
  if (rep.classification != want) {
    summary.failures.push_back(name + ": expected " +
                               std::string(classification_name(want)) + ", got " +
                               classification_name(rep.classification));
    raise_exit(summary, 4);
  }
}

void stage_positive(const RunConfig& cfg, const EnergyModel& m, RunSummary& summary,
                    std::ostream& log) {
  StageClock clock(summary, log, "solve-positive");
  CriticalPointReport rep =
      mountain_pass(m, ConeSign::plus, build_flow(cfg), ConeParams(cfg.eps), kPathNodes);
  record_solution(cfg, summary, "positive", rep);
  check_solution(summary, "positive", rep, Classification::positive);
}

void stage_negative(const RunConfig& cfg, const EnergyModel& m, RunSummary& summary,
                    std::ostream& log) {
  StageClock clock(summary, log, "solve-negative");
  CriticalPointReport rep =
      mountain_pass(m, ConeSign::minus, build_flow(cfg), ConeParams(cfg.eps), kPathNodes);
  record_solution(cfg, summary, "negative", rep);
  check_solution(summary, "negative", rep, Classification::negative);
}

void stage_sign_changing(const RunConfig& cfg, const EnergyModel& m, RunSummary& summary,
                         std::ostream& log, SurfaceVariant variant,
                         const std::string& name) {
  StageClock clock(summary, log, std::string("solve-sign-changing-") +
                                     surface_variant_name(variant));
  CriticalPointReport rep = sign_changing_solve(m, variant, build_flow(cfg),
                                                ConeParams(cfg.eps), cfg.mesh_level);
  record_solution(cfg, summary, name, rep);
  check_solution(summary, name, rep, Classification::sign_changing);
}

void stage_lemmas(const RunConfig& cfg, const EnergyModel& m, RunSummary& summary,
                  std::ostream& log) {
  StageClock clock(summary, log, "verify-lemmas");
  const Grid& g = m.grid();
  const ConeParams cp(cfg.eps);

  {
    // Pairing identity: testing I'(u) against u - A(u) on random fields.
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      SplitMix64 rng(SplitMix64::derive(cfg.seed, static_cast<std::uint64_t>(i)));
      Field u = sample_smooth_field(g, rng);
      u *= 0.5 + 2.0 * rng.uniform01();
      auto [lhs, rhs] = lemma_a_identity(m, u);
      worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + rhs));
    }
    summary.lemmas.push_back({"identity", worst <= 1e-10, worst});
  }

  {
    // Gradient-norm attainment: the pairing along the normalized gradient
    // must recover the full residual norm.
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      SplitMix64 rng(SplitMix64::derive(cfg.seed ^ 0x6f70ULL, static_cast<std::uint64_t>(i)));
      Field u = sample_smooth_field(g, rng);
      Field grad = gradient_h(m, u);
      double rn = norm_h(grad);
      if (rn == 0.0) continue;
      worst = std::max(worst, std::abs(directional_derivative(m, u, grad) / (rn * rn) - 1.0));
    }
    summary.lemmas.push_back({"operator_norm", worst <= 1e-8, worst});
  }

  {
    ProbeReport probe = contraction_probe(m, cp, 60, cfg.seed);
    summary.lemmas.push_back({"attract", probe.contraction_ok, probe.max_ratio});
  }

  {
    // With no listed near-critical fields the cutoff gate is identically one
    // in-band and zero out-of-band, so the deformation must act as the plain
    // flow in the band and as the identity outside it.
    double worst = 0.0;
    for (int i = 0; i < 30; ++i) {
      SplitMix64 rng(SplitMix64::derive(cfg.seed ^ 0x6249ULL, static_cast<std::uint64_t>(i)));
      Field u = sample_smooth_field(g, rng);
      double iu = energy(m, u);
      CutoffSpec in_band(iu, cfg.eps, 2.0 * cfg.eps, 1.0);
      worst = std::max(worst, std::abs(cutoff_g(m, u, in_band) - 1.0));
      CutoffSpec out_band(iu + 10.0 * cfg.eps, cfg.eps, 2.0 * cfg.eps, 1.0);
      EtaOptions opt;
      opt.beta_override = 1.0;
      EtaResult res = deformation_eta(m, u, out_band, cp, 1.0, opt);
      worst = std::max(worst, norm_h(res.u - u));
    }
    summary.lemmas.push_back({"b_identity", worst <= 0.0, worst});
  }

  {
    // The solution operator maps the eps-neighborhood of the nonpositive
    // cone back into it.
    double worst = 0.0;
    for (int i = 0; i < 30; ++i) {
      SplitMix64 rng(SplitMix64::derive(cfg.seed ^ 0x6d61ULL, static_cast<std::uint64_t>(i)));
      Field w = sample_smooth_field(g, rng);
      for (double& x : w.values()) x = -std::abs(x);
      Field v = sample_smooth_field(g, rng);
      double vn = norm_h(v);
      if (vn == 0.0) continue;
      double delta = cfg.eps * rng.uniform01() / vn;
      axpy(delta, v, w);
      worst = std::max(worst,
                       cone_distance(operator_a(m, w), ConeSign::minus, cp, m));
    }
    summary.lemmas.push_back({"mapping", worst <= cfg.eps, worst});
  }

  for (const LemmaEntry& e : summary.lemmas)
    if (!e.pass) {
      summary.failures.push_back("lemma " + e.name + ": worst value " +
                                 format_double(e.worst));
      raise_exit(summary, 4);
    }
}

void stage_deform_demo(const RunConfig& cfg, const EnergyModel& m, RunSummary& summary,
                       std::ostream& log) {
  StageClock clock(summary, log, "deform-demo");
  SplitMix64 rng(SplitMix64::derive(cfg.seed ^ 0x6465ULL, 0));
  Field v = sample_smooth_field(m.grid(), rng);
  double vn = norm_h(v);
  if (vn == 0.0) throw SolveError("deform-demo: degenerate sample");
  v *= 1.0 / vn;

  // Put the start on the rising part of the ray at half the peak energy.
  double s_peak = 0.0, peak = 0.0;
  for (int k = 1; k <= 200; ++k) {
    double s = 0.05 * k;
    double e = energy(m, s * v);
    if (e > peak) {
      peak = e;
      s_peak = s;
    } else if (e < 0.0) {
      break;
    }
  }
  if (!(peak > 0.0)) throw SolveError("deform-demo: ray never gains energy");
  const double c = 0.5 * peak;
  double lo = 0.0, hi = s_peak;
  for (int it = 0; it < 80; ++it) {
    double mid = 0.5 * (lo + hi);
    (energy(m, mid * v) < c ? lo : hi) = mid;
  }
  Field u0 = (0.5 * (lo + hi)) * v;

  CutoffSpec cs(c, cfg.eps, 2.0 * cfg.eps, 1.0);
  EtaResult res = deformation_eta(m, u0, cs, ConeParams(cfg.eps), 1.0);
  write_field_artifacts(cfg, "deform_before", u0);
  write_field_artifacts(cfg, "deform_after", res.u);
  summary.info.push_back(
      "deform c=" + format_double(c) + " eps=" + format_double(cfg.eps) +
      " before=" + format_double(energy(m, u0)) +
      " after=" + format_double(energy(m, res.u)) +
      " reached=" + (res.reached_target ? "true" : "false") +
      " frozen=" + (res.frozen ? "true" : "false") +
      " substeps=" + std::to_string(res.substeps) +
      " beta=" + format_double(res.beta));
}

void stage_probe_cones(const RunConfig& cfg, const EnergyModel& m, RunSummary& summary,
                       std::ostream& log) {
  StageClock clock(summary, log, "probe-cones");
  ProbeReport probe = contraction_probe(m, ConeParams(cfg.eps), 100, cfg.seed);
  std::ofstream out(std::filesystem::path(cfg.output_dir) / "cones_probe.txt");
  if (!out) throw FieldIoError("cones_probe.txt: cannot open for writing");
  out << probe_report_text(probe);
  summary.info.push_back("probe max_ratio=" + format_double(probe.max_ratio) +
                         " eps0=" + format_double(probe.eps0_empirical) +
                         " samples=" + std::to_string(probe.samples) +
                         " seed=" + std::to_string(probe.seed) +
                         " contraction=" + (probe.contraction_ok ? "true" : "false"));
}

std::string config_line(const RunConfig& cfg) {
  std::string variants;
  for (std::size_t i = 0; i < cfg.variants.size(); ++i) {
    if (i) variants += ',';
    variants += surface_variant_name(cfg.variants[i]);
  }
  return "config dimension=" + std::to_string(cfg.dimension) +
         " n=" + std::to_string(cfg.n) + " kind=odd_power p=" + format_double(cfg.p) +
         " eps=" + format_double(cfg.eps) +
         " residual_tol=" + format_double(cfg.residual_tol) +
         " seed=" + std::to_string(cfg.seed) +
         " mesh_level=" + std::to_string(cfg.mesh_level) + " variants=" + variants +
         " output_dir=" + cfg.output_dir;
}

}  // namespace

const char* command_name(Command c) {
  switch (c) {
    case Command::solve_positive: return "solve-positive";
    case Command::solve_negative: return "solve-negative";
    case Command::solve_sign_changing: return "solve-sign-changing";
    case Command::solve_all: return "solve-all";
    case Command::verify_lemmas: return "verify-lemmas";
    case Command::deform_demo: return "deform-demo";
    default: return "probe-cones";
  }
}

RunSummary execute(Command cmd, const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  std::filesystem::create_directories(cfg.output_dir);
  RunSummary summary;
  summary.header.push_back(std::string("command ") + command_name(cmd));
  summary.header.push_back(config_line(cfg));
  EnergyModel m = build_model(cfg);

  try {
    switch (cmd) {
      case Command::solve_positive:
        stage_positive(cfg, m, summary, log);
        break;
      case Command::solve_negative:
        stage_negative(cfg, m, summary, log);
        break;
      case Command::solve_sign_changing:
        for (SurfaceVariant v : cfg.variants)
          stage_sign_changing(cfg, m, summary, log, v,
                              std::string("sign_changing_") + surface_variant_name(v));
        break;
      case Command::solve_all: {
        stage_positive(cfg, m, summary, log);
        stage_negative(cfg, m, summary, log);
        stage_sign_changing(cfg, m, summary, log, cfg.variants.front(), "sign_changing");
        const double alpha = estimate_alpha_rho(m).alpha;
        summary.info.push_back("alpha " + format_double(alpha));
        for (const SolutionEntry& e : summary.solutions)
          if (!(e.level > alpha)) {
            summary.failures.push_back(e.name + ": level " + format_double(e.level) +
                                       " not above the alpha floor " +
                                       format_double(alpha));
            raise_exit(summary, 4);
          }
        break;
      }
      case Command::verify_lemmas:
        stage_lemmas(cfg, m, summary, log);
        break;
      case Command::deform_demo:
        stage_deform_demo(cfg, m, summary, log);
        break;
      case Command::probe_cones:
        stage_probe_cones(cfg, m, summary, log);
        break;
    }
  } catch (const SolveError& e) {
    summary.failures.push_back(std::string(command_name(cmd)) + ": " + e.what());
    raise_exit(summary, 3);
  }
  if (!summary.solutions.empty())
    summary.info.push_back("levels minimax estimate (upper bound, stationary)");

  write_summary((std::filesystem::path(cfg.output_dir) / "summary.txt").string(),
                summary);
  return summary;
}

void write_summary(const std::string& path, const RunSummary& summary) {
  std::ofstream out(path);
  if (!out) throw FieldIoError(path + ": cannot open for writing");
  for (const std::string& line : summary.header) out << line << "\n";
  for (const SolutionEntry& e : summary.solutions)
    out << "solution " << e.name << " level=" << format_double(e.level)
        << " residual=" << format_double(e.residual)
        << " classification=" << classification_name(e.classification)
        << " field=" << e.field_file << "\n";
  for (const LemmaEntry& e : summary.lemmas)
    out << "lemma " << e.name << " pass=" << (e.pass ? "true" : "false")
        << " worst=" << format_double(e.worst) << "\n";
  for (const std::string& line : summary.info) out << line << "\n";
  for (const std::string& f : summary.failures) out << "failure " << f << "\n";
  out << "exit " << summary.exit_code << "\n";
  if (!out) throw FieldIoError(path + ": write failed");
}

}  // namespace signflow
