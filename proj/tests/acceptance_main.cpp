// Acceptance harness: runs the twelve release criteria and prints exactly one
// [PASS]/[FAIL] line per criterion.  With no arguments every criterion runs in
// order; numeric arguments select a subset (e.g. `signflow_acceptance 3 7`).
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "signflow/cones.hpp"
#include "signflow/energy.hpp"
#include "signflow/field_io.hpp"
#include "signflow/flow.hpp"
#include "signflow/grid.hpp"
#include "signflow/minimax.hpp"
#include "signflow/run.hpp"
#include "support/oracles.hpp"

using namespace signflow;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Criterion {
  int number;
  const char* label;
  double budget_seconds;  // 0 = no stated bound
  std::function<std::string()> run;  // empty string = pass, else first failure
};

EnergyModel cubic_model(int d, int n) {
  return EnergyModel(Grid(d, n), Nonlinearity::odd_power(4.0));
}

Field seeded_smooth(const Grid& g, std::uint64_t seed, std::uint64_t index) {
  SplitMix64 rng(SplitMix64::derive(seed, index));
  return sample_smooth_field(g, rng);
}

// Scale t on the rising branch with I(t*v) = target (v need not be unit).
double ray_scale_for_energy(const EnergyModel& m, const Field& v, double target) {
  const double q = std::pow(norm_lp(v, 4.0), 4.0);
  const double nv2 = norm_h(v) * norm_h(v);
  double lo = 0.0, hi = std::sqrt(nv2 / q);
  for (int b = 0; b < 200; ++b) {
    double mid = 0.5 * (lo + hi);
    (energy(m, mid * v) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(12);
  ss << v;
  return ss.str();
}

// ---------------------------------------------------------------- criterion 1
std::string crit_identity() {
  EnergyModel m = cubic_model(2, 32);
  for (int i = 0; i < 100; ++i) {
    Field u = seeded_smooth(m.grid(), 1001, i);
    auto [lhs, rhs] = lemma_a_identity(m, u);
    const double err = std::abs(lhs - rhs);
    if (!(err <= 1e-10 * (1.0 + std::abs(rhs))))
      return "sample " + std::to_string(i) + ": identity gap " + fmt(err) +
             " vs scale " + fmt(rhs);
  }
  return {};
}

// ---------------------------------------------------------------- criterion 2
std::string crit_gradient() {
  EnergyModel m = cubic_model(2, 32);
  for (int i = 0; i < 20; ++i) {
    Field u = seeded_smooth(m.grid(), 2001, i);
    Field w = seeded_smooth(m.grid(), 2002, i);
    const double exact = inner_h(gradient_h(m, u), w);
    const double fd = oracle::fd_directional(m, u, w, 1e-5);
    if (!(std::abs(exact - fd) <= 1e-6 * (1.0 + std::abs(exact))))
      return "pair " + std::to_string(i) + ": pairing " + fmt(exact) +
             " vs difference quotient " + fmt(fd);
  }
  return {};
}

// ---------------------------------------------------------------- criterion 3
std::string crit_spectrum() {
  Grid g(2, 63);
  auto pairs = eigenpairs(g, 2);
  const double l1_want = 2.0 * kPi * kPi;
  const double l2_want = 5.0 * kPi * kPi;
  if (!(std::abs(pairs[0].lambda - l1_want) <= 0.01 * l1_want))
    return "lambda1 " + fmt(pairs[0].lambda) + " vs " + fmt(l1_want);
  if (!(std::abs(pairs[1].lambda - l2_want) <= 0.01 * l2_want))
    return "lambda2 " + fmt(pairs[1].lambda) + " vs " + fmt(l2_want);
  for (std::size_t i = 0; i < pairs[0].vec.size(); ++i)
    if (!(pairs[0].vec[i] > 0.0))
      return "ground mode not strictly positive at node " + std::to_string(i);
  return {};
}

// ---------------------------------------------------------------- criterion 4
std::string crit_contraction() {
  EnergyModel m = cubic_model(2, 32);
  // First locate the empirical contraction radius, then test at half of it.
  ProbeReport base = contraction_probe(m, ConeParams(1e-2), 100, 7);
  if (!(base.eps0_empirical > 0.0))
    return "no positive empirical contraction radius reported";
  const double eps = 0.5 * base.eps0_empirical;
  ProbeReport rep = contraction_probe(m, ConeParams(eps), 100, 7);
  if (!rep.contraction_ok)
    return "worst ratio " + fmt(rep.max_ratio) + " above 1/2 at radius " + fmt(eps);

  // Invariance of the eps-neighborhood of the nonpositive cone: samples with
  // surrogate distance at most eps keep that bound under the operator.
  int tested = 0;
  for (int i = 0; i < 100; ++i) {
    SplitMix64 rng(SplitMix64::derive(7, static_cast<std::uint64_t>(i)));
    Field w = sample_smooth_field(m.grid(), rng);
    for (double& v : w.values()) v = -std::abs(v);
    const double wn = norm_h(w);
    if (wn == 0.0) continue;
    w *= (2.0 * rng.uniform01()) / wn;
    Field v = sample_smooth_field(m.grid(), rng);
    const double vn = norm_h(v);
    if (vn == 0.0) continue;
    v *= 1.0 / vn;
    const double target = eps * rng.uniform01();
    auto dist_at = [&](double delta) {
      Field u = w;
      axpy(delta, v, u);
      return norm_h(positive_part(u));
    };
    double hi = 1.0;
    int doublings = 0;
    while (dist_at(hi) < target && doublings < 60) {
      hi *= 2.0;
      ++doublings;
    }
    if (dist_at(hi) < target) continue;
    double lo = 0.0;
    for (int b = 0; b < 80; ++b) {
      double mid = 0.5 * (lo + hi);
      (dist_at(mid) < target ? lo : hi) = mid;
    }
    Field u = w;
    axpy(hi, v, u);
    const double du = norm_h(positive_part(u));
    if (du > eps) continue;  // bisection overshoot; not a valid witness
    ++tested;
    const double dau = norm_h(positive_part(operator_a(m, u)));
    if (!(dau <= eps))
      return "sample " + std::to_string(i) + ": image distance " + fmt(dau) +
             " left the " + fmt(eps) + " neighborhood";
  }
  if (tested < 80) return "only " + std::to_string(tested) + " usable invariance samples";
  return {};
}

// ---------------------------------------------------------------- criterion 5
std::string crit_ground_level() {
  EnergyModel m = cubic_model(1, 255);
  FlowParams fp;
  fp.max_steps = 20000;
  CriticalPointReport mp = mountain_pass(m, ConeSign::plus, fp, ConeParams(1e-2), 33);
  if (!mp.converged) return "path solver did not converge";
  if (!(mp.residual <= 1e-8)) return "path residual " + fmt(mp.residual);
  oracle::NehariResult nr = oracle::nehari_ground_state(m, 3, 5);
  if (!(nr.residual <= 1e-8)) return "oracle residual " + fmt(nr.residual);
  const double rel = std::abs(mp.level - nr.level) / nr.level;
  if (!(rel <= 1e-3))
    return "levels " + fmt(mp.level) + " vs oracle " + fmt(nr.level) +
           " (relative gap " + fmt(rel) + ")";
  return {};
}

// ---------------------------------------------------------------- criterion 6
std::string crit_odd_symmetry() {
  EnergyModel m = cubic_model(1, 255);
  FlowParams fp;
  fp.max_steps = 20000;
  ConeParams cp(1e-2);
  CriticalPointReport plus = mountain_pass(m, ConeSign::plus, fp, cp, 33);
  CriticalPointReport minus = mountain_pass(m, ConeSign::minus, fp, cp, 33);
  if (!plus.converged || !minus.converged) return "a one-sign solve did not converge";
  const double rel = std::abs(minus.level - plus.level) / plus.level;
  if (!(rel <= 1e-6)) return "level asymmetry " + fmt(rel);
  Field sum = plus.field + minus.field;
  const double mis = norm_h(sum);
  if (!(mis <= 1e-6)) return "aligned fields differ by " + fmt(mis);
  return {};
}

// ---------------------------------------------------------------- criterion 7
std::string crit_scaling_law() {
  EnergyModel m = cubic_model(1, 255);
  FlowParams fp;
  fp.max_steps = 20000;
  ConeParams cp(1e-2);
  CriticalPointReport plus = mountain_pass(m, ConeSign::plus, fp, cp, 33);
  if (!plus.converged) return "one-sign solve did not converge";
  CriticalPointReport rep = sign_changing_solve(m, SurfaceVariant::gamma_s, fp, cp, 3);
  if (!rep.converged) return "sign-changing solve did not converge";
  if (rep.classification != Classification::sign_changing)
    return std::string("classification ") + classification_name(rep.classification);
  const double want = 16.0 * plus.level;
  const double rel = std::abs(rep.level - want) / want;
  if (!(rel <= 2e-2))
    return "level " + fmt(rep.level) + " vs sixteenfold " + fmt(want) + " (gap " + fmt(rel) + ")";
  auto pos = sign_change_positions(rep.field);
  if (pos.size() != 1) return "found " + std::to_string(pos.size()) + " interior sign changes";
  if (!(std::abs(pos[0] - 0.5) <= 2.0 * m.grid().h()))
    return "sign change at " + fmt(pos[0]);
  oracle::ShootingResult sr = oracle::shoot_one_node();
  if (!(sr.end_value <= 1e-6)) return "shot endpoint " + fmt(sr.end_value);
  const double rel_shoot = std::abs(rep.level - sr.level) / sr.level;
  if (!(rel_shoot <= 2e-2))
    return "level " + fmt(rep.level) + " vs shot " + fmt(sr.level) + " (gap " + fmt(rel_shoot) + ")";
  return {};
}

// ---------------------------------------------------------------- criterion 8
std::string run_solve_all(const std::string& outdir, double* alpha_out) {
  fs::remove_all(outdir);
  RunConfig cfg;  // defaults: d=2, n=63, p=4, seed 1
  cfg.output_dir = outdir;
  std::ostringstream log;
  RunSummary s = execute(Command::solve_all, cfg, log);
  if (s.exit_code != 0)
    return "exit code " + std::to_string(s.exit_code) +
           (s.failures.empty() ? std::string() : ": " + s.failures.front());
  if (s.solutions.size() != 3) return "expected three solutions";
  EnergyModel m(Grid(cfg.dimension, cfg.n), Nonlinearity::odd_power(cfg.p));
  const double alpha = estimate_alpha_rho(m).alpha;
  if (alpha_out) *alpha_out = alpha;
  for (const SolutionEntry& e : s.solutions) {
    if (!(e.residual <= 1e-6)) return e.name + ": residual " + fmt(e.residual);
    if (!(e.level >= alpha)) return e.name + ": level " + fmt(e.level) + " under " + fmt(alpha);
    Field u = read_field((fs::path(outdir) / e.field_file).string());
    bool pos = true, neg = true, has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < u.size(); ++i) {
      pos = pos && u[i] > 0.0;
      neg = neg && u[i] < 0.0;
      has_pos = has_pos || u[i] > 0.0;
      has_neg = has_neg || u[i] < 0.0;
    }
    if (e.name == "positive" && !pos) return "positive field not strictly positive";
    if (e.name == "negative" && !neg) return "negative field not strictly negative";
    if (e.name == "sign_changing" && !(has_pos && has_neg))
      return "sign-changing field misses a sign";
  }
  return {};
}

std::string crit_end_to_end() { return run_solve_all("acceptance_out_8", nullptr); }

// ---------------------------------------------------------------- criterion 9
std::string crit_deformation() {
  EnergyModel m = cubic_model(1, 63);
  auto pairs = eigenpairs(m.grid(), 2);
  const Field& e1 = pairs[0].vec;
  const Field& e2 = pairs[1].vec;
  const double q = std::pow(norm_lp(e1, 4.0), 4.0);
  const double peak = 1.0 / (4.0 * q);
  const double c = 0.5 * peak;
  const double eps = 0.02 * peak;
  const double eps_prime = 0.08 * peak;
  CutoffSpec cs(c, eps, eps_prime, 1.0);
  ConeParams cp(1e-2);
  const double beta = estimate_beta(m, cs, cp, EtaVariant::band_and_w);
  if (!(beta > 1e-6)) return "band residual floor hit the numerical floor";

  auto mixed_shape = [&](int k) {
    Field v = e2 + 0.35 * seeded_smooth(m.grid(), 9001, k);
    v *= 1.0 / norm_h(v);
    return v;
  };

  // (1) zero pseudo-time is the identity, exactly.
  for (int k = 0; k < 20; ++k) {
    Field u = ray_scale_for_energy(m, mixed_shape(k), c) * mixed_shape(k);
    EtaResult r = deformation_eta(m, u, cs, cp, 0.0);
    for (std::size_t i = 0; i < u.size(); ++i)
      if (r.u[i] != u[i]) return "identity at zero time violated";
  }

  // (2) out-of-band samples are returned unchanged, exactly.
  for (int k = 0; k < 50; ++k) {
    Field shape = mixed_shape(k);
    const double target = (k % 2 == 0) ? c + 2.0 * eps_prime : c - 2.0 * eps_prime;
    Field u = ray_scale_for_energy(m, shape, target) * shape;
    EtaOptions opt;
    opt.variant = EtaVariant::band_and_w;
    EtaResult r = deformation_eta(m, u, cs, cp, 1.0, opt);
    if (!r.frozen) return "out-of-band sample " + std::to_string(k) + " was not frozen";
    for (std::size_t i = 0; i < u.size(); ++i)
      if (r.u[i] != u[i]) return "out-of-band sample " + std::to_string(k) + " was altered";
  }

  // (3) in-band samples outside the cone neighborhoods land under c - eps.
  int witnesses = 0;
  for (int k = 0; k < 200 && witnesses < 50; ++k) {
    Field shape = mixed_shape(k);
    SplitMix64 tr(SplitMix64::derive(9002, k));
    const double target = c + eps * (2.0 * tr.uniform01() - 1.0);
    Field u = ray_scale_for_energy(m, shape, target) * shape;
    if (in_w(u, cp, m)) continue;  // need out-of-W witnesses only
    ++witnesses;
    EtaOptions opt;
    opt.variant = EtaVariant::band_and_w;
    EtaResult r = deformation_eta(m, u, cs, cp, 1.0, opt);
    if (!r.completed) return "in-band sample " + std::to_string(k) + " ran out of substeps";
    const double ie = energy(m, r.u);
    if (!(ie <= c - eps + 1e-10))
      return "in-band sample " + std::to_string(k) + " ended at " + fmt(ie) +
             " above " + fmt(c - eps);
  }
  if (witnesses < 50) return "only " + std::to_string(witnesses) + " out-of-W band samples";

  // (4) samples in the cone neighborhoods stay there under full-step descent.
  // One boundary node flipped to the wrong side of zero gives each sample a
  // controlled nonzero cone distance; rescaling the spiked shape afterwards
  // keeps the energy pinned to the band center.
  Field spike(m.grid());
  spike[0] = 1.0;
  const double spike_norm = norm_h(spike);
  const double t_ref = ray_scale_for_energy(m, e1, c);
  int cone_tested = 0;
  for (int k = 0; k < 25; ++k) {
    for (ConeSign sign : {ConeSign::minus, ConeSign::plus}) {
      const double flip = sign == ConeSign::minus ? -1.0 : 1.0;
      SplitMix64 dr(SplitMix64::derive(9003, 2 * k + (sign == ConeSign::plus ? 1 : 0)));
      const double off = (0.3 + 0.6 * dr.uniform01()) * cp.eps2();
      Field shape = flip * e1;
      shape[0] = -flip * off / (t_ref * spike_norm);
      Field u = ray_scale_for_energy(m, shape, c) * shape;
      const double d0 = cone_distance(u, sign, cp, m);
      if (!(d0 > 0.0) || d0 > cp.eps2()) continue;
      ++cone_tested;
      EtaOptions opt;
      opt.variant = EtaVariant::band_and_w;
      opt.full_steps = true;
      EtaResult r = deformation_eta(m, u, cs, cp, 1.0, opt);
      const double d1 = cone_distance(r.u, sign, cp, m);
      if (!(d1 <= cp.eps2() + 1e-9))
        return "cone sample " + std::to_string(k) + " drifted to distance " + fmt(d1);
    }
  }
  if (cone_tested < 40) return "only " + std::to_string(cone_tested) + " usable cone samples";
  return {};
}

// --------------------------------------------------------------- criterion 10
std::string crit_linking_witness() {
  EnergyModel m = cubic_model(1, 63);
  ConeParams cp(1e-2);
  auto pairs = eigenpairs(m.grid(), 2);
  AlphaRho ar = estimate_alpha_rho(m);
  Surface s = make_initial_surface(SurfaceVariant::gamma_s, 3, 2.0 * ar.rho,
                                   pairs[0].vec, pairs[1].vec);
  auto check = [&](const Surface& surf, const char* when) -> std::string {
    LinkingResult lr = verify_linking(surf, ar.rho, cp, m);
    if (!lr.found || !lr.witness.has_value())
      return std::string("no witness ") + when;
    if (!(std::abs(lr.witness_norm - ar.rho) <= 1e-6))
      return std::string("witness norm off by ") + fmt(std::abs(lr.witness_norm - ar.rho)) +
             " " + when;
    if (in_w(*lr.witness, cp, m))
      return std::string("witness inside the cone neighborhoods ") + when;
    return {};
  };
  if (std::string err = check(s, "on the identity surface"); !err.empty()) return err;

  FlowParams fp;
  SurfaceSolver solver(m, s, fp, cp);
  for (int k = 0; k < 1000; ++k) solver.sweep();
  if (std::string err = check(solver.surface(), "after 1000 sweeps"); !err.empty()) return err;
  return {};
}

// --------------------------------------------------------------- criterion 11
std::string crit_variants() {
  EnergyModel m = cubic_model(1, 127);
  FlowParams fp;
  fp.max_steps = 20000;
  ConeParams cp(1e-2);
  std::vector<double> levels;
  for (SurfaceVariant v : {SurfaceVariant::gamma_s, SurfaceVariant::gamma_s_prime,
                           SurfaceVariant::gamma_s_doubleprime}) {
    CriticalPointReport rep = sign_changing_solve(m, v, fp, cp, 3);
    if (!rep.converged)
      return std::string(surface_variant_name(v)) + " did not converge";
    if (rep.classification != Classification::sign_changing)
      return std::string(surface_variant_name(v)) + " is " +
             classification_name(rep.classification);
    levels.push_back(rep.level);
  }
  for (std::size_t a = 0; a < levels.size(); ++a)
    for (std::size_t b = a + 1; b < levels.size(); ++b) {
      const double rel = std::abs(levels[a] - levels[b]) / std::min(levels[a], levels[b]);
      if (!(rel <= 0.05))
        return "levels " + fmt(levels[a]) + " and " + fmt(levels[b]) + " disagree (" +
               fmt(rel) + ")";
    }
  return {};
}

// --------------------------------------------------------------- criterion 12
std::string crit_determinism() {
  // The summary echoes the configured output directory, so both runs use the
  // same directory name and the first run is parked out of the way between.
  fs::remove_all("acceptance_out_12a");
  fs::remove_all("acceptance_out_12b");
  std::string first = run_solve_all("acceptance_out_12b", nullptr);
  if (!first.empty()) return "first run: " + first;
  fs::rename("acceptance_out_12b", "acceptance_out_12a");
  std::string second = run_solve_all("acceptance_out_12b", nullptr);
  if (!second.empty()) return "second run: " + second;
  std::set<std::string> names;
  for (const auto& entry : fs::directory_iterator("acceptance_out_12a"))
    names.insert(entry.path().filename().string());
  std::set<std::string> names_b;
  for (const auto& entry : fs::directory_iterator("acceptance_out_12b"))
    names_b.insert(entry.path().filename().string());
  if (names != names_b) return "the two runs produced different file sets";
  for (const std::string& name : names) {
    std::ifstream a(fs::path("acceptance_out_12a") / name, std::ios::binary);
    std::ifstream b(fs::path("acceptance_out_12b") / name, std::ios::binary);
    std::ostringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    if (sa.str() != sb.str()) return name + " differs between runs";
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<Criterion> criteria = {
      {1, "fixed-point pairing identity on seeded fields", 30, crit_identity},
      {2, "derivative pairing vs difference quotients", 10, crit_gradient},
      {3, "square spectrum and positive ground mode", 30, crit_spectrum},
      {4, "cone contraction and neighborhood invariance", 120, crit_contraction},
      {5, "one-sign level vs manifold-minimization oracle", 120, crit_ground_level},
      {6, "odd symmetry of the one-sign pair", 0, crit_odd_symmetry},
      {7, "sign-changing scaling law and nodal structure", 300, crit_scaling_law},
      {8, "end-to-end three-solution run", 600, crit_end_to_end},
      {9, "deformation: identity, freeze, descent, invariance", 180, crit_deformation},
      {10, "linking witness before and after surface descent", 120, crit_linking_witness},
      {11, "variant agreement of the sign-changing level", 600, crit_variants},
      {12, "byte-identical determinism of the end-to-end run", 0, crit_determinism},
  };

  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  bool all_pass = true;
  for (const Criterion& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.number)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    std::string failure;
    try {
      failure = c.run();
    } catch (const std::exception& e) {
      failure = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (failure.empty() && c.budget_seconds > 0.0 && secs > c.budget_seconds) {
      std::ostringstream over;
      over << "exceeded the " << c.budget_seconds << " s budget";
      failure = over.str();
    }
    std::ostringstream line;
    line.precision(1);
    line << std::fixed;
    line << (failure.empty() ? "[PASS] " : "[FAIL] ") << c.number << ". " << c.label
         << " (" << secs << "s)";
    if (!failure.empty()) line << ": " << failure;
    std::cout << line.str() << std::endl;
    all_pass = all_pass && failure.empty();
  }
  return all_pass ? 0 : 1;
}
