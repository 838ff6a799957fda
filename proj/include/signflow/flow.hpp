#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "signflow/cones.hpp"
#include "signflow/energy.hpp"

namespace signflow {

struct FlowParams {
  double dt = 0.5;            // initial step; halved while the decrease test fails
  double backtrack = 0.5;     // step reduction factor
  double residual_tol = 1e-8; // stop when norm_h(u - A(u)) falls below this
  int max_steps = 200000;

  void validate() const;
};

// One explicit Euler step u' = u - dt*(u - A(u)) with backtracking: dt is
// reduced until I(u') <= I(u) - (dt/4)*residual^2 or dt underflows 1e-12, in
// which case the input is returned unchanged and stagnated is set.  With
// dt = 1 the accepted proposal is exactly A(u).
struct StepResult {
  Field u;
  double dt_used = 0.0;
  bool stagnated = false;
};
StepResult descent_step(const EnergyModel& m, const Field& u, const FlowParams& fp);

enum class FlowOutcome { converged, diverged, stagnated, budget_exhausted };

struct TraceRow {
  int step = 0;
  double energy = 0.0;
  double residual = 0.0;
  double dt = 0.0;
};

struct FlowResult {
  Field u;
  FlowOutcome outcome = FlowOutcome::budget_exhausted;
  std::vector<TraceRow> trace;
  int steps = 0;
};

// Iterated descent steps until the residual drops under fp.residual_tol
// (converged), the iterate leaves the ball norm_h <= 1e6 (diverged), a step
// stagnates, or the step budget runs out.  The trace records one row per
// step taken plus a final row at the terminal state.
FlowResult integrate_flow(const EnergyModel& m, const Field& u0, const FlowParams& fp);

// CSV export with columns step, energy, residual, dt.
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);

// Level-set cutoff data: the deformation acts inside the energy band
// [c - eps_prime, c + eps_prime] and away from the listed near-critical
// fields.
struct CutoffSpec {
  double c = 0.0;
  double eps = 0.0;
  double eps_prime = 0.0;
  double delta = 1.0;
  std::vector<Field> known_critical;

  CutoffSpec(double c_, double eps_, double eps_prime_, double delta_,
             std::vector<Field> known_critical_ = {});
};

// Product of two piecewise-linear ramps in [0,1]: one in the energy I(u)
// (0 outside the eps_prime band, 1 inside the eps band), one in the H-distance
// to the nearest listed near-critical field (0 inside delta/4, 1 outside
// delta/2; identically 1 when the list is empty).
double cutoff_g(const EnergyModel& m, const Field& u, const CutoffSpec& cs);

enum class EtaVariant {
  band_only,   // freeze outside the energy band only
  band_and_w,  // additionally freeze on the eps1-neighborhood of the sign cones
};

struct EtaOptions {
  EtaVariant variant = EtaVariant::band_only;
  // Replace each Euler substep by a full move to A (a convex-combination
  // endpoint); keeps the sign-cone neighborhoods invariant step by step.
  bool full_steps = false;
  int max_substeps = 200000;
  // Positive value skips the residual-floor estimate and uses this beta.
  double beta_override = 0.0;
  // Optional replacement for the solution operator in the flow direction.
  std::function<Field(const Field&)> operator_override;
};

struct EtaResult {
  explicit EtaResult(Field u_) : u(std::move(u_)) {}
  Field u;
  bool completed = false;      // integrated to the full horizon (or froze)
  bool frozen = false;         // cutoff hit exactly 0 along the way
  bool substep_floor = false;  // step-size underflow forced a partial result
  bool reached_target = false; // terminal energy at or below c - eps
  double beta = 0.0;           // residual floor used for the time rescale
  double horizon = 0.0;        // (16*eps/beta)*t
  int substeps = 0;
};

// Normalized, cutoff-gated descent deformation at pseudo-time t in [0,1]:
// integrates du/ds = -g(u) * (u - A(u)) / norm_h(u - A(u)) up to
// s = (16*eps/beta)*t with adaptive Euler substeps that never increase the
// energy.  t = 0 and cutoff-frozen inputs return exact copies.
EtaResult deformation_eta(const EnergyModel& m, const Field& u, const CutoffSpec& cs,
                          const ConeParams& cp, double t, const EtaOptions& opt = {});

// Smallest criticality residual over a deterministic sample of the cutoff
// band, excluding (for the band_and_w variant) fields within eps1 of a sign
// cone; floored at 1e-6.  This is the beta the deformation horizon uses.
double estimate_beta(const EnergyModel& m, const CutoffSpec& cs, const ConeParams& cp,
                     EtaVariant variant, int samples = 200);

}  // namespace signflow
