#pragma once

#include <cstdint>
#include <string>

#include "signflow/energy.hpp"
#include "signflow/grid.hpp"

namespace signflow {

enum class ConeSign { plus, minus };
enum class DistanceMode { surrogate, exact };

// Neighborhood radii for the closed nodewise-sign cones.  eps is the outer
// radius; the inner radius eps1 = eps/2 and the membership radius eps2 = eps
// are derived, keeping a single knob.
struct ConeParams {
  double eps = 1e-2;
  DistanceMode mode = DistanceMode::surrogate;

  explicit ConeParams(double eps_ = 1e-2, DistanceMode mode_ = DistanceMode::surrogate);
  double eps1() const { return 0.5 * eps; }
  double eps2() const { return eps; }
};

// Nodewise max(u,0) / min(u,0); the two parts always sum back to u exactly.
Field positive_part(const Field& u);
Field negative_part(const Field& u);

// Distance from u to the chosen sign cone.  Surrogate mode returns the H-norm
// of the offending part (an upper bound on the true distance, and the bound
// every algorithmic decision uses).  Exact mode solves the constrained
// projection min over the cone of norm_h(u - w) by accelerated projected
// gradient; it is restricted to grids with at most 4096 nodes and throws
// SolveError when the iteration cap is reached.
double cone_distance(const Field& u, ConeSign sign, const ConeParams& cp,
                     const EnergyModel& m);

// True iff u lies within eps2 of either sign cone (distance per cp.mode).
bool in_w(const Field& u, const ConeParams& cp, const EnergyModel& m);

// Empirical contraction study for the solution operator near the nonpositive
// cone.  Each sample is u = w + delta*v with w a random nonpositive field of
// H-norm at most 2 and v a random unit field, delta tuned by bisection so the
// surrogate cone distance of u lands at a target in (0, eps).  The report
// carries the worst observed ratio dist(A(u))/dist(u) at the given eps and
// the largest radius (located by bracketing and bisection) at which the worst
// ratio still stays at or below one half.
struct ProbeReport {
  double max_ratio = 0.0;       // worst dist(A(u))/dist(u) at cp.eps
  double eps0_empirical = 0.0;  // largest radius with worst ratio <= 1/2
  int samples = 0;
  std::uint64_t seed = 0;
  double eps = 0.0;             // the radius the max_ratio was measured at
  bool contraction_ok = false;  // max_ratio <= 1/2
  bool eps_above_eps0 = false;  // cp.eps exceeds the empirical radius
};

ProbeReport contraction_probe(const EnergyModel& m, const ConeParams& cp, int samples,
                              std::uint64_t seed);

// Flat key=value block for the probe report.
std::string probe_report_text(const ProbeReport& rep);

}  // namespace signflow
