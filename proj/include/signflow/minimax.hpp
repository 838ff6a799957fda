#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "signflow/cones.hpp"
#include "signflow/energy.hpp"
#include "signflow/flow.hpp"

namespace signflow {

// Smallest power-of-two radius (doubled once more for margin) at which the
// ray energy I(R * direction) turns negative.  The direction must have unit
// H-norm.  Throws SolveError past R = 2^20.
double choose_r(const EnergyModel& m, const Field& direction);

// Arc version: R such that I is negative at 64 samples of
// R*(cos(theta) d1 + sin(theta) d2), theta in [0, angle_max].
double choose_r_arc(const EnergyModel& m, const Field& d1, const Field& d2,
                    double angle_max);

// Sphere radius rho and level floor alpha with I >= 2*alpha on the sphere of
// radius rho, estimated from a sampled embedding constant: c_emb is the max
// of h^d * sum F(u_i) over 500 deterministic unit-H-norm nonnegative samples,
// rho maximizes rho^2/2 - c_emb*rho^p on a log grid, alpha is half that
// maximum.  Throws SolveError when no positive bound exists.
struct AlphaRho {
  double rho = 0.0;
  double alpha = 0.0;
  double c_emb = 0.0;
};
AlphaRho estimate_alpha_rho(const EnergyModel& m);

enum class Classification { positive, negative, sign_changing, trivial };

// Strict nodewise test: positive/negative require every node on one strict
// side of zero; sign_changing requires strictly both signs; anything else
// (zeros present, or the zero field) is trivial.
Classification classify_field(const Field& u);
const char* classification_name(Classification c);

// Interior sign-change locations of a 1D field: interpolated zero crossings
// between consecutive nodes of opposite (relative-threshold) sign.
std::vector<double> sign_change_positions(const Field& u);

struct MinimaxTraceRow {
  int sweep = 0;
  double sup_level = 0.0;
  double maximizer_residual = 0.0;
  int excluded_count = 0;
};
void write_minimax_trace_csv(const std::string& path,
                             const std::vector<MinimaxTraceRow>& trace);

struct CriticalPointReport {
  explicit CriticalPointReport(Field f) : field(std::move(f)) {}
  double level = 0.0;
  Field field;
  double residual = 0.0;
  Classification classification = Classification::trivial;
  int iterations = 0;          // sweeps spent
  bool converged = false;      // residual and stability targets met
  bool collapsed = false;      // path max level fell to (numerical) zero
  bool swallowed = false;      // no surface vertex left outside the cone set
  bool linking_failed = false; // periodic linking re-check found no witness
  std::string trace_path;      // set by callers that export the trace
  std::vector<MinimaxTraceRow> trace;
};

// Cone-constrained path solver between 0 and R*(+-e1): interior nodes take
// descent steps (the running maximizer takes a tangent-reflected climbing
// step instead), every node is projected onto its sign cone, and the path is
// re-parametrized to uniform H-arc-length on each side of the maximizer.
// Terminates when the maximizer residual meets fp.residual_tol and the max
// level has been stable for 50 sweeps; fp.max_steps bounds the sweep count.
CriticalPointReport mountain_pass(const EnergyModel& m, ConeSign sign,
                                  const FlowParams& fp, const ConeParams& cp, int K);

enum class SurfaceVariant { gamma_s, gamma_s_prime, gamma_s_doubleprime };
const char* surface_variant_name(SurfaceVariant v);

enum class VertexTag { interior, arc, leg1, leg2, origin };

// Triangulated parameter disk sector carrying one field per vertex.  The
// half-disk variants use the sector y >= 0 with legs on the x-axis; the
// disjoint-support variant uses the quarter disk x, y >= 0 with legs on both
// axes.  d1 and d2 span the initial embedding (x, y) -> x*d1 + y*d2.
struct Surface {
  Surface(SurfaceVariant variant_, double R_, Field d1_, Field d2_)
      : variant(variant_), R(R_), d1(std::move(d1_)), d2(std::move(d2_)) {}
  SurfaceVariant variant;
  double R;
  Field d1, d2;
  std::vector<double> xs, ys;
  std::vector<VertexTag> tags;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> tri_level;
  std::vector<Field> images;
  int base_level = 0;
};

Surface make_initial_surface(SurfaceVariant variant, int mesh_level, double R,
                             const Field& d1, const Field& d2);

// Unique undirected edges in ascending lexicographic order.
std::vector<std::array<int, 2>> surface_edges(const Surface& s);

struct LinkingCrossing {
  explicit LinkingCrossing(Field p) : point(std::move(p)) {}
  Field point;
  double norm = 0.0;
  bool in_w = true;
};

struct LinkingResult {
  bool found = false;
  std::optional<Field> witness;
  double witness_norm = 0.0;
  std::vector<LinkingCrossing> crossings;  // populated when no witness exists
};

// Scans surface edges in deterministic order for crossings of the H-sphere of
// radius rho (bisection along each crossing edge to |norm - rho| <= 1e-6) and
// returns the first crossing outside the cone neighborhoods.  When the mesh
// edges alone yield none, the scan escalates through virtual uniform
// refinements of each triangle (barycentric interpolation, so every tested
// point lies on the piecewise-linear surface) up to six levels deep.  When
// every crossing lies inside the cone neighborhoods, found is false and the
// mesh-edge crossings are listed.
LinkingResult verify_linking(const Surface& s, double rho, const ConeParams& cp,
                             const EnergyModel& m);

struct SurfaceSolverOptions {
  int stability_window = 50;
  double stability_tol = 1e-10;
  double linking_rho = 0.0;  // > 0 re-verifies linking every 100 sweeps
  int refine_cap_extra = 2;  // local refinement depth beyond the base level
};

// Descending-flow deformation of a Surface: per sweep, every unfrozen vertex
// image takes one descent step (the current maximizer instead moves against
// the gradient reflected across the downhill-curvature subspace of the
// Hessian, so it homes in on the saddle), legs are re-projected onto their
// sign cones, the sup of the energy over vertices outside the cone set is
// tracked, and the fan around the maximizer is refined when its one-ring no
// longer holds a live excluded vertex.  Arc and origin vertices never move.
class SurfaceSolver {
 public:
  SurfaceSolver(EnergyModel m, Surface s, FlowParams fp, ConeParams cp,
                SurfaceSolverOptions opt = {});

  void sweep();
  CriticalPointReport run(int max_sweeps);

  const Surface& surface() const { return s_; }
  int sweeps() const { return sweeps_; }
  double sup_level() const { return sup_level_; }
  double maximizer_residual() const { return max_residual_; }
  int excluded_count() const { return excluded_count_; }
  int maximizer_index() const { return max_index_; }
  bool swallowed() const { return swallowed_; }
  bool linking_failed() const { return linking_failed_; }
  bool converged() const { return converged_; }
  const std::vector<MinimaxTraceRow>& trace() const { return trace_; }

 private:
  void scan_excluded();
  void climb_step(int idx, std::vector<Field>& next);
  void refine_fan(int idx);
  bool frozen_low(int idx) const;

  EnergyModel m_;
  Surface s_;
  FlowParams fp_;
  ConeParams cp_;
  SurfaceSolverOptions opt_;
  std::vector<double> energies_;
  std::vector<char> excluded_;
  std::vector<double> sup_window_;
  std::vector<Field> climb_basis_;
  double floor_energy_ = 0.0;
  double step_cap_ = 0.0;
  double climb_dt_ = 0.0;
  double sup_level_ = 0.0;
  double max_residual_ = 0.0;
  int excluded_count_ = 0;
  int max_index_ = -1;
  int sweeps_ = 0;
  bool swallowed_ = false;
  bool linking_failed_ = false;
  bool converged_ = false;
  std::vector<MinimaxTraceRow> trace_;
};

// Variant-dispatching front end: builds the embedding basis (second
// eigenvector span for the half-disk variants, disjoint bumps for the
// quarter-disk variant), sizes R from the arc, and runs the surface solver
// with fp.max_steps as the sweep budget.
CriticalPointReport sign_changing_solve(const EnergyModel& m, SurfaceVariant variant,
                                        const FlowParams& fp, const ConeParams& cp,
                                        int mesh_level);

// One nonnegative bump supported in the left 40% of the domain and one
// nonpositive bump in the right 40%, both unit H-norm, supports separated by
// a gap wide enough that they are exactly H-orthogonal on the stencil.
std::pair<Field, Field> disjoint_bumps(const Grid& g);

}  // namespace signflow
