#include "signflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "signflow/format.hpp"
#include "signflow/rng.hpp"

namespace signflow {

void FlowParams::validate() const {
  if (!(dt > 0.0) || dt > 1.0) throw std::invalid_argument("dt: must be in (0, 1]");
  if (!(backtrack > 0.0) || !(backtrack < 1.0))
    throw std::invalid_argument("backtrack: must be in (0, 1)");
  if (!(residual_tol > 0.0)) throw std::invalid_argument("residual_tol: must be > 0");
  if (max_steps < 1) throw std::invalid_argument("max_steps: must be >= 1");
}

namespace {

struct PreparedStep {
  Field u;
  double dt_used = 0.0;
  bool stagnated = false;
};

// Core of descent_step with A(u) and I(u) already at hand, so the flow loop
// pays one solve per step.
PreparedStep step_with(const EnergyModel& m, const Field& u, const FlowParams& fp,
                       const Field& au, double iu) {
  Field r = u - au;
  double res2 = inner_h(r, r);
  double dt = fp.dt;
  while (dt >= 1e-12) {
    Field cand = dt == 1.0 ? au : [&] {
      Field c = u;
      axpy(-dt, r, c);
      return c;
    }();
    double ic;
    bool finite = true;
    try {
      ic = energy(m, cand);
    } catch (const std::overflow_error&) {
      finite = false;
      ic = std::numeric_limits<double>::infinity();
    }
    if (finite && ic <= iu - 0.25 * dt * res2) return {std::move(cand), dt, false};
    dt *= fp.backtrack;
  }
  return {u, 0.0, true};
}

}  // namespace

StepResult descent_step(const EnergyModel& m, const Field& u, const FlowParams& fp) {
  fp.validate();
  Field au = operator_a(m, u);
  PreparedStep ps = step_with(m, u, fp, au, energy(m, u));
  return {std::move(ps.u), ps.dt_used, ps.stagnated};
}

FlowResult integrate_flow(const EnergyModel& m, const Field& u0, const FlowParams& fp) {
  fp.validate();
  FlowResult out{u0, FlowOutcome::budget_exhausted, {}, 0};
  for (int step = 0; step < fp.max_steps; ++step) {
    if (norm_h(out.u) > 1e6) {
      out.outcome = FlowOutcome::diverged;
      return out;
    }
    Field au = operator_a(m, out.u);
    double iu = energy(m, out.u);
    double res = norm_h(out.u - au);
    if (res <= fp.residual_tol) {
      out.trace.push_back({step, iu, res, 0.0});
      out.outcome = FlowOutcome::converged;
      return out;
    }
    PreparedStep ps = step_with(m, out.u, fp, au, iu);
    out.trace.push_back({step, iu, res, ps.dt_used});
    if (ps.stagnated) {
      out.outcome = FlowOutcome::stagnated;
      return out;
    }
    out.u = std::move(ps.u);
    out.steps = step + 1;
  }
  out.outcome = FlowOutcome::budget_exhausted;
  return out;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw FieldIoError(path + ": cannot open for writing");
  out << "step,energy,residual,dt\n";
  for (const TraceRow& row : trace)
    out << row.step << ',' << format_double(row.energy) << ',' << format_double(row.residual)
        << ',' << format_double(row.dt) << '\n';
  if (!out) throw FieldIoError(path + ": write failed");
}

CutoffSpec::CutoffSpec(double c_, double eps_, double eps_prime_, double delta_,
                       std::vector<Field> known_critical_)
    : c(c_), eps(eps_), eps_prime(eps_prime_), delta(delta_),
      known_critical(std::move(known_critical_)) {
  if (!(eps > 0.0) || !(eps < eps_prime))
    throw std::invalid_argument("eps, eps_prime: need 0 < eps < eps_prime");
  if (!(delta > 0.0)) throw std::invalid_argument("delta: must be > 0");
}

namespace {

double ramp_up(double x, double lo, double hi) {
  if (x <= lo) return 0.0;
  if (x >= hi) return 1.0;
  return (x - lo) / (hi - lo);
}

double energy_ramp(double e, const CutoffSpec& cs) {
  if (e < cs.c) return ramp_up(e, cs.c - cs.eps_prime, cs.c - cs.eps);
  return 1.0 - ramp_up(e, cs.c + cs.eps, cs.c + cs.eps_prime);
}

double distance_ramp(const Field& u, const CutoffSpec& cs) {
  if (cs.known_critical.empty()) return 1.0;
  double dmin = std::numeric_limits<double>::infinity();
  for (const Field& k : cs.known_critical) dmin = std::min(dmin, norm_h(u - k));
  return ramp_up(dmin, 0.25 * cs.delta, 0.5 * cs.delta);
}

// Extra freeze factor for the variant fixing the eps1 cone neighborhoods:
// 0 within eps1 of either sign cone, 1 outside eps2, linear between.
double w_ramp(const Field& u, const ConeParams& cp, const EnergyModel& m) {
  double d = std::min(cone_distance(u, ConeSign::plus, cp, m),
                      cone_distance(u, ConeSign::minus, cp, m));
  return ramp_up(d, cp.eps1(), cp.eps2());
}

double gate(const EnergyModel& m, const Field& u, double iu, const CutoffSpec& cs,
            const ConeParams& cp, EtaVariant variant) {
  double g = energy_ramp(iu, cs) * distance_ramp(u, cs);
  if (variant == EtaVariant::band_and_w && g != 0.0) g *= w_ramp(u, cp, m);
  return g;
}

}  // namespace

double cutoff_g(const EnergyModel& m, const Field& u, const CutoffSpec& cs) {
  double e = energy(m, u);
  return energy_ramp(e, cs) * distance_ramp(u, cs);
}

double estimate_beta(const EnergyModel& m, const CutoffSpec& cs, const ConeParams& cp,
                     EtaVariant variant, int samples) {
  if (samples < 1) throw std::invalid_argument("samples: must be >= 1");
  const double floor = 1e-6;
  double beta = std::numeric_limits<double>::infinity();
  int kept = 0;
  for (int i = 0; i < samples; ++i) {
    SplitMix64 rng(SplitMix64::derive(0xbe7a5eedull, static_cast<std::uint64_t>(i)));
    Field v = sample_smooth_field(m.grid(), rng);
    double vn = norm_h(v);
    if (vn == 0.0) continue;
    v *= 1.0 / vn;
    // Walk outward along the ray until the energy enters the band.  The ray
    // energy rises from 0 to a single maximum and then falls without bound;
    // crossings that jump over the band between grid points are recovered by
    // bisection on the bracketing segment.
    const double lo_band = cs.c - cs.eps_prime;
    const double hi_band = cs.c + cs.eps_prime;
    auto ray_energy = [&](double scale) {
      try {
        return energy(m, scale * v);
      } catch (const std::overflow_error&) {
        return -std::numeric_limits<double>::infinity();
      }
    };
    auto bisect_into_band = [&](double sa, double sb) {
      // Energy is monotone on [sa, sb] with the band strictly between the
      // endpoint values; shrink until the midpoint lands inside.
      for (int b = 0; b < 200; ++b) {
        double mid = 0.5 * (sa + sb);
        double e = ray_energy(mid);
        if (e >= lo_band && e <= hi_band) return mid;
        bool rising = ray_energy(sa) < lo_band;
        if ((rising && e < lo_band) || (!rising && e > hi_band))
          sa = mid;
        else
          sb = mid;
      }
      return -1.0;
    };
    double found_s = -1.0;
    double prev_e = 0.0, prev_s = 0.0;
    const double ds = 0.05;
    for (int k = 1; k <= 4000; ++k) {
      double sc = ds * k;
      double e = ray_energy(sc);
      if (e >= lo_band && e <= hi_band) {
        found_s = sc;
        break;
      }
      if (prev_e < lo_band && e > hi_band) {
        found_s = bisect_into_band(prev_s, sc);
        break;
      }
      if (prev_e > hi_band && e < lo_band) {
        found_s = bisect_into_band(prev_s, sc);
        break;
      }
      if (e < prev_e && e < lo_band && prev_e < lo_band) break;  // peak stayed under the band
      prev_e = e;
      prev_s = sc;
    }
    if (found_s < 0.0) continue;
    Field u = found_s * v;
    if (variant == EtaVariant::band_and_w) {
      double d = std::min(cone_distance(u, ConeSign::plus, cp, m),
                          cone_distance(u, ConeSign::minus, cp, m));
      if (d <= cp.eps1()) continue;
    }
    beta = std::min(beta, norm_h(gradient_h(m, u)));
    ++kept;
  }
  if (kept == 0 || !(beta > floor)) return floor;
  return beta;
}

EtaResult deformation_eta(const EnergyModel& m, const Field& u, const CutoffSpec& cs,
                          const ConeParams& cp, double t, const EtaOptions& opt) {
  if (!(t >= 0.0) || t > 1.0) throw std::invalid_argument("t: must be in [0, 1]");
  if (!(u.grid() == m.grid()))
    throw GridMismatchError("deformation_eta: field does not match the model grid");

  EtaResult out(u);
  if (t == 0.0) {
    out.completed = true;
    return out;
  }
  out.beta = opt.beta_override > 0.0 ? opt.beta_override : estimate_beta(m, cs, cp, opt.variant);
  out.horizon = (16.0 * cs.eps / out.beta) * t;

  auto apply_a = [&](const Field& x) {
    return opt.operator_override ? opt.operator_override(x) : operator_a(m, x);
  };

  double s = 0.0;
  double iu = energy(m, out.u);
  while (s < out.horizon && out.substeps < opt.max_substeps) {
    double g = gate(m, out.u, iu, cs, cp, opt.variant);
    if (g == 0.0) {
      out.frozen = true;
      out.completed = true;
      break;
    }
    Field au = apply_a(out.u);
    Field r = out.u - au;
    double rn = norm_h(r);
    if (rn <= 1e-14) {
      // Sitting on a critical point: the direction is undefined and the flow
      // cannot move; report a frozen partial result.
      out.frozen = true;
      break;
    }

    // Substep sized for an energy drop of about eps/8, spatial motion at most
    // 1/4, and never past the horizon.  A full step jumps to A instead.
    double h;
    if (opt.full_steps) {
      h = std::min(rn / g, out.horizon - s);
    } else {
      h = std::min({(cs.eps / 8.0) / (g * rn), 0.25 / g, out.horizon - s});
    }

    bool placed = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      double move = std::min(h * g / rn, 1.0);    // convex weight toward A
      double h_eff = move * rn / g;               // time the move represents
      Field cand = move == 1.0 ? au : [&] {
        Field c = out.u;
        Field toward = au - out.u;
        axpy(move, toward, c);
        return c;
      }();
      double ic;
      try {
        ic = energy(m, cand);
      } catch (const std::overflow_error&) {
        h *= 0.5;
        continue;
      }
      if (ic <= iu) {
        out.u = std::move(cand);
        iu = ic;
        s += h_eff;
        placed = true;
        break;
      }
      h *= 0.5;
    }
    ++out.substeps;
    if (!placed) {
      out.substep_floor = true;
      break;
    }
  }
  if (s >= out.horizon) out.completed = true;
  out.reached_target = iu <= cs.c - cs.eps;
  return out;
}

}  // namespace signflow
