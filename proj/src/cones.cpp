#include "signflow/cones.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "signflow/format.hpp"
#include "signflow/rng.hpp"

namespace signflow {

ConeParams::ConeParams(double eps_, DistanceMode mode_) : eps(eps_), mode(mode_) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps: must be > 0");
}

Field positive_part(const Field& u) {
  Field out = u;
  for (double& v : out.values()) v = std::max(v, 0.0);
  return out;
}

Field negative_part(const Field& u) {
  Field out = u;
  for (double& v : out.values()) v = std::min(v, 0.0);
  return out;
}

namespace {

// Distance to the nonnegative cone by accelerated projected gradient on
// w |-> 1/2 (w-u)^T L (w-u) over { w >= 0 }.  The step 1/lambda_max uses the
// stencil bound lambda_max < 4*d*(n+1)^2.
double exact_distance_plus(const Field& u, const EnergyModel& m) {
  const Grid& g = m.grid();
  if (g.node_count() > 4096)
    throw std::invalid_argument("cone_distance: exact mode limited to grids with <= 4096 nodes");
  const std::size_t mm = g.node_count();
  const double np1 = static_cast<double>(g.n() + 1);
  const double alpha = 1.0 / (4.0 * g.dimension() * np1 * np1);

  Field w = positive_part(u);
  Field y = w;
  double t = 1.0;

  const double ref = std::max(1.0, norm_l2(laplacian_apply(g, u)) / g.cell_measure());
  const int cap = 200000;
  for (int it = 0; it < cap; ++it) {
    Field grad = laplacian_apply(g, y - u);
    Field w_next = y;
    axpy(-alpha, grad, w_next);
    for (double& v : w_next.values()) v = std::max(v, 0.0);

    if ((it % 10) == 0 || it + 1 == cap) {
      // Projected-gradient residual at the new point.
      Field gw = laplacian_apply(g, w_next - u);
      double pg = 0.0;
      auto wv = w_next.values();
      auto gv = gw.values();
      for (std::size_t i = 0; i < mm; ++i) {
        double stepped = std::max(wv[i] - alpha * gv[i], 0.0);
        double d = (wv[i] - stepped) / alpha;
        pg += d * d;
      }
      if (std::sqrt(pg) <= 1e-9 * ref) return norm_h(u - w_next);
    }

    // Momentum with a descent-direction restart.
    double dot_gd = 0.0;
    {
      auto gv = grad.values();
      auto a = w_next.values();
      auto b = w.values();
      for (std::size_t i = 0; i < mm; ++i) dot_gd += gv[i] * (a[i] - b[i]);
    }
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (dot_gd > 0.0) {
      t = 1.0;
      y = w_next;
    } else {
      double beta = (t - 1.0) / t_next;
      y = w_next;
      Field diff = w_next - w;
      axpy(beta, diff, y);
      t = t_next;
    }
    w = std::move(w_next);
  }
  throw SolveError("cone_distance: projected gradient did not converge");
}

double surrogate_distance(const Field& u, ConeSign sign) {
  return sign == ConeSign::plus ? norm_h(negative_part(u)) : norm_h(positive_part(u));
}

}  // namespace

double cone_distance(const Field& u, ConeSign sign, const ConeParams& cp,
                     const EnergyModel& m) {
  if (!(u.grid() == m.grid()))
    throw GridMismatchError("cone_distance: field does not match the model grid");
  if (cp.mode == DistanceMode::surrogate) return surrogate_distance(u, sign);
  // Exact distance to the minus cone equals the exact distance of -u to the
  // plus cone; negation is exact, so the two signs stay mirror images.
  return sign == ConeSign::plus ? exact_distance_plus(u, m) : exact_distance_plus(-u, m);
}

bool in_w(const Field& u, const ConeParams& cp, const EnergyModel& m) {
  return cone_distance(u, ConeSign::plus, cp, m) <= cp.eps2() ||
         cone_distance(u, ConeSign::minus, cp, m) <= cp.eps2();
}

namespace {

// Worst dist(A(u))/dist(u) over the sample family at neighborhood radius e.
// Per-sample substreams make every radius see the same underlying draws.
double max_ratio_at(const EnergyModel& m, double e, int samples, std::uint64_t seed) {
  const Grid& g = m.grid();
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    SplitMix64 rng(SplitMix64::derive(seed, static_cast<std::uint64_t>(i)));

    Field w = sample_smooth_field(g, rng);
    for (double& v : w.values()) v = -std::abs(v);
    double wn = norm_h(w);
    if (wn == 0.0) continue;
    w *= (2.0 * rng.uniform01()) / wn;

    Field v = sample_smooth_field(g, rng);
    double vn = norm_h(v);
    if (vn == 0.0) continue;
    v *= 1.0 / vn;

    const double target = e * rng.uniform01();
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
    if (dist_at(hi) < target) {
      // Direction has no usable positive push; force one.
      for (double& x : v.values()) x = std::abs(x);
      double vn2 = norm_h(v);
      if (vn2 == 0.0) continue;
      v *= 1.0 / vn2;
      hi = 1.0;
      doublings = 0;
      while (dist_at(hi) < target && doublings < 60) {
        hi *= 2.0;
        ++doublings;
      }
    }
    double lo = 0.0;
    for (int b = 0; b < 80; ++b) {
      double mid = 0.5 * (lo + hi);
      (dist_at(mid) < target ? lo : hi) = mid;
    }
    const double delta = hi;
    Field u = w;
    axpy(delta, v, u);
    double du = norm_h(positive_part(u));
    if (du == 0.0) continue;
    Field au = operator_a(m, u);
    double dau = norm_h(positive_part(au));
    worst = std::max(worst, dau / du);
  }
  return worst;
}

}  // namespace

ProbeReport contraction_probe(const EnergyModel& m, const ConeParams& cp, int samples,
                              std::uint64_t seed) {
  if (samples < 50) throw std::invalid_argument("samples: must be >= 50");

  ProbeReport rep;
  rep.samples = samples;
  rep.seed = seed;
  rep.eps = cp.eps;
  rep.max_ratio = max_ratio_at(m, cp.eps, samples, seed);
  rep.contraction_ok = rep.max_ratio <= 0.5;

  // Locate the largest radius that keeps the worst ratio at or below 1/2:
  // geometric bracketing, then bisection on the bracket.
  double lo = 1e-4;
  if (max_ratio_at(m, lo, samples, seed) > 0.5) {
    rep.eps0_empirical = 0.0;
  } else {
    double hi = lo;
    bool crossed = false;
    while (hi < 1e4) {
      hi *= 2.0;
      if (max_ratio_at(m, hi, samples, seed) > 0.5) {
        crossed = true;
        break;
      }
      lo = hi;
    }
    if (!crossed) {
      rep.eps0_empirical = hi;
    } else {
      for (int b = 0; b < 30; ++b) {
        double mid = 0.5 * (lo + hi);
        (max_ratio_at(m, mid, samples, seed) <= 0.5 ? lo : hi) = mid;
      }
      rep.eps0_empirical = lo;
    }
  }
  rep.eps_above_eps0 = cp.eps > rep.eps0_empirical;
  return rep;
}

std::string probe_report_text(const ProbeReport& rep) {
  std::ostringstream out;
  out << "max_ratio=" << format_double(rep.max_ratio) << "\n"
      << "eps0_empirical=" << format_double(rep.eps0_empirical) << "\n"
      << "samples=" << rep.samples << "\n"
      << "seed=" << rep.seed << "\n";
  return out.str();
}

}  // namespace signflow
