#include "signflow/minimax.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>

#include "signflow/format.hpp"
#include "signflow/rng.hpp"

namespace signflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Superlinear potentials overflow toward +inf, so an overflow during the
// energy evaluation means the value has dived below any floor.
double safe_energy(const EnergyModel& m, const Field& u) {
  try {
    return energy(m, u);
  } catch (const std::overflow_error&) {
    return -kInf;
  }
}

// Nodewise slope of the reaction term, used for Hessian actions.  Analytic
// for the odd power family, central difference for custom terms.
Field reaction_slope(const EnergyModel& m, const Field& u) {
  const Nonlinearity& nl = m.nl();
  Field out(m.grid());
  const std::size_t N = u.size();
  if (nl.kind() == NonlinearityKind::odd_power) {
    const double p = nl.p();
    if (p == 4.0) {
      for (std::size_t i = 0; i < N; ++i) out[i] = 3.0 * u[i] * u[i];
    } else {
      for (std::size_t i = 0; i < N; ++i)
        out[i] = (p - 1.0) * std::pow(std::abs(u[i]), p - 2.0);
    }
  } else {
    for (std::size_t i = 0; i < N; ++i) {
      double d = 1e-6 * (1.0 + std::abs(u[i]));
      out[i] = (nl.f(u[i] + d) - nl.f(u[i] - d)) / (2.0 * d);
    }
  }
  return out;
}

}  // namespace

double choose_r(const EnergyModel& m, const Field& direction) {
  if (std::abs(norm_h(direction) - 1.0) > 1e-6)
    throw std::invalid_argument("direction: must have unit H-norm");
  double R = 1.0;
  while (!(safe_energy(m, R * direction) < 0.0)) {
    R *= 2.0;
    if (R > 1048576.0)
      throw SolveError("choose_r: energy stayed nonnegative out to the radius cap");
  }
  return 2.0 * R;
}

double choose_r_arc(const EnergyModel& m, const Field& d1, const Field& d2,
                    double angle_max) {
  if (!(angle_max > 0.0)) throw std::invalid_argument("angle_max: must be > 0");
  require_same_grid(d1, d2, "choose_r_arc");
  auto all_negative = [&](double R) {
    for (int j = 0; j < 64; ++j) {
      double th = angle_max * static_cast<double>(j) / 63.0;
      Field pt = (R * std::cos(th)) * d1;
      axpy(R * std::sin(th), d2, pt);
      if (!(safe_energy(m, pt) < 0.0)) return false;
    }
    return true;
  };
  double R = 1.0;
  while (!all_negative(R)) {
    R *= 2.0;
    if (R > 1048576.0)
      throw SolveError("choose_r_arc: energy stayed nonnegative out to the radius cap");
  }
  return 2.0 * R;
}

AlphaRho estimate_alpha_rho(const EnergyModel& m) {
  const Grid& g = m.grid();
  // Random unit fields: mixtures of the principal stencil eigenvector with
  // nonnegative smooth noise.  Anchoring the family at the eigenvector keeps
  // the sampled maximum close to the true extremal of the potential over the
  // unit sphere even on fine grids, where free smooth samples spread their
  // mass too thin and undershoot it badly.
  const Field principal = eigenpairs(g, 1)[0].vec;
  double c_emb = 0.0;
  for (int i = 0; i < 500; ++i) {
    SplitMix64 rng(SplitMix64::derive(0x414c504841ull, static_cast<std::uint64_t>(i)));
    Field v = sample_smooth_field(g, rng);
    for (double& x : v.values()) x = std::abs(x);
    double vn = norm_h(v);
    if (vn == 0.0) continue;
    v *= (1.0 / vn) * rng.uniform01();
    v += principal;
    vn = norm_h(v);
    if (vn == 0.0) continue;
    v *= 1.0 / vn;
    double pot = 0.0;
    for (double x : v.values()) pot += m.nl().F(x);
    c_emb = std::max(c_emb, g.cell_measure() * pot);
  }
  if (!(c_emb > 0.0)) throw SolveError("estimate_alpha_rho: embedding sample degenerate");

  const double p = m.nl().p();
  double best_rho = 0.0, best_val = -kInf;
  const double llo = std::log(1e-3), lhi = std::log(1e3);
  for (int k = 0; k < 400; ++k) {
    double rho = std::exp(llo + (lhi - llo) * static_cast<double>(k) / 399.0);
    double val = 0.5 * rho * rho - c_emb * std::pow(rho, p);
    if (val > best_val) {
      best_val = val;
      best_rho = rho;
    }
  }
  if (!(best_val > 0.0))
    throw SolveError("estimate_alpha_rho: no positive sphere bound on this grid");
  return {best_rho, 0.5 * best_val, c_emb};
}

Classification classify_field(const Field& u) {
  double mn = kInf, mx = -kInf;
  for (double v : u.values()) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  if (mn > 0.0) return Classification::positive;
  if (mx < 0.0) return Classification::negative;
  if (mn < 0.0 && mx > 0.0) return Classification::sign_changing;
  return Classification::trivial;
}

const char* classification_name(Classification c) {
  switch (c) {
    case Classification::positive: return "positive";
    case Classification::negative: return "negative";
    case Classification::sign_changing: return "sign_changing";
    default: return "trivial";
  }
}

std::vector<double> sign_change_positions(const Field& u) {
  const Grid& g = u.grid();
  if (g.dimension() != 1)
    throw std::invalid_argument("sign_change_positions: 1D fields only");
  double amax = 0.0;
  for (double v : u.values()) amax = std::max(amax, std::abs(v));
  std::vector<double> out;
  if (amax == 0.0) return out;
  const double tol = 1e-9 * amax;
  int prev_idx = -1, prev_sign = 0;
  for (int i = 0; i < g.n(); ++i) {
    double v = u[static_cast<std::size_t>(i)];
    if (std::abs(v) <= tol) continue;
    int sgn = v > 0.0 ? 1 : -1;
    if (prev_sign != 0 && sgn != prev_sign) {
      double x0 = g.coordinate(prev_idx), x1 = g.coordinate(i);
      double y0 = u[static_cast<std::size_t>(prev_idx)], y1 = v;
      out.push_back(x0 - y0 * (x1 - x0) / (y1 - y0));
    }
    prev_sign = sgn;
    prev_idx = i;
  }
  return out;
}

void write_minimax_trace_csv(const std::string& path,
                             const std::vector<MinimaxTraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw FieldIoError(path + ": cannot open for writing");
  out << "sweep,sup_level,maximizer_residual,excluded_count\n";
  for (const MinimaxTraceRow& row : trace)
    out << row.sweep << ',' << format_double(row.sup_level) << ','
        << format_double(row.maximizer_residual) << ',' << row.excluded_count << '\n';
  if (!out) throw FieldIoError(path + ": write failed");
}

namespace {

// Descent step with a displacement cap: a node never travels more than cap
// in one sweep, which keeps the discretized path/surface from being torn
// apart by the runaway region past the pass where the energy is unbounded
// below.  Backtracks on the raw energy once the cap overrides the Armijo
// step length.
Field capped_descent(const EnergyModel& m, const Field& u, const FlowParams& fp,
                     double cap) {
  Field r = gradient_h(m, u);
  double rn = norm_h(r);
  if (rn == 0.0) return u;
  if (fp.dt * rn <= cap) {
    StepResult st = descent_step(m, u, fp);
    return std::move(st.u);
  }
  double tau = cap / rn;
  double iu = safe_energy(m, u);
  for (int k = 0; k < 40; ++k) {
    Field cand = u;
    axpy(-tau, r, cand);
    if (safe_energy(m, cand) < iu) return cand;
    tau *= fp.backtrack;
  }
  return u;
}

std::vector<double> cumulative_lengths(const std::vector<Field>& nodes) {
  std::vector<double> c(nodes.size(), 0.0);
  for (std::size_t i = 1; i < nodes.size(); ++i)
    c[i] = c[i - 1] + norm_h(nodes[i] - nodes[i - 1]);
  return c;
}

Field interp_polyline(const std::vector<Field>& nodes, const std::vector<double>& cum,
                      double s) {
  if (s <= 0.0) return nodes.front();
  if (s >= cum.back()) return nodes.back();
  std::size_t j = 1;
  while (j < cum.size() && cum[j] < s) ++j;
  double seg = cum[j] - cum[j - 1];
  if (seg <= 0.0) return nodes[j];
  double t = (s - cum[j - 1]) / seg;
  Field out = (1.0 - t) * nodes[j - 1];
  axpy(t, nodes[j], out);
  return out;
}

// Uniform H-arc-length spacing, independently on each side of the pinned
// index so the pinned node (the climbing node) is preserved exactly.
void reparametrize(std::vector<Field>& nodes, int pin) {
  const int K = static_cast<int>(nodes.size());
  std::vector<double> cum = cumulative_lengths(nodes);
  if (!(cum.back() > 0.0)) return;
  std::vector<Field> out;
  out.reserve(nodes.size());
  if (pin <= 0 || pin >= K - 1) {
    for (int k = 0; k < K; ++k) {
      if (k == 0 || k == K - 1) {
        out.push_back(nodes[static_cast<std::size_t>(k)]);
        continue;
      }
      out.push_back(interp_polyline(nodes, cum, cum.back() * k / (K - 1)));
    }
  } else {
    double sp = cum[pin];
    for (int k = 0; k < K; ++k) {
      if (k == 0 || k == K - 1 || k == pin) {
        out.push_back(nodes[static_cast<std::size_t>(k)]);
        continue;
      }
      double s = k < pin ? sp * k / pin
                         : sp + (cum.back() - sp) * (k - pin) / (K - 1 - pin);
      out.push_back(interp_polyline(nodes, cum, s));
    }
  }
  nodes = std::move(out);
}

}  // namespace

CriticalPointReport mountain_pass(const EnergyModel& m, ConeSign sign,
                                  const FlowParams& fp, const ConeParams& cp, int K) {
  fp.validate();
  (void)cp;  // admissibility is enforced by the (parameter-free) sign projection
  if (K < 17) throw std::invalid_argument("K: must be >= 17");

  Field dir = eigenpairs(m.grid(), 1)[0].vec;
  if (sign == ConeSign::minus) dir = -dir;
  const double R = choose_r(m, dir);

  std::vector<Field> nodes;
  nodes.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k)
    nodes.push_back((R * static_cast<double>(k) / (K - 1)) * dir);
  const double i_end = safe_energy(m, nodes.back());
  const double floor_energy = i_end - 1.0 - 0.1 * std::abs(i_end);

  auto project = [&](Field& f) {
    f = sign == ConeSign::plus ? positive_part(f) : negative_part(f);
  };

  CriticalPointReport rep(nodes[1]);
  std::vector<double> window;
  int climb = -1;
  double climb_dt = fp.dt;
  const double step_cap = R / (K - 1);

  auto finish = [&](int amax, double emax, double res, int sweeps_done, bool conv,
                    bool coll) {
    rep.field = nodes[static_cast<std::size_t>(amax)];
    rep.level = emax;
    rep.residual = res;
    rep.classification = coll ? Classification::trivial : classify_field(rep.field);
    rep.iterations = sweeps_done;
    rep.converged = conv;
    rep.collapsed = coll;
    return rep;
  };

  int amax = 0;
  double emax = 0.0, res = kInf;
  for (int sweepi = 0; sweepi < fp.max_steps; ++sweepi) {
    std::vector<Field> next = nodes;
    for (int k = 1; k + 1 < K; ++k) {
      if (k == climb) continue;
      const Field& cur = nodes[static_cast<std::size_t>(k)];
      if (safe_energy(m, cur) <= floor_energy || norm_h(cur) > 1e6) continue;
      next[static_cast<std::size_t>(k)] = capped_descent(m, cur, fp, step_cap);
    }
    if (climb >= 1 && climb + 1 < K) {
      // Climbing move: reflect the gradient across the local path tangent so
      // the node ascends along the path and descends transversally.
      const Field& cur = nodes[static_cast<std::size_t>(climb)];
      Field tan = nodes[static_cast<std::size_t>(climb + 1)] -
                  nodes[static_cast<std::size_t>(climb - 1)];
      double tn = norm_h(tan);
      Field r = gradient_h(m, cur);
      double rn = norm_h(r);
      if (tn > 0.0 && rn > 0.0) {
        tan *= 1.0 / tn;
        Field rc = r;
        axpy(-2.0 * inner_h(r, tan), tan, rc);
        double dtc = std::min(climb_dt, step_cap / rn);
        for (int tries = 0; tries < 12; ++tries) {
          Field cand = cur;
          axpy(-dtc, rc, cand);
          if (norm_h(gradient_h(m, cand)) <= 2.0 * rn) {
            next[static_cast<std::size_t>(climb)] = std::move(cand);
            climb_dt = std::min(dtc * 1.2, fp.dt);
            break;
          }
          dtc *= 0.5;
        }
      } else if (rn > 0.0) {
        StepResult st = descent_step(m, cur, fp);
        next[static_cast<std::size_t>(climb)] = std::move(st.u);
      }
    }
    nodes = std::move(next);
    for (int k = 1; k + 1 < K; ++k) project(nodes[static_cast<std::size_t>(k)]);
    reparametrize(nodes, climb);

    amax = 0;
    emax = -kInf;
    for (int k = 0; k < K; ++k) {
      double e = safe_energy(m, nodes[static_cast<std::size_t>(k)]);
      if (e > emax) {
        emax = e;
        amax = k;
      }
    }
    res = norm_h(gradient_h(m, nodes[static_cast<std::size_t>(amax)]));
    rep.trace.push_back({sweepi, emax, res, 0});
    climb = (amax >= 1 && amax + 1 < K) ? amax : -1;

    if (emax <= 1e-8) return finish(amax, emax, res, sweepi + 1, false, true);

    window.push_back(emax);
    if (window.size() > 50) window.erase(window.begin());
    if (window.size() == 50) {
      auto [mn, mx] = std::minmax_element(window.begin(), window.end());
      if (*mx - *mn <= 1e-10 && res <= fp.residual_tol)
        return finish(amax, emax, res, sweepi + 1, true, false);
    }
  }
  return finish(amax, emax, res, fp.max_steps, false, false);
}

const char* surface_variant_name(SurfaceVariant v) {
  switch (v) {
    case SurfaceVariant::gamma_s: return "gamma_s";
    case SurfaceVariant::gamma_s_prime: return "gamma_s_prime";
    default: return "gamma_s_doubleprime";
  }
}

namespace {

bool on_circle(double x, double y, double R) {
  return std::abs(x * x + y * y - R * R) <= 1e-9 * R * R;
}

// Classify the midpoint of an edge from the endpoint geometry of the sector.
// quarter = true for the quarter disk (legs on both axes), false for the half
// disk (legs on the two halves of the x-axis).
struct MidVertex {
  double x, y;
  VertexTag tag;
};

MidVertex midpoint_vertex(double xa, double ya, double xb, double yb, double R,
                          bool quarter) {
  double x = 0.5 * (xa + xb), y = 0.5 * (ya + yb);
  if (on_circle(xa, ya, R) && on_circle(xb, yb, R)) {
    double nrm = std::sqrt(x * x + y * y);
    if (nrm > 0.0) {
      x *= R / nrm;
      y *= R / nrm;
    }
    return {x, y, VertexTag::arc};
  }
  if (quarter) {
    if (ya == 0.0 && yb == 0.0) return {x, 0.0, VertexTag::leg1};
    if (xa == 0.0 && xb == 0.0) return {0.0, y, VertexTag::leg2};
  } else {
    if (ya == 0.0 && yb == 0.0 && xa >= 0.0 && xb >= 0.0) return {x, 0.0, VertexTag::leg1};
    if (ya == 0.0 && yb == 0.0 && xa <= 0.0 && xb <= 0.0) return {x, 0.0, VertexTag::leg2};
  }
  return {x, y, VertexTag::interior};
}

Field embed_image(const Surface& s, double x, double y) {
  Field img = x * s.d1;
  axpy(y, s.d2, img);
  return img;
}

}  // namespace

Surface make_initial_surface(SurfaceVariant variant, int mesh_level, double R,
                             const Field& d1, const Field& d2) {
  if (mesh_level < 3 || mesh_level > 7)
    throw std::invalid_argument("mesh_level: must be in [3, 7]");
  if (!(R > 0.0)) throw std::invalid_argument("R: must be > 0");
  require_same_grid(d1, d2, "make_initial_surface");

  const bool quarter = variant == SurfaceVariant::gamma_s_doubleprime;
  Surface s(variant, R, d1, d2);
  s.base_level = mesh_level;
  if (quarter) {
    s.xs = {0.0, R, 0.0};
    s.ys = {0.0, 0.0, R};
    s.tags = {VertexTag::origin, VertexTag::arc, VertexTag::arc};
    s.triangles = {{0, 1, 2}};
  } else {
    s.xs = {0.0, R, 0.0, -R};
    s.ys = {0.0, 0.0, R, 0.0};
    s.tags = {VertexTag::origin, VertexTag::arc, VertexTag::arc, VertexTag::arc};
    s.triangles = {{0, 1, 2}, {0, 2, 3}};
  }
  s.tri_level.assign(s.triangles.size(), 0);

  for (int level = 0; level < mesh_level; ++level) {
    std::map<std::pair<int, int>, int> midpoint_of;
    auto midpoint = [&](int a, int b) {
      std::pair<int, int> key = std::minmax(a, b);
      auto it = midpoint_of.find(key);
      if (it != midpoint_of.end()) return it->second;
      MidVertex mv = midpoint_vertex(s.xs[a], s.ys[a], s.xs[b], s.ys[b], R, quarter);
      int idx = static_cast<int>(s.xs.size());
      s.xs.push_back(mv.x);
      s.ys.push_back(mv.y);
      s.tags.push_back(mv.tag);
      midpoint_of.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next_tris;
    next_tris.reserve(4 * s.triangles.size());
    for (const auto& tri : s.triangles) {
      int ab = midpoint(tri[0], tri[1]);
      int bc = midpoint(tri[1], tri[2]);
      int ca = midpoint(tri[2], tri[0]);
      next_tris.push_back({tri[0], ab, ca});
      next_tris.push_back({ab, tri[1], bc});
      next_tris.push_back({ca, bc, tri[2]});
      next_tris.push_back({ab, bc, ca});
    }
    s.triangles = std::move(next_tris);
  }
  s.tri_level.assign(s.triangles.size(), mesh_level);

  s.images.reserve(s.xs.size());
  for (std::size_t i = 0; i < s.xs.size(); ++i)
    s.images.push_back(embed_image(s, s.xs[i], s.ys[i]));
  return s;
}

std::vector<std::array<int, 2>> surface_edges(const Surface& s) {
  std::vector<std::array<int, 2>> edges;
  edges.reserve(3 * s.triangles.size());
  for (const auto& tri : s.triangles)
    for (int e = 0; e < 3; ++e) {
      int a = tri[e], b = tri[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      edges.push_back({a, b});
    }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

LinkingResult verify_linking(const Surface& s, double rho, const ConeParams& cp,
                             const EnergyModel& m) {
  if (!(rho > 0.0) || !(rho < s.R))
    throw std::invalid_argument("rho: must be in (0, R)");
  LinkingResult out;
  auto consider = [&](Field pt) {
    double nrm = norm_h(pt);
    LinkingCrossing cr(std::move(pt));
    cr.norm = nrm;
    cr.in_w = in_w(cr.point, cp, m);
    if (!cr.in_w) {
      out.found = true;
      out.witness = cr.point;
      out.witness_norm = nrm;
      return true;
    }
    out.crossings.push_back(std::move(cr));
    return false;
  };

  for (const auto& edge : surface_edges(s)) {
    const Field& A = s.images[static_cast<std::size_t>(edge[0])];
    const Field& B = s.images[static_cast<std::size_t>(edge[1])];
    double fa = norm_h(A) - rho;
    double fb = norm_h(B) - rho;
    if (std::abs(fa) <= 1e-6) {
      if (consider(A)) return out;
      continue;
    }
    if (std::abs(fb) <= 1e-6) {
      if (consider(B)) return out;
      continue;
    }
    if ((fa < 0.0) == (fb < 0.0)) continue;
    // The norm along the segment is convex in the parameter, so bisection on
    // the sign of (norm - rho) converges to the crossing.
    double ta = 0.0, tb = 1.0;
    for (int it = 0; it < 200; ++it) {
      double tm = 0.5 * (ta + tb);
      Field mid = (1.0 - tm) * A;
      axpy(tm, B, mid);
      double fm = norm_h(mid) - rho;
      if (std::abs(fm) <= 1e-6) {
        if (consider(std::move(mid))) return out;
        break;
      }
      if ((fm < 0.0) == (fa < 0.0)) {
        ta = tm;
        fa = fm;
      } else {
        tb = tm;
      }
    }
  }
  if (out.found) return out;

  // The mesh edges can lose the crossing once the flow has swept every
  // vertex near the sphere into a cone: the surface is piecewise linear on
  // triangles, and the excluded crossing then sits in a triangle interior.
  // Escalate by scanning the edges of virtual uniform refinements of each
  // triangle (images interpolated barycentrically, so these are genuine
  // surface points); the per-triangle Gram matrix makes the norm of any
  // interpolated point an O(1) evaluation.  Whenever the crossing curve of
  // the sphere connects a point of each cone, a point with both cone
  // distances >= rho/2 lies between them, so enough depth always succeeds.
  for (int depth = 1; depth <= 6 && !out.found; ++depth) {
    const int K = 1 << depth;
    for (const auto& tri : s.triangles) {
      const Field& U0 = s.images[static_cast<std::size_t>(tri[0])];
      const Field& U1 = s.images[static_cast<std::size_t>(tri[1])];
      const Field& U2 = s.images[static_cast<std::size_t>(tri[2])];
      double g00 = inner_h(U0, U0), g11 = inner_h(U1, U1), g22 = inner_h(U2, U2);
      double g01 = inner_h(U0, U1), g02 = inner_h(U0, U2), g12 = inner_h(U1, U2);
      auto norm_at = [&](double i, double j) {
        double b1 = i / K, b2 = j / K, b0 = 1.0 - b1 - b2;
        double n2 = b0 * b0 * g00 + b1 * b1 * g11 + b2 * b2 * g22 +
                    2.0 * (b0 * b1 * g01 + b0 * b2 * g02 + b1 * b2 * g12);
        return n2 > 0.0 ? std::sqrt(n2) : 0.0;
      };
      auto field_at = [&](double i, double j) {
        double b1 = i / K, b2 = j / K, b0 = 1.0 - b1 - b2;
        Field u = b0 * U0;
        axpy(b1, U1, u);
        axpy(b2, U2, u);
        return u;
      };
      auto witness_at = [&](double i, double j) {
        Field u = field_at(i, j);
        if (in_w(u, cp, m)) return false;
        out.found = true;
        out.witness_norm = norm_h(u);
        out.witness = std::move(u);
        return true;
      };
      auto scan_segment = [&](int ia, int ja, int ib, int jb) {
        double fa2 = norm_at(ia, ja) - rho;
        double fb2 = norm_at(ib, jb) - rho;
        if (std::abs(fa2) <= 1e-6) return witness_at(ia, ja);
        if (std::abs(fb2) <= 1e-6) return witness_at(ib, jb);
        if ((fa2 < 0.0) == (fb2 < 0.0)) return false;
        double ta = 0.0, tb = 1.0;
        for (int it = 0; it < 200; ++it) {
          double tm = 0.5 * (ta + tb);
          double im = ia + tm * (ib - ia), jm = ja + tm * (jb - ja);
          double fm = norm_at(im, jm) - rho;
          if (std::abs(fm) <= 1e-6) return witness_at(im, jm);
          if ((fm < 0.0) == (fa2 < 0.0)) {
            ta = tm;
            fa2 = fm;
          } else {
            tb = tm;
          }
        }
        return false;
      };
      for (int j = 0; j < K && !out.found; ++j)
        for (int i = 0; i + j < K && !out.found; ++i) {
          if (scan_segment(i, j, i + 1, j)) return out;
          if (scan_segment(i, j, i, j + 1)) return out;
          if (scan_segment(i + 1, j, i, j + 1)) return out;
        }
      if (out.found) break;
    }
  }
  return out;
}

SurfaceSolver::SurfaceSolver(EnergyModel m, Surface s, FlowParams fp, ConeParams cp,
                             SurfaceSolverOptions opt)
    : m_(std::move(m)), s_(std::move(s)), fp_(fp), cp_(cp), opt_(opt) {
  fp_.validate();
  energies_.resize(s_.images.size());
  for (std::size_t i = 0; i < s_.images.size(); ++i)
    energies_[i] = safe_energy(m_, s_.images[i]);
  double mn = kInf;
  for (double e : energies_) mn = std::min(mn, e);
  floor_energy_ = mn - 1.0 - 0.1 * std::abs(mn);
  step_cap_ = s_.R / std::exp2(s_.base_level);
  climb_dt_ = fp_.dt;
  scan_excluded();
}

bool SurfaceSolver::frozen_low(int idx) const {
  return energies_[static_cast<std::size_t>(idx)] <= floor_energy_ ||
         norm_h(s_.images[static_cast<std::size_t>(idx)]) > 1e6;
}

void SurfaceSolver::scan_excluded() {
  const std::size_t N = s_.images.size();
  excluded_.assign(N, 0);
  excluded_count_ = 0;
  sup_level_ = -kInf;
  max_index_ = -1;
  for (std::size_t i = 0; i < N; ++i) {
    bool ex = !in_w(s_.images[i], cp_, m_);
    excluded_[i] = ex ? 1 : 0;
    if (ex) {
      ++excluded_count_;
      if (energies_[i] > sup_level_) {
        sup_level_ = energies_[i];
        max_index_ = static_cast<int>(i);
      }
    }
  }
  if (max_index_ < 0) {
    swallowed_ = true;
    max_residual_ = 0.0;
    return;
  }
  max_residual_ = norm_h(gradient_h(m_, s_.images[static_cast<std::size_t>(max_index_)]));
}

void SurfaceSolver::climb_step(int idx, std::vector<Field>& next) {
  // Saddle-seeking update for the maximizer: move against the gradient
  // reflected across the downhill-curvature subspace of the Hessian.  The
  // subspace comes from subspace iteration on the compact operator
  // w -> (stencil)^{-1}(f'(u) w); eigenvalues above 1 mark directions in
  // which the energy bends downward.  The two-vector basis persists across
  // sweeps, so each call only refreshes it.
  const Field& cur = s_.images[static_cast<std::size_t>(idx)];
  Field r = gradient_h(m_, cur);
  double rn = norm_h(r);
  if (rn == 0.0) return;

  Field slope = reaction_slope(m_, cur);
  auto apply_k = [&](const Field& v) {
    Field rhs(m_.grid());
    for (std::size_t i = 0; i < v.size(); ++i) rhs[i] = slope[i] * v[i];
    return solve_poisson(m_.grid(), rhs, m_.poisson_tol());
  };

  // The basis must be wide enough to cover every downhill-curvature
  // direction at the saddle (their count varies with domain and variant);
  // six columns leave headroom and cost one solve each per refresh round.
  const std::size_t kBasisSize = 6;
  if (climb_basis_.empty()) {
    Field v1 = r;
    v1 *= 1.0 / rn;
    climb_basis_.push_back(std::move(v1));
  }
  if (climb_basis_.size() < kBasisSize) {
    SplitMix64 rng(SplitMix64::derive(0x73616464u, static_cast<std::uint64_t>(sweeps_)));
    for (int guard = 0; climb_basis_.size() < kBasisSize && guard < 32; ++guard) {
      Field v = sample_smooth_field(m_.grid(), rng);
      for (const Field& q : climb_basis_) axpy(-inner_h(q, v), q, v);
      double vn = norm_h(v);
      if (vn <= 1e-10) continue;
      v *= 1.0 / vn;
      climb_basis_.push_back(std::move(v));
    }
  }

  for (int round = 0; round < 2; ++round) {
    std::vector<Field> fresh;
    fresh.reserve(climb_basis_.size());
    for (const Field& v : climb_basis_) {
      Field w = apply_k(v);
      for (const Field& q : fresh) axpy(-inner_h(q, w), q, w);
      double wn = norm_h(w);
      if (wn <= 1e-12) continue;
      w *= 1.0 / wn;
      fresh.push_back(std::move(w));
    }
    if (fresh.empty()) break;
    climb_basis_ = std::move(fresh);
  }

  Field rc = r;
  for (const Field& v : climb_basis_) {
    Field kv = apply_k(v);
    if (inner_h(v, kv) > 1.0) axpy(-2.0 * inner_h(r, v), v, rc);
  }

  // Prefer steps that shrink the residual; fall back to a bounded increase
  // so the vertex can still work its way off curvature plateaus.
  double dtc = std::min(climb_dt_, step_cap_ / rn);
  double fallback_dt = -1.0;
  Field fallback(m_.grid());
  for (int tries = 0; tries < 12; ++tries) {
    Field cand = cur;
    axpy(-dtc, rc, cand);
    double rn2 = norm_h(gradient_h(m_, cand));
    if (rn2 < rn) {
      next[static_cast<std::size_t>(idx)] = std::move(cand);
      climb_dt_ = std::min(dtc * 1.3, fp_.dt);
      return;
    }
    if (fallback_dt < 0.0 && rn2 <= 1.5 * rn) {
      fallback_dt = dtc;
      fallback = cand;
    }
    dtc *= 0.5;
  }
  if (fallback_dt >= 0.0) {
    next[static_cast<std::size_t>(idx)] = std::move(fallback);
    climb_dt_ = std::max(0.5 * fallback_dt, 1e-9);
    return;
  }
  climb_dt_ = std::max(0.5 * dtc, 1e-9);
}

void SurfaceSolver::refine_fan(int idx) {
  const int cap = s_.base_level + opt_.refine_cap_extra;
  std::map<std::pair<int, int>, int> midpoint_of;
  const bool quarter = s_.variant == SurfaceVariant::gamma_s_doubleprime;
  auto midpoint = [&](int a, int b) {
    std::pair<int, int> key = std::minmax(a, b);
    auto it = midpoint_of.find(key);
    if (it != midpoint_of.end()) return it->second;
    MidVertex mv = midpoint_vertex(s_.xs[a], s_.ys[a], s_.xs[b], s_.ys[b], s_.R, quarter);
    int vi = static_cast<int>(s_.xs.size());
    s_.xs.push_back(mv.x);
    s_.ys.push_back(mv.y);
    s_.tags.push_back(mv.tag);
    Field img = [&] {
      bool frozen_tag = mv.tag == VertexTag::arc || mv.tag == VertexTag::origin ||
                        (s_.variant == SurfaceVariant::gamma_s &&
                         (mv.tag == VertexTag::leg1 || mv.tag == VertexTag::leg2));
      if (frozen_tag) return embed_image(s_, mv.x, mv.y);
      Field avg = 0.5 * s_.images[static_cast<std::size_t>(a)];
      axpy(0.5, s_.images[static_cast<std::size_t>(b)], avg);
      if (mv.tag == VertexTag::leg1) return positive_part(avg);
      if (mv.tag == VertexTag::leg2) return negative_part(avg);
      return avg;
    }();
    s_.images.push_back(std::move(img));
    energies_.push_back(safe_energy(m_, s_.images.back()));
    midpoint_of.emplace(key, vi);
    return vi;
  };

  std::vector<std::array<int, 3>> kept;
  std::vector<int> kept_levels;
  std::vector<std::array<int, 3>> added;
  std::vector<int> added_levels;
  bool any = false;
  for (std::size_t t = 0; t < s_.triangles.size(); ++t) {
    const auto& tri = s_.triangles[t];
    bool incident = tri[0] == idx || tri[1] == idx || tri[2] == idx;
    if (!incident || s_.tri_level[t] >= cap) {
      kept.push_back(tri);
      kept_levels.push_back(s_.tri_level[t]);
      continue;
    }
    any = true;
    int ab = midpoint(tri[0], tri[1]);
    int bc = midpoint(tri[1], tri[2]);
    int ca = midpoint(tri[2], tri[0]);
    int lvl = s_.tri_level[t] + 1;
    added.push_back({tri[0], ab, ca});
    added.push_back({ab, tri[1], bc});
    added.push_back({ca, bc, tri[2]});
    added.push_back({ab, bc, ca});
    added_levels.insert(added_levels.end(), 4, lvl);
  }
  if (!any) return;
  kept.insert(kept.end(), added.begin(), added.end());
  kept_levels.insert(kept_levels.end(), added_levels.begin(), added_levels.end());
  s_.triangles = std::move(kept);
  s_.tri_level = std::move(kept_levels);
}

void SurfaceSolver::sweep() {
  if (swallowed_ || linking_failed_) return;
  const std::size_t N = s_.images.size();
  const int climb = max_index_;
  std::vector<Field> next = s_.images;
  for (std::size_t i = 0; i < N; ++i) {
    VertexTag tag = s_.tags[i];
    bool frozen_tag = tag == VertexTag::arc || tag == VertexTag::origin ||
                      (s_.variant == SurfaceVariant::gamma_s &&
                       (tag == VertexTag::leg1 || tag == VertexTag::leg2));
    if (frozen_tag || frozen_low(static_cast<int>(i))) continue;
    if (static_cast<int>(i) == climb) continue;
    Field img = capped_descent(m_, s_.images[i], fp_, step_cap_);
    if (tag == VertexTag::leg1)
      img = positive_part(img);
    else if (tag == VertexTag::leg2)
      img = negative_part(img);
    next[i] = std::move(img);
  }
  if (climb >= 0) {
    VertexTag tag = s_.tags[static_cast<std::size_t>(climb)];
    if (tag == VertexTag::interior && !frozen_low(climb)) climb_step(climb, next);
  }
  s_.images = std::move(next);

  for (std::size_t i = 0; i < s_.images.size(); ++i)
    energies_[i] = safe_energy(m_, s_.images[i]);
  scan_excluded();
  ++sweeps_;
  if (swallowed_) {
    trace_.push_back({sweeps_, sup_level_, max_residual_, excluded_count_});
    return;
  }

  // Refine the fan when the one-ring of the maximizer holds no live excluded
  // vertex: every neighbor has either been absorbed into the cone set, is
  // pinned by its tag, or has run off below the energy floor.  In all three
  // cases the discrete sup near the maximizer is under-resolved.
  bool has_neighbor = false, ring_in_w = true;
  for (const auto& tri : s_.triangles) {
    if (tri[0] != max_index_ && tri[1] != max_index_ && tri[2] != max_index_) continue;
    for (int v : tri) {
      if (v == max_index_) continue;
      has_neighbor = true;
      bool movable = s_.tags[static_cast<std::size_t>(v)] == VertexTag::interior &&
                     !frozen_low(v);
      if (movable && excluded_[static_cast<std::size_t>(v)]) ring_in_w = false;
    }
  }
  if (has_neighbor && ring_in_w) {
    refine_fan(max_index_);
    scan_excluded();
  }

  trace_.push_back({sweeps_, sup_level_, max_residual_, excluded_count_});
  sup_window_.push_back(sup_level_);
  if (sup_window_.size() > static_cast<std::size_t>(opt_.stability_window))
    sup_window_.erase(sup_window_.begin());
  if (sup_window_.size() == static_cast<std::size_t>(opt_.stability_window) &&
      max_residual_ <= fp_.residual_tol &&
      classify_field(s_.images[static_cast<std::size_t>(max_index_)]) ==
          Classification::sign_changing) {
    auto [mn, mx] = std::minmax_element(sup_window_.begin(), sup_window_.end());
    if (*mx - *mn <= opt_.stability_tol) converged_ = true;
  }

  if (opt_.linking_rho > 0.0 && sweeps_ % 100 == 0) {
    LinkingResult lr = verify_linking(s_, opt_.linking_rho, cp_, m_);
    if (!lr.found) linking_failed_ = true;
  }
}

CriticalPointReport SurfaceSolver::run(int max_sweeps) {
  for (int i = 0; i < max_sweeps && !converged_ && !swallowed_ && !linking_failed_; ++i)
    sweep();
  const std::size_t pick =
      max_index_ >= 0 ? static_cast<std::size_t>(max_index_) : std::size_t{0};
  CriticalPointReport rep(s_.images[pick]);
  rep.level = sup_level_;
  rep.residual = max_residual_;
  rep.classification = max_index_ >= 0 ? classify_field(rep.field) : Classification::trivial;
  rep.iterations = sweeps_;
  rep.converged = converged_;
  rep.swallowed = swallowed_;
  rep.linking_failed = linking_failed_;
  rep.trace = trace_;
  return rep;
}

CriticalPointReport sign_changing_solve(const EnergyModel& m, SurfaceVariant variant,
                                        const FlowParams& fp, const ConeParams& cp,
                                        int mesh_level) {
  fp.validate();
  auto basis = [&]() -> std::pair<Field, Field> {
    if (variant == SurfaceVariant::gamma_s_doubleprime) return disjoint_bumps(m.grid());
    auto eig = eigenpairs(m.grid(), 2);
    return {eig[0].vec, eig[1].vec};
  }();
  const double angle = variant == SurfaceVariant::gamma_s_doubleprime
                           ? 0.5 * std::numbers::pi
                           : std::numbers::pi;
  const double R = choose_r_arc(m, basis.first, basis.second, angle);
  AlphaRho ar = estimate_alpha_rho(m);
  Surface s = make_initial_surface(variant, mesh_level, R, basis.first, basis.second);
  SurfaceSolverOptions opt;
  opt.linking_rho = std::min(ar.rho, 0.5 * R);
  SurfaceSolver solver(m, std::move(s), fp, cp, opt);
  return solver.run(fp.max_steps);
}

std::pair<Field, Field> disjoint_bumps(const Grid& g) {
  if (g.n() < 7) throw std::invalid_argument("n: must be >= 7 for disjoint bumps");
  auto hat = [](double x, double c, double w) {
    double t = (x - c) / w;
    double v = 1.0 - t * t;
    return v > 0.0 ? v : 0.0;
  };
  Field a1(g), a2(g);
  const int n = g.n();
  if (g.dimension() == 1) {
    for (int i = 0; i < n; ++i) {
      double x = g.coordinate(i);
      a1[static_cast<std::size_t>(i)] = hat(x, 0.2, 0.2);
      a2[static_cast<std::size_t>(i)] = -hat(x, 0.8, 0.2);
    }
  } else {
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        double x = g.coordinate(c), y = g.coordinate(r);
        std::size_t idx = static_cast<std::size_t>(r) * n + c;
        a1[idx] = hat(x, 0.2, 0.2) * hat(y, 0.5, 0.5);
        a2[idx] = -hat(x, 0.8, 0.2) * hat(y, 0.5, 0.5);
      }
  }
  double n1 = norm_h(a1), n2 = norm_h(a2);
  if (!(n1 > 0.0) || !(n2 > 0.0)) throw SolveError("disjoint_bumps: degenerate bump");
  a1 *= 1.0 / n1;
  a2 *= 1.0 / n2;
  return {std::move(a1), std::move(a2)};
}

}  // namespace signflow
