#include "signflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

namespace signflow {

namespace {

constexpr double kPi = std::numbers::pi;

// Discrete sine basis for n interior nodes: q[j*n + k] = sin((j+1)(k+1)*pi*h).
// Q is symmetric and Q*Q = ((n+1)/2) * I, so Q/sqrt((n+1)/2) is orthogonal.
// The 1D stencil eigenvalues are lambda_k = (4/h^2) sin^2((k+1)*pi*h/2).
struct SineBasis {
  int n = 0;
  std::vector<double> q;       // n*n, symmetric
  std::vector<double> lambda;  // n
};

const SineBasis& basis_for(int n) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<SineBasis>> cache;
  std::scoped_lock lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return *it->second;

  auto b = std::make_unique<SineBasis>();
  b->n = n;
  b->q.resize(static_cast<std::size_t>(n) * n);
  b->lambda.resize(n);
  const int period = 2 * (n + 1);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      // Reduce (j+1)(k+1) mod 2(n+1) in integers first so the sine argument
      // stays below 2*pi and the entries are accurate to the last ulp.
      long long r = (static_cast<long long>(j + 1) * (k + 1)) % period;
      b->q[static_cast<std::size_t>(j) * n + k] =
          std::sin(kPi * static_cast<double>(r) / static_cast<double>(n + 1));
    }
  }
  const double np1 = static_cast<double>(n + 1);
  for (int k = 0; k < n; ++k) {
    double s = std::sin(0.5 * kPi * static_cast<double>(k + 1) / np1);
    b->lambda[k] = 4.0 * np1 * np1 * s * s;
  }
  const SineBasis& ref = *b;
  cache.emplace(n, std::move(b));
  return ref;
}

// out = Q * in (1D transform, n-vector).
void transform_1d(const SineBasis& b, const double* in, double* out) {
  const int n = b.n;
  for (int k = 0; k < n; ++k) {
    double acc = 0.0;
    const double* row = b.q.data() + static_cast<std::size_t>(k) * n;
    for (int j = 0; j < n; ++j) acc += row[j] * in[j];
    out[k] = acc;
  }
}

// out = Q * in viewed as an n x n matrix product: out[k][c] = sum_r q[k][r] in[r][c].
void transform_rows(const SineBasis& b, const double* in, double* out) {
  const int n = b.n;
  for (int k = 0; k < n; ++k) {
    double* dst = out + static_cast<std::size_t>(k) * n;
    std::fill(dst, dst + n, 0.0);
    const double* qrow = b.q.data() + static_cast<std::size_t>(k) * n;
    for (int r = 0; r < n; ++r) {
      const double w = qrow[r];
      const double* src = in + static_cast<std::size_t>(r) * n;
      for (int c = 0; c < n; ++c) dst[c] += w * src[c];
    }
  }
}

// out[r][l] = sum_c in[r][c] q[l][c]  (transform along the second index).
void transform_cols(const SineBasis& b, const double* in, double* out) {
  const int n = b.n;
  for (int r = 0; r < n; ++r) {
    const double* src = in + static_cast<std::size_t>(r) * n;
    double* dst = out + static_cast<std::size_t>(r) * n;
    for (int l = 0; l < n; ++l) {
      double acc = 0.0;
      const double* qrow = b.q.data() + static_cast<std::size_t>(l) * n;
      for (int c = 0; c < n; ++c) acc += qrow[c] * src[c];
      dst[l] = acc;
    }
  }
}

// Direct solve of L v = rhs (or (L - shift) v = rhs) in the sine basis.
std::vector<double> dst_solve(const Grid& g, const std::vector<double>& rhs, double shift) {
  const int n = g.n();
  const SineBasis& b = basis_for(n);
  const double scale1d = 2.0 / static_cast<double>(n + 1);
  if (g.dimension() == 1) {
    std::vector<double> hat(n), out(n);
    transform_1d(b, rhs.data(), hat.data());
    for (int k = 0; k < n; ++k) {
      double den = b.lambda[k] - shift;
      if (std::abs(den) < 1e-300) den = (den >= 0.0 ? 1e-300 : -1e-300);
      hat[k] /= den;
    }
    transform_1d(b, hat.data(), out.data());
    for (double& v : out) v *= scale1d;
    return out;
  }
  const std::size_t m = rhs.size();
  std::vector<double> t1(m), t2(m);
  transform_rows(b, rhs.data(), t1.data());
  transform_cols(b, t1.data(), t2.data());
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      double den = b.lambda[k] + b.lambda[l] - shift;
      if (std::abs(den) < 1e-300) den = (den >= 0.0 ? 1e-300 : -1e-300);
      t2[static_cast<std::size_t>(k) * n + l] /= den;
    }
  }
  transform_rows(b, t2.data(), t1.data());
  transform_cols(b, t1.data(), t2.data());
  const double scale = scale1d * scale1d;
  for (double& v : t2) v *= scale;
  return t2;
}

void stencil_apply(const Grid& g, const double* u, double* out) {
  const int n = g.n();
  const double np1 = static_cast<double>(n + 1);
  const double inv_h2 = np1 * np1;
  if (g.dimension() == 1) {
    for (int i = 0; i < n; ++i) {
      double left = (i > 0) ? u[i - 1] : 0.0;
      double right = (i + 1 < n) ? u[i + 1] : 0.0;
      out[i] = (2.0 * u[i] - left - right) * inv_h2;
    }
    return;
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const std::size_t idx = static_cast<std::size_t>(r) * n + c;
      double down = (r > 0) ? u[idx - n] : 0.0;
      double up = (r + 1 < n) ? u[idx + n] : 0.0;
      double left = (c > 0) ? u[idx - 1] : 0.0;
      double right = (c + 1 < n) ? u[idx + 1] : 0.0;
      out[idx] = (4.0 * u[idx] - down - up - left - right) * inv_h2;
    }
  }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double euclid_norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace

Grid::Grid(int dimension, int n) : dimension_(dimension), n_(n) {
  if (dimension != 1 && dimension != 2)
    throw std::invalid_argument("dimension: must be 1 or 2");
  if (n < 3) throw std::invalid_argument("n: must be >= 3");
}

double Grid::cell_measure() const {
  double h1 = h();
  return dimension_ == 1 ? h1 : h1 * h1;
}

std::size_t Grid::node_count() const {
  std::size_t m = static_cast<std::size_t>(n_);
  return dimension_ == 1 ? m : m * m;
}

Field::Field(const Grid& grid) : grid_(grid), values_(grid.node_count(), 0.0) {}

Field::Field(const Grid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid.node_count())
    throw std::invalid_argument("field: value count does not match grid");
}

Field& Field::operator+=(const Field& o) {
  require_same_grid(*this, o, "field +=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}

Field& Field::operator-=(const Field& o) {
  require_same_grid(*this, o, "field -=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
  return *this;
}

Field& Field::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator-(Field a) { return a *= -1.0; }
Field operator*(double s, Field a) { return a *= s; }

void axpy(double a, const Field& x, Field& y) {
  require_same_grid(x, y, "axpy");
  auto xv = x.values();
  auto yv = y.values();
  for (std::size_t i = 0; i < xv.size(); ++i) yv[i] += a * xv[i];
}

void require_same_grid(const Field& a, const Field& b, const char* where) {
  if (!(a.grid() == b.grid()))
    throw GridMismatchError(std::string(where) + ": fields live on different grids");
}

Field laplacian_apply(const Grid& grid, const Field& u) {
  if (!(u.grid() == grid))
    throw GridMismatchError("laplacian_apply: field does not match grid");
  Field out(grid);
  stencil_apply(grid, u.values().data(), out.values().data());
  return out;
}

Field solve_poisson(const Grid& grid, const Field& rhs, double tol) {
  if (!(rhs.grid() == grid))
    throw GridMismatchError("solve_poisson: field does not match grid");
  if (!(tol > 0.0)) throw std::invalid_argument("tol: must be > 0");

  const std::size_t m = grid.node_count();
  std::vector<double> b(rhs.values().begin(), rhs.values().end());
  const double bnorm = euclid_norm(b);
  if (bnorm == 0.0) return Field(grid);

  std::vector<double> x = dst_solve(grid, b, 0.0);

  // Certify the residual; fall through to conjugate-gradient refinement when
  // the direct candidate is not already inside the tolerance.
  std::vector<double> lx(m), r(m);
  stencil_apply(grid, x.data(), lx.data());
  for (std::size_t i = 0; i < m; ++i) r[i] = b[i] - lx[i];
  double rnorm = euclid_norm(r);
  const double target = tol * bnorm;
  if (rnorm <= target) return Field(grid, std::move(x));

  std::vector<double> p = r, ap(m);
  double rr = dot(r, r);
  const std::size_t cap = 10 * m;
  for (std::size_t it = 0; it < cap; ++it) {
    stencil_apply(grid, p.data(), ap.data());
    double pap = dot(p, ap);
    if (pap <= 0.0) break;  // numerically lost positive-definiteness: stop
    double alpha = rr / pap;
    for (std::size_t i = 0; i < m; ++i) x[i] += alpha * p[i];
    for (std::size_t i = 0; i < m; ++i) r[i] -= alpha * ap[i];
    double rr_next = dot(r, r);
    // Recompute the true residual periodically and at candidate exit so the
    // certificate never relies on the recursively updated vector alone.
    if (rr_next <= target * target || (it & 63u) == 63u) {
      stencil_apply(grid, x.data(), lx.data());
      for (std::size_t i = 0; i < m; ++i) r[i] = b[i] - lx[i];
      rr_next = dot(r, r);
      if (std::sqrt(rr_next) <= target) return Field(grid, std::move(x));
      p = r;
      rr = rr_next;
      continue;
    }
    double beta = rr_next / rr;
    for (std::size_t i = 0; i < m; ++i) p[i] = r[i] + beta * p[i];
    rr = rr_next;
  }
  stencil_apply(grid, x.data(), lx.data());
  for (std::size_t i = 0; i < m; ++i) r[i] = b[i] - lx[i];
  if (euclid_norm(r) <= target) return Field(grid, std::move(x));
  throw SolveError("solve_poisson: no convergence within 10*m iterations");
}

double inner_h(const Field& u, const Field& v) {
  require_same_grid(u, v, "inner_h");
  Field lv = laplacian_apply(u.grid(), v);
  double acc = 0.0;
  auto uv = u.values();
  auto lvv = lv.values();
  for (std::size_t i = 0; i < uv.size(); ++i) acc += uv[i] * lvv[i];
  return u.grid().cell_measure() * acc;
}

double norm_h(const Field& u) {
  double q = inner_h(u, u);
  return std::sqrt(std::max(q, 0.0));
}

double inner_l2(const Field& u, const Field& v) {
  require_same_grid(u, v, "inner_l2");
  double acc = 0.0;
  auto uv = u.values();
  auto vv = v.values();
  for (std::size_t i = 0; i < uv.size(); ++i) acc += uv[i] * vv[i];
  return u.grid().cell_measure() * acc;
}

double norm_l2(const Field& u) { return std::sqrt(std::max(inner_l2(u, u), 0.0)); }

double norm_lp(const Field& u, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("p: must be >= 1 for norm_lp");
  double acc = 0.0;
  for (double v : u.values()) acc += std::pow(std::abs(v), p);
  return std::pow(u.grid().cell_measure() * acc, 1.0 / p);
}

namespace {

// Mass-orthogonalize v against the given unit vectors (plain Euclidean dot,
// which is the right orthogonality for the symmetric stencil matrix).
void deflate(std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& e : basis) {
      double c = dot(v, e);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * e[i];
    }
  }
}

void normalize_euclid(std::vector<double>& v) {
  double nrm = euclid_norm(v);
  if (nrm == 0.0) throw SolveError("eigenpairs: degenerate iterate");
  for (double& x : v) x /= nrm;
}

}  // namespace

std::vector<Eigenpair> eigenpairs(const Grid& grid, int k) {
  if (k < 1 || k > 4) throw std::invalid_argument("k: must be in [1, 4]");
  const std::size_t m = grid.node_count();

  // Shifted inverse iteration with deflation.  The plain (shift 0) sweep
  // brings the Rayleigh quotient close; one shifted solve at the Rayleigh
  // value then pushes the residual to the floor.
  std::vector<std::vector<double>> vecs;
  std::vector<double> lambdas;
  for (int j = 0; j < k; ++j) {
    SplitMix64 rng(SplitMix64::derive(0x5ba51f00dull, static_cast<std::uint64_t>(j) +
                                                          17u * static_cast<std::uint64_t>(grid.n()) +
                                                          1315u * static_cast<std::uint64_t>(grid.dimension())));
    std::vector<double> v(m);
    for (double& x : v) x = rng.normal();
    deflate(v, vecs);
    normalize_euclid(v);

    double lam = 0.0;
    bool converged = false;
    std::vector<double> lv(m);
    for (int it = 0; it < 500; ++it) {
      std::vector<double> w = dst_solve(grid, v, 0.0);
      deflate(w, vecs);
      normalize_euclid(w);
      stencil_apply(grid, w.data(), lv.data());
      lam = dot(w, lv);
      double res = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        double d = lv[i] - lam * w[i];
        res += d * d;
      }
      v = std::move(w);
      if (std::sqrt(res) <= 1e-11 * std::max(1.0, lam)) {
        converged = true;
        break;
      }
    }
    if (!converged) throw SolveError("eigenpairs: inverse iteration did not converge");
    // One shifted step at the Rayleigh value sharpens the pair.
    std::vector<double> w = dst_solve(grid, v, lam * (1.0 - 1e-10));
    deflate(w, vecs);
    double wn = euclid_norm(w);
    if (wn > 0.0) {
      for (double& x : w) x /= wn;
      stencil_apply(grid, w.data(), lv.data());
      double lam2 = dot(w, lv);
      double res = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        double d = lv[i] - lam2 * w[i];
        res += d * d;
      }
      if (std::sqrt(res) <= 1e-11 * std::max(1.0, lam2)) {
        v = std::move(w);
        lam = lam2;
      }
    }
    vecs.push_back(std::move(v));
    lambdas.push_back(lam);
  }

  // Ascending order (inverse iteration with deflation already produces it,
  // but sort defensively on the computed values).
  std::vector<int> order(k);
  for (int i = 0; i < k; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return lambdas[a] < lambdas[b]; });

  std::vector<std::vector<double>> sorted_vecs;
  std::vector<double> sorted_lams;
  for (int i = 0; i < k; ++i) {
    sorted_vecs.push_back(std::move(vecs[order[i]]));
    sorted_lams.push_back(lambdas[order[i]]);
  }

  // Resolve degenerate clusters deterministically.  On the square the second
  // eigenvalue is doubly degenerate; inside that eigenspace the returned
  // second vector is the (normalized) projection of the nodal template
  // sin(2*pi*x)*sin(pi*y), which maximizes the mass product with it.
  if (grid.dimension() == 2) {
    const int n = grid.n();
    int c0 = 1;
    while (c0 < k) {
      int c1 = c0;
      while (c1 + 1 < k &&
             std::abs(sorted_lams[c1 + 1] - sorted_lams[c0]) <=
                 1e-6 * std::max(1.0, sorted_lams[c0]))
        ++c1;
      if (c1 > c0 && c0 == 1) {
        std::vector<double> tmpl(m);
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < n; ++c)
            tmpl[static_cast<std::size_t>(r) * n + c] =
                std::sin(2.0 * kPi * grid.coordinate(c)) * std::sin(kPi * grid.coordinate(r));
        std::vector<double> proj(m, 0.0);
        for (int i = c0; i <= c1; ++i) {
          double coef = dot(sorted_vecs[i], tmpl);
          for (std::size_t s = 0; s < m; ++s) proj[s] += coef * sorted_vecs[i][s];
        }
        if (euclid_norm(proj) > 1e-8) {
          normalize_euclid(proj);
          // Re-span the cluster: proj first, remaining vectors re-orthogonalized.
          std::vector<std::vector<double>> rest;
          for (int i = c0; i <= c1; ++i) rest.push_back(std::move(sorted_vecs[i]));
          sorted_vecs[c0] = proj;
          int slot = c0 + 1;
          std::vector<std::vector<double>> placed = {proj};
          for (auto& r : rest) {
            deflate(r, placed);
            if (euclid_norm(r) < 1e-8) continue;
            normalize_euclid(r);
            placed.push_back(r);
            if (slot <= c1) sorted_vecs[slot++] = std::move(r);
          }
        }
      }
      c0 = c1 + 1;
    }
  }

  std::vector<Eigenpair> out;
  for (int i = 0; i < k; ++i) {
    Field e(grid, std::move(sorted_vecs[i]));
    // Deterministic sign: first vector all-positive; on the square the second
    // is positive at the node nearest (1/4, 1/2); otherwise the node of
    // largest magnitude (lowest index on ties) is made positive.
    auto vals = e.values();
    double pick = 0.0;
    if (i == 0) {
      double s = 0.0;
      for (double v : vals) s += v;
      pick = s;
    } else if (i == 1 && grid.dimension() == 2) {
      const int n = grid.n();
      int c = std::clamp(static_cast<int>(std::lround(0.25 * (n + 1))) - 1, 0, n - 1);
      int r = std::clamp(static_cast<int>(std::lround(0.5 * (n + 1))) - 1, 0, n - 1);
      pick = vals[static_cast<std::size_t>(r) * n + c];
    } else {
      std::size_t arg = 0;
      for (std::size_t s = 1; s < vals.size(); ++s)
        if (std::abs(vals[s]) > std::abs(vals[arg])) arg = s;
      pick = vals[arg];
    }
    if (pick < 0.0)
      for (double& v : vals) v = -v;
    double nh = norm_h(e);
    if (!(nh > 0.0)) throw SolveError("eigenpairs: zero eigenvector");
    e *= 1.0 / nh;
    if (i == 0) {
      for (double v : e.values())
        if (!(v > 0.0)) throw SolveError("eigenpairs: ground eigenvector not positive");
    }
    out.push_back({sorted_lams[i], std::move(e)});
  }
  return out;
}

Field sample_smooth_field(const Grid& grid, SplitMix64& rng) {
  const int n = grid.n();
  const SineBasis& b = basis_for(n);
  const std::size_t m = grid.node_count();
  std::vector<double> hat(m);
  if (grid.dimension() == 1) {
    for (int kk = 0; kk < n; ++kk) hat[kk] = rng.normal() / b.lambda[kk];
    std::vector<double> out(m);
    transform_1d(b, hat.data(), out.data());
    const double scale = 2.0 / static_cast<double>(n + 1);
    for (double& v : out) v *= scale;
    return Field(grid, std::move(out));
  }
  for (int kk = 0; kk < n; ++kk)
    for (int ll = 0; ll < n; ++ll)
      hat[static_cast<std::size_t>(kk) * n + ll] = rng.normal() / (b.lambda[kk] + b.lambda[ll]);
  std::vector<double> t1(m), out(m);
  transform_rows(b, hat.data(), t1.data());
  transform_cols(b, t1.data(), out.data());
  const double s1 = 2.0 / static_cast<double>(n + 1);
  const double scale = s1 * s1;
  for (double& v : out) v *= scale;
  return Field(grid, std::move(out));
}

}  // namespace signflow
