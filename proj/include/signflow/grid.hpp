#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "signflow/errors.hpp"
#include "signflow/rng.hpp"

namespace signflow {

// Uniform grid of interior nodes on the unit interval (dimension 1) or the
// unit square (dimension 2) with homogeneous Dirichlet boundary.  Only the
// integers (dimension, n) are stored; the mesh width h = 1/(n+1) and node
// coordinates are derived from them on demand so no floating-point drift can
// accumulate in the geometry.
class Grid {
 public:
  Grid(int dimension, int n);

  int dimension() const { return dimension_; }
  int n() const { return n_; }

  double h() const { return 1.0 / static_cast<double>(n_ + 1); }

  // h^d, the quadrature weight of one node.
  double cell_measure() const;

  std::size_t node_count() const;

  // Coordinate of interior node i along one axis, i in [0, n).
  double coordinate(int i) const {
    return static_cast<double>(i + 1) / static_cast<double>(n_ + 1);
  }

  bool operator==(const Grid&) const = default;

 private:
  int dimension_;
  int n_;
};

// Nodal values on a grid.  2D fields are stored row-major: index = r*n + c
// where r walks the y axis and c the x axis.
class Field {
 public:
  explicit Field(const Grid& grid);
  Field(const Grid& grid, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(double s);

 private:
  Grid grid_;
  std::vector<double> values_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator-(Field a);
Field operator*(double s, Field a);

// y += a*x
void axpy(double a, const Field& x, Field& y);

void require_same_grid(const Field& a, const Field& b, const char* where);

// Five-point (three-point in 1D) Dirichlet Laplacian, scaled by 1/h^2; acts
// like the negative continuum Laplacian on interior nodes.
Field laplacian_apply(const Grid& grid, const Field& u);

// Solves L v = rhs to a relative residual ||L v - rhs||_2 <= tol * ||rhs||_2.
// A sine-basis direct solve supplies the candidate and a conjugate-gradient
// polish certifies (and if necessary finishes) the residual bound; the polish
// is capped at 10*m iterations and failure to certify raises SolveError.
Field solve_poisson(const Grid& grid, const Field& rhs, double tol);

// Energy inner product (u, v)_H = h^d * u^T L v and its norm.
double inner_h(const Field& u, const Field& v);
double norm_h(const Field& u);

// Mass inner product (u, v)_2 = h^d * sum(u_i v_i).
double inner_l2(const Field& u, const Field& v);
double norm_l2(const Field& u);

// Discrete p-norm |u|_p = (h^d * sum |u_i|^p)^(1/p), p >= 1.
double norm_lp(const Field& u, double p);

struct Eigenpair {
  double lambda;
  Field vec;
};

// The k smallest Dirichlet eigenpairs (k <= 4), ascending, each normalized to
// norm_h = 1.  The first eigenvector is strictly positive.  On the square the
// degenerate second pair is resolved deterministically: the returned second
// eigenvector maximizes its mass-product with the template sin(2*pi*x)*sin(pi*y)
// and has a positive value at the node nearest (1/4, 1/2).
std::vector<Eigenpair> eigenpairs(const Grid& grid, int k);

// Random field with a smooth bias: independent normal coefficients on the sine
// basis, damped by 1/lambda_k.  Consumes a fixed number of draws from rng.
// Used by the samplers (embedding estimate, cone probes, band sampling).
Field sample_smooth_field(const Grid& grid, SplitMix64& rng);

}  // namespace signflow
