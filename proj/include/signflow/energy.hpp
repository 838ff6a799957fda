#pragma once

#include <utility>

#include "signflow/grid.hpp"
#include "signflow/nonlinearity.hpp"

namespace signflow {

// Bundles the grid, the reaction term, and the relative tolerance used for
// every inverse-stencil solve.  Immutable after construction.
class EnergyModel {
 public:
  EnergyModel(const Grid& grid, Nonlinearity nl, double poisson_tol = 1e-10);
  const Grid& grid() const { return grid_; }
  const Nonlinearity& nl() const { return nl_; }
  double poisson_tol() const { return poisson_tol_; }

 private:
  Grid grid_;
  Nonlinearity nl_;
  double poisson_tol_;
};

// I(u) = 1/2 (u,u)_H - h^d * sum F(u_i).  Throws std::overflow_error when the
// value is not finite.
double energy(const EnergyModel& m, const Field& u);

// v solving (stencil) v = f(u) nodewise, at the model's solve tolerance.
Field operator_a(const EnergyModel& m, const Field& u);

// Steepest-ascent representative of the derivative of I in the H inner
// product: u - operator_a(u).  Its H-norm is the criticality residual.
Field gradient_h(const EnergyModel& m, const Field& u);

// Exact pairing of the derivative of I with a direction w:
// (u,w)_H - h^d * sum f(u_i) w_i.  No solve involved.
double directional_derivative(const EnergyModel& m, const Field& u, const Field& w);

// Evaluates both sides of the identity stating that the derivative of I paired
// with u - A(u) equals the squared H-norm of u - A(u).  Returns (lhs, rhs);
// the two agree up to the solve tolerance.
std::pair<double, double> lemma_a_identity(const EnergyModel& m, const Field& u);

}  // namespace signflow
