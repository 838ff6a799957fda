#include "signflow/energy.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace signflow {

EnergyModel::EnergyModel(const Grid& grid, Nonlinearity nl, double poisson_tol)
    : grid_(grid), nl_(std::move(nl)), poisson_tol_(poisson_tol) {
  if (!(poisson_tol > 0.0) || poisson_tol > 1e-6)
    throw std::invalid_argument("poisson_tol: must be in (0, 1e-6]");
}

namespace {
void require_on_grid(const EnergyModel& m, const Field& u, const char* where) {
  if (!(u.grid() == m.grid()))
    throw GridMismatchError(std::string(where) + ": field does not match the model grid");
}
}  // namespace

double energy(const EnergyModel& m, const Field& u) {
  require_on_grid(m, u, "energy");
  double quad = 0.5 * inner_h(u, u);
  double pot = 0.0;
  for (double v : u.values()) pot += m.nl().F(v);
  double val = quad - m.grid().cell_measure() * pot;
  if (!std::isfinite(val)) throw std::overflow_error("energy: value is not finite");
  return val;
}

Field operator_a(const EnergyModel& m, const Field& u) {
  require_on_grid(m, u, "operator_a");
  Field rhs(m.grid());
  auto uv = u.values();
  auto rv = rhs.values();
  for (std::size_t i = 0; i < uv.size(); ++i) rv[i] = m.nl().f(uv[i]);
  return solve_poisson(m.grid(), rhs, m.poisson_tol());
}

Field gradient_h(const EnergyModel& m, const Field& u) {
  Field g = u;
  g -= operator_a(m, u);
  return g;
}

double directional_derivative(const EnergyModel& m, const Field& u, const Field& w) {
  require_same_grid(u, w, "directional_derivative");
  double pairing = inner_h(u, w);
  double fw = 0.0;
  auto uv = u.values();
  auto wv = w.values();
  for (std::size_t i = 0; i < uv.size(); ++i) fw += m.nl().f(uv[i]) * wv[i];
  return pairing - m.grid().cell_measure() * fw;
}

std::pair<double, double> lemma_a_identity(const EnergyModel& m, const Field& u) {
  Field w = gradient_h(m, u);
  double lhs = directional_derivative(m, u, w);
  double rhs_norm = norm_h(w);
  return {lhs, rhs_norm * rhs_norm};
}

}  // namespace signflow
