#include "signflow/nonlinearity.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace signflow {

Nonlinearity Nonlinearity::odd_power(double p) {
  if (!(p > 2.0)) throw std::invalid_argument("p: must be > 2");
  Nonlinearity nl;
  nl.kind_ = NonlinearityKind::odd_power;
  nl.p_ = p;
  nl.mu_ = p;
  return nl;
}

Nonlinearity Nonlinearity::custom(double p, double mu, std::function<double(double)> f,
                                  std::function<double(double)> F, bool ar_exempt) {
  if (!(p > 2.0)) throw std::invalid_argument("p: must be > 2");
  if (!(mu > 2.0)) throw std::invalid_argument("mu: must be > 2");
  if (!f || !F) throw std::invalid_argument("f, F: must be callable");
  if (f(0.0) != 0.0) throw std::invalid_argument("f: f(0) must be 0");
  if (F(0.0) != 0.0) throw std::invalid_argument("F: F(0) must be 0");
  Nonlinearity nl;
  nl.kind_ = NonlinearityKind::custom;
  nl.p_ = p;
  nl.mu_ = mu;
  nl.ar_exempt_ = ar_exempt;
  nl.f_ = std::move(f);
  nl.F_ = std::move(F);
  return nl;
}

double Nonlinearity::f(double u) const {
  if (kind_ == NonlinearityKind::odd_power) {
    if (p_ == 4.0) return u * u * u;
    if (u == 0.0) return 0.0;
    return std::pow(std::abs(u), p_ - 2.0) * u;
  }
  return f_(u);
}

double Nonlinearity::F(double u) const {
  if (kind_ == NonlinearityKind::odd_power) {
    if (p_ == 4.0) {
      double q = u * u;
      return 0.25 * q * q;
    }
    return std::pow(std::abs(u), p_) / p_;
  }
  return F_(u);
}

ArReport validate_ar(const Nonlinearity& nl, int sample_count, double range) {
  if (sample_count < 100) throw std::invalid_argument("sample_count: must be >= 100");
  if (!(range > 1e-6)) throw std::invalid_argument("range: must be > 1e-6");

  ArReport rep;
  rep.superlinearity_ok = true;
  rep.positivity_ok = true;
  rep.worst_margin = std::numeric_limits<double>::infinity();

  const int per_sign = sample_count / 2;
  const double lo = std::log(1e-6);
  const double hi = std::log(range);
  for (int sgn = 0; sgn < 2; ++sgn) {
    for (int i = 0; i < per_sign; ++i) {
      double t = per_sign == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(per_sign - 1);
      double mag = std::exp(lo + t * (hi - lo));
      double u = sgn == 0 ? mag : -mag;
      double uf = u * nl.f(u);
      double Fv = nl.F(u);
      double margin = uf - nl.mu() * Fv;
      // Absorb last-ulp rounding in borderline (equality) cases.
      double slack = 1e-12 * std::abs(uf);
      if (margin + slack < 0.0) rep.superlinearity_ok = false;
      if (margin < rep.worst_margin) {
        rep.worst_margin = margin;
        rep.worst_u = u;
      }
      if (!(Fv > 0.0)) rep.positivity_ok = false;
    }
  }
  rep.near_zero_ratio = std::abs(nl.f(1e-6)) / 1e-6;
  rep.near_zero_ok = rep.near_zero_ratio < 1e-3;
  rep.pass = rep.superlinearity_ok && rep.positivity_ok && rep.near_zero_ok;
  return rep;
}

}  // namespace signflow
