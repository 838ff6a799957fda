#pragma once

#include <functional>

#include "signflow/errors.hpp"

namespace signflow {

enum class NonlinearityKind { odd_power, custom };

// Pointwise reaction term f with primitive F (F(0) = 0), growth exponent p
// and superlinearity constant mu.  The built-in odd power family is
// f(u) = |u|^(p-2) u, F(u) = |u|^p / p with mu = p (equality in the
// superlinearity inequality).  Custom terms supply their own f and F; the
// ar_exempt flag marks terms (e.g. linear comparison operators used by
// tests) that deliberately skip the superlinearity screen in run pipelines.
class Nonlinearity {
 public:
  static Nonlinearity odd_power(double p);
  static Nonlinearity custom(double p, double mu, std::function<double(double)> f,
                             std::function<double(double)> F, bool ar_exempt = false);

  NonlinearityKind kind() const { return kind_; }
  double p() const { return p_; }
  double mu() const { return mu_; }
  bool ar_exempt() const { return ar_exempt_; }

  double f(double u) const;
  double F(double u) const;

 private:
  Nonlinearity() = default;
  NonlinearityKind kind_ = NonlinearityKind::odd_power;
  double p_ = 4.0;
  double mu_ = 4.0;
  bool ar_exempt_ = false;
  std::function<double(double)> f_;
  std::function<double(double)> F_;
};

// Deterministic screen for the structural conditions on f: superlinearity
// mu*F(u) <= u*f(u), positivity of F away from zero, and a small ratio
// |f(u)|/|u| at |u| = 1e-6.  Magnitudes are sampled on a log-spaced grid over
// [1e-6, range] with both signs.  The report carries the worst witness.
struct ArReport {
  bool pass = false;
  bool superlinearity_ok = false;
  bool positivity_ok = false;
  bool near_zero_ok = false;
  double worst_u = 0.0;        // sample minimizing u*f(u) - mu*F(u)
  double worst_margin = 0.0;   // that minimum (negative on failure)
  double near_zero_ratio = 0.0;
};

ArReport validate_ar(const Nonlinearity& nl, int sample_count, double range);

}  // namespace signflow
