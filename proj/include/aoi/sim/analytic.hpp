#pragma once

#include <cmath>

#include "aoi/error.hpp"
#include "aoi/time.hpp"

namespace aoi::sim {

/// Steady-state average age of an FCFS M/M/1 queue:
///   (1/mu) (1 + 1/rho + rho^2 / (1 - rho)).
inline Seconds analytic_mm1_age(double rho, double mu) {
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("M/M/1 age needs 0 < rho < 1");
  if (!(mu > 0.0)) throw DomainError("service rate must be positive");
  return Seconds{(1.0 / mu) * (1.0 + 1.0 / rho + rho * rho / (1.0 - rho))};
}

/// Mean sojourn time (1/mu) / (1 - rho).
inline Seconds analytic_mm1_delay(double rho, double mu) {
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("M/M/1 delay needs 0 <= rho < 1");
  return Seconds{(1.0 / mu) / (1.0 - rho)};
}

inline double analytic_mm1_in_system(double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("M/M/1 occupancy needs 0 <= rho < 1");
  return rho / (1.0 - rho);
}

/// Load minimising analytic_mm1_age, by golden-section search (the age is
/// strictly convex in rho on (0, 1)).
inline double mm1_optimal_load() {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 1e-6, hi = 1.0 - 1e-6;
  double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
  auto f = [](double r) { return analytic_mm1_age(r, 1.0).count(); };
  double fa = f(a), fb = f(b);
  while (hi - lo > 1e-12) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - phi * (hi - lo);
      fa = f(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + phi * (hi - lo);
      fb = f(b);
    }
  }
  return (lo + hi) / 2.0;
}

}  // namespace aoi::sim
