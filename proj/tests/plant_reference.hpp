#pragma once

#include <cmath>

#include "renfdi/plant.hpp"

namespace test_util {

// Scalar re-derivation: the 2x2 body block of the mass matrix is inverted by
// hand (heave and roll), the tire rows are divided by the tire masses, and the
// roll-row forces are rewritten using the oddness of the force laws.
inline renfdi::plant::PlantState reference_dynamics(const renfdi::plant::RollPlaneParams& p,
                                                    const renfdi::plant::PlantState& x,
                                                    double u1, double u2) {
  auto fk = [](double k, double kn, double d) { return k * d + kn * d * d * d; };
  auto fc = [](double c, double cn, double v) { return c * v + cn * 0.2 * std::tanh(10.0 * v); };
  const double s1 = fk(p.k1, p.k1n, x(0) - x(2));
  const double s2 = fk(p.k2, p.k2n, x(1) - x(3));
  const double d1 = fc(p.c1, p.c1n, x(4) - x(6));
  const double d2 = fc(p.c2, p.c2n, x(5) - x(7));
  const double heave_force = -(s1 + s2) - (d1 + d2);
  const double roll_moment = -0.5 * p.L * (s2 - s1) - 0.5 * p.L * (d2 - d1);
  // m/2 (a1 + a2) = heave_force, I/L (a2 - a1) = roll_moment
  const double mean = heave_force / p.m;
  const double half_diff = 0.5 * roll_moment * p.L / p.I;
  renfdi::plant::PlantState dx;
  dx.head<4>() = x.tail<4>();
  dx(4) = mean - half_diff;
  dx(5) = mean + half_diff;
  dx(6) = (s1 + d1 - p.kt1 * x(2) + p.kt1 * u1) / p.m_t1;
  dx(7) = (s2 + d2 - p.kt2 * x(3) + p.kt2 * u2) / p.m_t2;
  return dx;
}

}  // namespace test_util
