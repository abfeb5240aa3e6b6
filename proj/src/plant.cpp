#include "renfdi/plant.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "renfdi/errors.hpp"

namespace renfdi::plant {

void RollPlaneParams::validate() const {
  for (double v : {m, m_t1, m_t2, I, L, c1, c2, c1n, c2n, k1, k2, kt1, kt2, k1n, k2n}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw UsageError("roll-plane parameters must be finite and strictly positive");
    }
  }
}

double spring_force(double k, double kn, double x) { return k * x + kn * x * x * x; }

double damper_force(double c, double cn, double xd) {
  return c * xd + cn * (0.2 * std::tanh(10.0 * xd));
}

RollPlaneModel::RollPlaneModel(const RollPlaneParams& params) : params_(params) {
  params_.validate();
  const auto& p = params_;
  Eigen::Matrix4d M;
  M << p.m / 2, p.m / 2, 0, 0,
       -p.I / p.L, p.I / p.L, 0, 0,
       0, 0, p.m_t1, 0,
       0, 0, 0, p.m_t2;
  mass_lu_.compute(M);
  if (!(std::abs(M.determinant()) > 0.0)) {
    throw UsageError("roll-plane mass matrix is singular");
  }
}

PlantState RollPlaneModel::dynamics(const PlantState& x, const RoadInput& u) const {
  const auto& p = params_;
  const double q1 = x(0), q2 = x(1), q3 = x(2), q4 = x(3);
  const double qd1 = x(4), qd2 = x(5), qd3 = x(6), qd4 = x(7);

  const double fk1 = spring_force(p.k1, p.k1n, q1 - q3);
  const double fk2 = spring_force(p.k2, p.k2n, q2 - q4);
  Eigen::Vector4d fK;
  fK << fk1 + fk2,
        p.L / 2 * (fk2 - fk1),
        spring_force(p.k1, p.k1n, q3 - q1) + p.kt1 * q3,
        spring_force(p.k2, p.k2n, q4 - q2) + p.kt2 * q4;

  Eigen::Vector4d fC;
  fC << damper_force(p.c1, p.c1n, qd1 - qd3) + damper_force(p.c2, p.c2n, qd2 - qd4),
        p.L / 2 * (damper_force(p.c1, p.c1n, qd3 - qd1) - damper_force(p.c2, p.c2n, qd4 - qd2)),
        damper_force(p.c1, p.c1n, qd3 - qd1),
        damper_force(p.c2, p.c2n, qd4 - qd2);

  Eigen::Vector4d fU(0.0, 0.0, p.kt1 * u(0), p.kt2 * u(1));

  PlantState dx;
  dx.head<4>() = x.tail<4>();
  dx.tail<4>() = mass_lu_.solve(fU - fK - fC);
  return dx;
}

PlantState RollPlaneModel::rk4_step(const PlantState& x, const RoadInput& u, double dt) const {
  const PlantState k1 = dynamics(x, u);
  const PlantState k2 = dynamics(x + 0.5 * dt * k1, u);
  const PlantState k3 = dynamics(x + 0.5 * dt * k2, u);
  const PlantState k4 = dynamics(x + dt * k3, u);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

PlantState RollPlaneModel::integrate(const PlantState& x0, const RoadInput& u, double dt,
                                     int steps) const {
  PlantState x = x0;
  for (int k = 0; k < steps; ++k) x = rk4_step(x, u, dt);
  return x;
}

std::vector<PlantState> RollPlaneModel::simulate(const Eigen::MatrixX2d& inputs, double rate_hz,
                                                 double duration_s) const {
  const auto expected = static_cast<Eigen::Index>(std::llround(duration_s * rate_hz)) + 1;
  if (inputs.rows() != expected) {
    throw UsageError("simulate expects " + std::to_string(expected) + " input samples, got " +
                     std::to_string(inputs.rows()));
  }
  const double dt = 1.0 / rate_hz;
  std::vector<PlantState> traj;
  traj.reserve(static_cast<std::size_t>(expected));
  PlantState x = PlantState::Zero();
  traj.push_back(x);
  for (Eigen::Index k = 0; k + 1 < expected; ++k) {
    x = rk4_step(x, inputs.row(k).transpose(), dt);
    traj.push_back(x);
  }
  return traj;
}

Measurement measure(const PlantState& x) {
  return Measurement(x(0) - x(2), x(1) - x(3), x(4) - x(6), x(5) - x(7));
}

void write_trajectory_csv(const std::filesystem::path& path, const std::vector<PlantState>& traj,
                          const Eigen::MatrixX2d& inputs, double rate_hz) {
  if (static_cast<Eigen::Index>(traj.size()) != inputs.rows()) {
    throw UsageError("trajectory and input lengths differ");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << "t,q1,q2,q3,q4,qd1,qd2,qd3,qd4,u1,u2\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (std::size_t k = 0; k < traj.size(); ++k) {
    put(static_cast<double>(k) / rate_hz);
    for (int i = 0; i < 8; ++i) {
      os << ',';
      put(traj[k](i));
    }
    os << ',';
    put(inputs(static_cast<Eigen::Index>(k), 0));
    os << ',';
    put(inputs(static_cast<Eigen::Index>(k), 1));
    os << '\n';
  }
}

}  // namespace renfdi::plant
