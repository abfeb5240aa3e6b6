#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "renfdi/errors.hpp"
#include "renfdi/plant.hpp"
#include "renfdi/rng.hpp"
#include "renfdi/signals.hpp"
#include "plant_reference.hpp"

using namespace renfdi;
using namespace renfdi::plant;

namespace {

PlantState random_state(Rng& rng, double pos, double vel) {
  PlantState x;
  for (int k = 0; k < 4; ++k) x(k) = rng.uniform(-pos, pos);
  for (int k = 4; k < 8; ++k) x(k) = rng.uniform(-vel, vel);
  return x;
}

}  // namespace

TEST_CASE("default vehicle parameters") {
  RollPlaneParams p;
  CHECK(p.m == 580.0);
  CHECK(p.m_t1 == 36.26);
  CHECK(p.m_t2 == 36.26);
  CHECK(p.I == 63.3316);
  CHECK(p.L == 1.524);
  CHECK(p.c1 == 710.70);
  CHECK(p.c1n == 0.71);
  CHECK(p.k1 == 19357.2);
  CHECK(p.kt1 == 96319.76);
  CHECK(p.k1n == 15000.0);
  CHECK_NOTHROW(p.validate());
  p.I = -1.0;
  CHECK_THROWS_AS(p.validate(), UsageError);
}

TEST_CASE("force laws") {
  CHECK(spring_force(2.0, 3.0, 0.5) == doctest::Approx(2.0 * 0.5 + 3.0 * 0.125));
  CHECK(damper_force(2.0, 3.0, 0.1) == doctest::Approx(0.2 + 3.0 * 0.2 * std::tanh(1.0)));
  CHECK(spring_force(1.0, 1.0, 0.0) == 0.0);
  CHECK(damper_force(1.0, 1.0, 0.0) == 0.0);
}

TEST_CASE("zero state is an equilibrium") {
  RollPlaneModel model;
  CHECK(model.dynamics(PlantState::Zero(), RoadInput::Zero()).isZero(0));
  CHECK(model.rk4_step(PlantState::Zero(), RoadInput::Zero(), 0.01).isZero(0));
}

TEST_CASE("road step accelerates only the tires") {
  RollPlaneModel model;
  const PlantState dx = model.dynamics(PlantState::Zero(), RoadInput(0.05, 0.05));
  const RollPlaneParams p;
  CHECK(dx(4) == doctest::Approx(0.0));
  CHECK(dx(5) == doctest::Approx(0.0));
  CHECK(std::abs(dx(4)) < 1e-12);
  CHECK(dx(6) == doctest::Approx(p.kt1 * 0.05 / p.m_t1).epsilon(1e-14));
  CHECK(dx(7) == doctest::Approx(p.kt2 * 0.05 / p.m_t2).epsilon(1e-14));
}

TEST_CASE("dynamics matches an independent derivation on 1000 random states") {
  RollPlaneParams p;
  RollPlaneModel model(p);
  Rng rng(2024);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const PlantState x = random_state(rng, 0.2, 2.0);
    const double u1 = rng.uniform(-0.1, 0.1), u2 = rng.uniform(-0.1, 0.1);
    const PlantState a = model.dynamics(x, RoadInput(u1, u2));
    const PlantState b = test_util::reference_dynamics(p, x, u1, u2);
    worst = std::max(worst, (a - b).norm() / std::max(b.norm(), 1e-300));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("dynamics is odd") {
  RollPlaneModel model;
  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    const PlantState x = random_state(rng, 0.1, 1.0);
    const RoadInput u(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
    const PlantState a = model.dynamics(x, u);
    const PlantState b = model.dynamics(-x, -u);
    CHECK((a + b).norm() <= 1e-12 * a.norm());
  }
}

TEST_CASE("RK4 step halving: fourth-order convergence over 1 s") {
  RollPlaneModel model;
  Rng rng(8);
  // Operating regime: a road step from rest, and a small perturbed state.
  const PlantState starts[] = {PlantState::Zero(), random_state(rng, 1e-3, 1e-2)};
  const RoadInput u(0.03, -0.02);
  for (const PlantState& x0 : starts) {
    const PlantState ref = model.integrate(x0, u, 1e-2 / 512, 51200);
    const double e1 = (model.integrate(x0, u, 1e-2, 100) - ref).norm();
    const double e2 = (model.integrate(x0, u, 5e-3, 200) - ref).norm();
    const double e3 = (model.integrate(x0, u, 2.5e-3, 400) - ref).norm();
    CHECK(e1 / e2 >= 15.0);
    CHECK(e2 / e3 >= 15.0);

    // Local error: one step of dt against two steps of dt/2 shrinks like dt^5.
    auto local = [&](double dt) {
      const PlantState x1 = model.integrate(x0, u, 1e-2, 10);
      return (model.rk4_step(x1, u, dt) - model.integrate(x1, u, dt / 2, 2)).norm();
    };
    CHECK(local(1e-2) / local(5e-3) > 24.0);
    CHECK(local(5e-3) / local(2.5e-3) > 24.0);
  }
}

TEST_CASE("undamped linear analogue conserves energy over 20 s") {
  RollPlaneParams p;
  p.c1 = p.c2 = p.c1n = p.c2n = 1e-300;
  p.k1n = p.k2n = 1e-300;
  RollPlaneModel model(p);
  auto energy = [&](const PlantState& x) {
    const double zd = 0.5 * (x(4) + x(5)), thd = (x(5) - x(4)) / p.L;
    const double kinetic = 0.5 * p.m * zd * zd + 0.5 * p.I * thd * thd +
                           0.5 * p.m_t1 * x(6) * x(6) + 0.5 * p.m_t2 * x(7) * x(7);
    const double potential = 0.5 * p.k1 * std::pow(x(0) - x(2), 2) +
                             0.5 * p.k2 * std::pow(x(1) - x(3), 2) +
                             0.5 * p.kt1 * x(2) * x(2) + 0.5 * p.kt2 * x(3) * x(3);
    return kinetic + potential;
  };
  Rng rng(13);
  PlantState x = random_state(rng, 1e-3, 1e-2);
  const double e0 = energy(x);
  double lo = e0, hi = e0;
  for (int k = 0; k < 2000; ++k) {
    x = model.rk4_step(x, RoadInput::Zero(), 0.01);
    lo = std::min(lo, energy(x));
    hi = std::max(hi, energy(x));
  }
  CHECK(hi <= e0 * (1 + 1e-9));
  // RK4 damps the 50 rad/s tire modes slightly at 100 Hz; energy stays bounded.
  CHECK(lo >= 0.5 * e0);
}

TEST_CASE("simulate: zero input, length checks, determinism, boundedness") {
  RollPlaneModel model;
  Eigen::MatrixX2d zero = Eigen::MatrixX2d::Zero(2001, 2);
  const auto traj = model.simulate(zero);
  REQUIRE(traj.size() == 2001);
  for (const auto& x : traj) CHECK(x.isZero(0));
  CHECK_THROWS_AS(model.simulate(Eigen::MatrixX2d::Zero(2000, 2)), UsageError);

  double worst = 0.0;
  for (int s = 0; s < 100; ++s) {
    Eigen::MatrixX2d u(2001, 2);
    for (int c = 0; c < 2; ++c) {
      u.col(c) = signals::multisine(signals::MultisineSpec::road(), derive_seed(s, "road", c))
                     .samples;
    }
    const auto a = model.simulate(u);
    if (s == 0) {
      const auto b = model.simulate(u);
      for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
    }
    for (const auto& x : a) {
      const Measurement y = measure(x);
      worst = std::max({worst, std::abs(y(0)), std::abs(y(1))});
      REQUIRE(x.allFinite());
    }
  }
  CHECK(worst < 0.5);
}

TEST_CASE("measure") {
  CHECK(measure(PlantState::Zero()).isZero(0));
  PlantState x = PlantState::Zero();
  x(0) = 1.0;
  CHECK(measure(x) == Measurement(1, 0, 0, 0));
  Rng rng(1);
  const PlantState r = random_state(rng, 1, 1);
  const Measurement y = measure(r);
  CHECK(y(0) == r(0) - r(2));
  CHECK(y(1) == r(1) - r(3));
  CHECK(y(2) == r(4) - r(6));
  CHECK(y(3) == r(5) - r(7));
}

TEST_CASE("trajectory CSV") {
  RollPlaneModel model;
  Eigen::MatrixX2d u = Eigen::MatrixX2d::Constant(2001, 2, 0.01);
  const auto traj = model.simulate(u);
  const auto path = std::filesystem::temp_directory_path() / "renfdi_traj_test.csv";
  write_trajectory_csv(path, traj, u, 100.0);
  std::ifstream is(path);
  std::string header, line;
  std::getline(is, header);
  CHECK(header == "t,q1,q2,q3,q4,qd1,qd2,qd3,qd4,u1,u2");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 2001);
  std::filesystem::remove(path);
}
