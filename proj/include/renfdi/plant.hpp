#pragma once

// Four-degree-of-freedom roll-plane vehicle model: two body points (q1, q2)
// joined by a rigid roll bar and two tires (q3, q4), with cubic suspension
// springs and tanh-saturated dampers. Inputs are the road heights under the
// two tires.

#include <Eigen/Dense>

#include <filesystem>
#include <vector>

namespace renfdi::plant {

struct RollPlaneParams {
  double m = 580.0;          // sprung mass [kg]
  double m_t1 = 36.26;       // tire masses [kg]
  double m_t2 = 36.26;
  double I = 63.3316;        // roll inertia [kg m^2]
  double L = 1.524;          // track width [m]
  double c1 = 710.70;        // linear damping [N s/m]
  double c2 = 710.70;
  double c1n = 0.71;         // nonlinear damping [N s/m]
  double c2n = 0.71;
  double k1 = 19357.2;       // suspension stiffness [N/m]
  double k2 = 19357.2;
  double kt1 = 96319.76;     // tire stiffness [N/m]
  double kt2 = 96319.76;
  double k1n = 15000.0;      // cubic stiffness [N/m^3]
  double k2n = 15000.0;

  /// Throws UsageError unless every parameter is finite and positive.
  void validate() const;
};

/// Positions then velocities: [q1 q2 q3 q4 qd1 qd2 qd3 qd4].
using PlantState = Eigen::Matrix<double, 8, 1>;
using RoadInput = Eigen::Vector2d;
using Measurement = Eigen::Vector4d;

/// Spring force F_K(x) = k x + kn x^3.
double spring_force(double k, double kn, double x);
/// Damper force F_C(xd) = c xd + cn * 0.2 * tanh(10 xd).
double damper_force(double c, double cn, double xd);

class RollPlaneModel {
 public:
  explicit RollPlaneModel(const RollPlaneParams& params = {});

  const RollPlaneParams& params() const { return params_; }

  /// State derivative [qd; M^-1 (f_U(u) - f_K(q) - f_C(qd))].
  PlantState dynamics(const PlantState& x, const RoadInput& u) const;

  /// Classical RK4 with the input held over the whole step.
  PlantState rk4_step(const PlantState& x, const RoadInput& u_held, double dt) const;

  /// Iterates rk4_step from x0 over `steps` steps with a constant input.
  PlantState integrate(const PlantState& x0, const RoadInput& u_held, double dt, int steps) const;

  /// Simulates from the zero state. `inputs` has one row per sample
  /// (duration * rate + 1 rows, two columns); row k drives the step from
  /// sample k to k + 1. Returns one state per input row.
  std::vector<PlantState> simulate(const Eigen::MatrixX2d& inputs, double rate_hz = 100.0,
                                   double duration_s = 20.0) const;

 private:
  RollPlaneParams params_;
  Eigen::PartialPivLU<Eigen::Matrix4d> mass_lu_;
};

/// y = [q1 - q3, q2 - q4, qd1 - qd3, qd2 - qd4].
Measurement measure(const PlantState& x);

/// CSV with header t,q1,q2,q3,q4,qd1,qd2,qd3,qd4,u1,u2 and 17 significant digits.
void write_trajectory_csv(const std::filesystem::path& path, const std::vector<PlantState>& traj,
                          const Eigen::MatrixX2d& inputs, double rate_hz);

}  // namespace renfdi::plant
