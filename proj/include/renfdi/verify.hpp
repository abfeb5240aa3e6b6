#pragma once

// Executable certificates for a materialized filter: well-posedness of the
// parameter map, contraction of paired state trajectories, the incremental
// quadratic constraint and the two fault-gain bounds that follow from it.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "renfdi/ren.hpp"

namespace renfdi::verify {

struct WellPosednessReport {
  bool h_posdef = false;
  double h_min_pivot = 0.0;
  bool lambda_positive = false;
  double lambda_min = 0.0;
  double e_condition = 0.0;
  bool d11_strictly_lower = false;
  double n_norm = 0.0;

  bool pass() const;
};

/// Runs the parameter map with its intermediates and reports every
/// certificate. Never throws on a failing certificate.
WellPosednessReport check_wellposed(const ren::RenDims& dims, const ren::PerformanceSpec& spec,
                                    const ren::DirectParams& params);
/// Same, from an already materialized (possibly tampered) filter.
WellPosednessReport check_wellposed(const ren::MaterializeTrace& trace,
                                    const ren::ExplicitRen& ren);

bool is_strictly_lower(const Eigen::MatrixXd& m);

struct ContractionResult {
  std::vector<double> ratios;  // |dz(k+1)| / |dz(k)| while dz is above the noise floor
  double geometric_mean = 0.0;
  bool converged = false;      // |dz| dropped below 1e-10 |dz(0)| within the horizon
  Eigen::Index converged_at = -1;
  bool pass = false;           // geometric_mean <= alpha_bar + margin
};

inline constexpr double kContractionMargin = 0.02;
inline constexpr double kConvergenceFloor = 1e-10;

/// Paired rollouts from z0_a and z0_b under the same inputs. Throws
/// UsageError when the two initial states coincide.
ContractionResult contraction_test(const ren::ExplicitRen& ren, const Eigen::MatrixXd& inputs,
                                   const Eigen::VectorXd& z0_a, const Eigen::VectorXd& z0_b,
                                   double alpha_bar);

struct IqcGap {
  Eigen::VectorXd gap;     // per truncation k_f (inclusive)
  double min_gap = 0.0;
  double energy = 0.0;     // weighted input-increment energy sum_k du' R du
  double tolerance = 0.0;  // 1e-8 * energy
  bool pass = false;       // min_gap >= -tolerance
};

/// Gap of the incremental quadratic constraint between two input sequences
/// driven from the same initial state:
///   -q |dr|^2 + beta |du|^2 + gamma |dy~1|^2 + beta |dy_i|^2 + gamma |dy~2|^2
/// summed up to each truncation.
IqcGap iqc_gap(const ren::ExplicitRen& ren, const ren::PerformanceSpec& spec,
               const Eigen::MatrixXd& input_a, const Eigen::MatrixXd& input_b,
               const Eigen::VectorXd& z0);

struct BoundCheck {
  Eigen::VectorXd lhs;  // |dr|_{k_f}
  Eigen::VectorXd rhs;  // gain * |f|_{k_f}
  double worst_margin = 0.0;  // min of 1 - lhs/rhs over k_f with rhs > 0
  bool pass = false;
};

inline constexpr double kBoundRelTol = 1e-6;

/// |dr|_{k_f} <= sqrt(beta/q) |f_i|_{k_f} for a fault on the filter's own sensor.
BoundCheck sensitivity_bound_check(const ren::ExplicitRen& ren, const ren::PerformanceSpec& spec,
                                   const Eigen::MatrixXd& healthy_inputs,
                                   const Eigen::VectorXd& fault_i);

/// |dr|_{k_f} <= sqrt(gamma/q) |f~|_{k_f} for faults on the other sensors.
/// `faults` is T x m; its column for the filter's own sensor must be zero.
BoundCheck insensitivity_bound_check(const ren::ExplicitRen& ren,
                                     const ren::PerformanceSpec& spec,
                                     const Eigen::MatrixXd& healthy_inputs,
                                     const Eigen::MatrixXd& faults);

/// One line of a verification report.
struct CheckResult {
  std::string name;
  std::uint64_t seed = 0;
  bool pass = false;
  double worst_margin = 0.0;
};

nlohmann::json to_json(const std::vector<CheckResult>& results);

struct SuiteOptions {
  int trials = 100;
  int contraction_pairs = 20;
  std::uint64_t seed = 7;
  Eigen::Index horizon = 80;
  double state_scale = 1.0;
};

struct BankFilter {
  ren::RenDims dims;
  ren::PerformanceSpec spec;
  ren::DirectParams params;
};

/// Runs every certificate on each filter with seeded random inputs and faults
/// drawn from the multisine distributions.
std::vector<CheckResult> run_suite(const std::vector<BankFilter>& bank, const SuiteOptions& opts);

}  // namespace renfdi::verify
