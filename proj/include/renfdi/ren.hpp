#pragma once

// Robust acyclic recurrent equilibrium network (R-aREN) used as one residual
// generator of the fault-isolation bank.
//
// The filter is
//
//     z+ = A z + B1 w + B2 u + bz
//     v  = C1 z + D11 w + D12 u + bv,     w = tanh(v)
//     r  = C2 z + D21 w + D22 u + br
//
// with D11 strictly lower triangular, so v is solved by forward substitution.
// The explicit weights are never trained directly: they are the image of a
// free parameter vector (DirectParams) under a smooth map that guarantees
// contraction with rate alpha_bar and the incremental quadratic constraint
//
//     sum_k  -q |dr_k|^2 + du_k' R du_k  >= 0     (equal initial states)
//
// for every parameter value.

#include <Eigen/Dense>

#include <cstdint>

namespace renfdi::ren {

/// Widths of one filter. The input is u_bar = col(u, y), n_in = l + m.
struct RenDims {
  int n_z = 8;
  int n_v = 32;
  int n_in = 6;
  int n_out = 1;

  /// Validating constructor; throws UsageError.
  static RenDims make(int n_z, int n_v, int n_in);
  void validate() const;
};

/// Sensitivity design of filter i: weight beta on the known inputs and on
/// sensor i, gamma on every other sensor, output weight q.
class PerformanceSpec {
 public:
  /// Throws UsageError unless 0 < gamma < q < beta and 1 <= sensor_index <= m.
  PerformanceSpec(double beta, double gamma, double q, int sensor_index, int l, int m);

  double beta() const { return beta_; }
  double gamma() const { return gamma_; }
  double q() const { return q_; }
  int sensor_index() const { return sensor_index_; }
  int l() const { return l_; }
  int m() const { return m_; }
  int input_width() const { return l_ + m_; }

  /// Gain bound from the own sensor to the residual, sqrt(beta / q).
  double sensitivity_gain() const;
  /// Gain bound from the other sensors to the residual, sqrt(gamma / q).
  double insensitivity_gain() const;

 private:
  double beta_;
  double gamma_;
  double q_;
  int sensor_index_;
  int l_;
  int m_;
};

/// R = diag(beta I_l, gamma I_{i-1}, beta, gamma I_{m-i}), Q = -q.
struct WeightSpec {
  Eigen::VectorXd r_diag;
  double Q = 0.0;
};

WeightSpec build_weight_spec(const PerformanceSpec& spec);

/// Free parameters of one filter. Every finite value of the trainable fields
/// maps to a well-posed, contracting filter.
struct DirectParams {
  Eigen::MatrixXd B2_imp;      // n_z x n_in
  Eigen::RowVectorXd C2;       // 1 x n_z
  Eigen::MatrixXd D12_imp;     // n_v x n_in
  Eigen::RowVectorXd D21;      // 1 x n_v
  Eigen::VectorXd eta_tilde;   // n_z + n_v + 1
  double X3 = 0.0;
  double Y3 = 0.0;             // enters only as Y3 - Y3' = 0 for scalar output
  Eigen::VectorXd Z3;          // n_in - 1
  Eigen::MatrixXd X;           // (2 n_z + n_v) square
  Eigen::MatrixXd Y1;          // n_z x n_z
  double epsilon = 1e-4;       // fixed, not trained
  double alpha_bar = 0.95;     // contraction-rate bound in (0, 1], not trained

  /// All-zero trainables with the given fixed scalars.
  static DirectParams zeros(const RenDims& dims, double epsilon = 1e-4, double alpha_bar = 0.95);

  /// Throws UsageError on a shape mismatch, a non-finite entry, epsilon <= 0
  /// or alpha_bar outside (0, 1].
  void validate(const RenDims& dims) const;
};

/// Number of scalar trainables (everything except epsilon and alpha_bar).
Eigen::Index trainable_count(const RenDims& dims);
/// Trainables in a fixed field order, each field column-major.
Eigen::VectorXd flatten_trainables(const DirectParams& p);
/// Inverse of flatten_trainables; shapes are taken from `dims`.
void assign_trainables(DirectParams& p, const RenDims& dims, const Eigen::VectorXd& flat);

/// Explicit weights. Produced by materialize().
struct ExplicitRen {
  Eigen::MatrixXd A;       // n_z x n_z
  Eigen::MatrixXd B1;      // n_z x n_v
  Eigen::MatrixXd B2;      // n_z x n_in
  Eigen::MatrixXd C1;      // n_v x n_z
  Eigen::MatrixXd D11;     // n_v x n_v, strictly lower triangular
  Eigen::MatrixXd D12;     // n_v x n_in
  Eigen::RowVectorXd C2;   // 1 x n_z
  Eigen::RowVectorXd D21;  // 1 x n_v
  Eigen::RowVectorXd D22;  // 1 x n_in
  Eigen::VectorXd bias_z;
  Eigen::VectorXd bias_v;
  double bias_r = 0.0;

  int n_z() const { return static_cast<int>(A.rows()); }
  int n_v() const { return static_cast<int>(D11.rows()); }
  int n_in() const { return static_cast<int>(B2.cols()); }

  /// Zero weights of the given shape. Used as an additive identity for
  /// gradients and in tests.
  static ExplicitRen zeros(const RenDims& dims);
};

/// Intermediates of the parameter map, kept for certification.
struct MaterializeTrace {
  Eigen::RowVectorXd N;        // Cayley block, 1 x n_in
  Eigen::MatrixXd R_tilde;     // R + D22' Q D22
  bool r_tilde_posdef = false;
  Eigen::MatrixXd H;
  bool h_posdef = false;
  double h_min_pivot = 0.0;    // smallest squared Cholesky pivot of H
  Eigen::VectorXd lambda;      // diagonal of Lambda
  Eigen::MatrixXd E;
  double e_condition = 0.0;    // 1 / rcond estimate of E
};

struct Materialized {
  ExplicitRen ren;
  MaterializeTrace trace;
};

/// Runs the parameter map and keeps its intermediates. Never throws on a
/// failed certificate; throws UsageError on bad shapes.
Materialized materialize_traced(const RenDims& dims, const PerformanceSpec& spec,
                                const DirectParams& params);

/// Runs the parameter map. Throws CertificateError naming the certificate if
/// H is not positive definite, a Lambda entry is not positive, or E is
/// numerically singular (condition estimate above 1e12).
ExplicitRen materialize(const RenDims& dims, const PerformanceSpec& spec,
                        const DirectParams& params);

/// Condition-number ceiling above which E is treated as singular.
inline constexpr double kMaxCondition = 1e12;

/// Adjoint of materialize: given dJ/d(explicit weights), returns dJ/d(params)
/// in the shape of DirectParams (epsilon and alpha_bar entries are unused).
DirectParams materialize_vjp(const RenDims& dims, const PerformanceSpec& spec,
                             const DirectParams& params, const ExplicitRen& grad);

double activation(double v);
double activation_slope(double v);
Eigen::VectorXd activation(const Eigen::VectorXd& v);

struct StepResult {
  Eigen::VectorXd z_next;
  double r = 0.0;
  Eigen::VectorXd w;
};

/// Evaluates one sample. The equilibrium layer is solved row by row.
StepResult step(const ExplicitRen& ren, const Eigen::VectorXd& z, const Eigen::VectorXd& u_bar);

struct Rollout {
  Eigen::VectorXd residuals;  // T, output at sample k before the state update
  Eigen::MatrixXd states;     // T x n_z, state after the update at sample k
};

/// Iterates step over `inputs` (one sample per row, T x n_in).
Rollout rollout(const ExplicitRen& ren, const Eigen::VectorXd& z0, const Eigen::MatrixXd& inputs);

struct InitOptions {
  double scale = 1.0;
  double epsilon = 1e-4;
  double alpha_bar = 0.95;
};

/// Zero-mean Gaussian trainables with standard deviation scale / sqrt(fan-in),
/// fan-in being the column count of a matrix and the length of a vector.
/// The scalars X3 and Y3 use standard deviation `scale`.
DirectParams init_params(const RenDims& dims, const PerformanceSpec& spec, std::uint64_t seed,
                         const InitOptions& options = {});

}  // namespace renfdi::ren
