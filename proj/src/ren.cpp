#include "renfdi/ren.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "renfdi/errors.hpp"
#include "renfdi/rng.hpp"

namespace renfdi::ren {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

RenDims RenDims::make(int n_z, int n_v, int n_in) {
  RenDims d{n_z, n_v, n_in, 1};
  d.validate();
  return d;
}

void RenDims::validate() const {
  if (n_z < 1 || n_v < 1 || n_in < 1) {
    throw UsageError("filter widths must all be >= 1");
  }
  if (n_out != 1) {
    throw UsageError("only scalar-residual filters are supported (n_out == 1)");
  }
}

PerformanceSpec::PerformanceSpec(double beta, double gamma, double q, int sensor_index, int l,
                                 int m)
    : beta_(beta), gamma_(gamma), q_(q), sensor_index_(sensor_index), l_(l), m_(m) {
  if (!(beta > 0.0) || !(gamma > 0.0) || !(q > 0.0)) {
    throw UsageError("beta, gamma and q must be positive");
  }
  if (!std::isfinite(beta) || !std::isfinite(gamma) || !std::isfinite(q)) {
    throw UsageError("beta, gamma and q must be finite");
  }
  if (!(gamma < q && q < beta)) {
    std::ostringstream os;
    os << "weights must satisfy gamma < q < beta (got gamma=" << gamma << ", q=" << q
       << ", beta=" << beta << ")";
    throw UsageError(os.str());
  }
  if (l < 0 || m < 1) {
    throw UsageError("need l >= 0 known inputs and m >= 1 sensors");
  }
  if (sensor_index < 1 || sensor_index > m) {
    throw UsageError("sensor_index " + std::to_string(sensor_index) + " outside [1, " +
                     std::to_string(m) + "]");
  }
}

double PerformanceSpec::sensitivity_gain() const { return std::sqrt(beta_ / q_); }
double PerformanceSpec::insensitivity_gain() const { return std::sqrt(gamma_ / q_); }

WeightSpec build_weight_spec(const PerformanceSpec& spec) {
  WeightSpec w;
  w.r_diag = VectorXd::Constant(spec.input_width(), spec.gamma());
  w.r_diag.head(spec.l()).setConstant(spec.beta());
  w.r_diag(spec.l() + spec.sensor_index() - 1) = spec.beta();
  w.Q = -spec.q();
  return w;
}

DirectParams DirectParams::zeros(const RenDims& dims, double epsilon, double alpha_bar) {
  const int nz = dims.n_z, nv = dims.n_v, nu = dims.n_in;
  DirectParams p;
  p.B2_imp = MatrixXd::Zero(nz, nu);
  p.C2 = RowVectorXd::Zero(nz);
  p.D12_imp = MatrixXd::Zero(nv, nu);
  p.D21 = RowVectorXd::Zero(nv);
  p.eta_tilde = VectorXd::Zero(nz + nv + 1);
  p.Z3 = VectorXd::Zero(nu - 1);
  p.X = MatrixXd::Zero(2 * nz + nv, 2 * nz + nv);
  p.Y1 = MatrixXd::Zero(nz, nz);
  p.epsilon = epsilon;
  p.alpha_bar = alpha_bar;
  return p;
}

namespace {

void expect_shape(const char* name, Index rows, Index cols, Index want_rows, Index want_cols) {
  if (rows != want_rows || cols != want_cols) {
    std::ostringstream os;
    os << "parameter " << name << " has shape " << rows << "x" << cols << ", expected "
       << want_rows << "x" << want_cols;
    throw UsageError(os.str());
  }
}

}  // namespace

void DirectParams::validate(const RenDims& dims) const {
  dims.validate();
  const int nz = dims.n_z, nv = dims.n_v, nu = dims.n_in;
  expect_shape("B2_imp", B2_imp.rows(), B2_imp.cols(), nz, nu);
  expect_shape("C2", C2.rows(), C2.cols(), 1, nz);
  expect_shape("D12_imp", D12_imp.rows(), D12_imp.cols(), nv, nu);
  expect_shape("D21", D21.rows(), D21.cols(), 1, nv);
  expect_shape("eta_tilde", eta_tilde.rows(), eta_tilde.cols(), nz + nv + 1, 1);
  expect_shape("Z3", Z3.rows(), Z3.cols(), nu - 1, 1);
  expect_shape("X", X.rows(), X.cols(), 2 * nz + nv, 2 * nz + nv);
  expect_shape("Y1", Y1.rows(), Y1.cols(), nz, nz);
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw UsageError("epsilon must be a finite positive number");
  }
  if (!(alpha_bar > 0.0 && alpha_bar <= 1.0)) {
    throw UsageError("alpha_bar must lie in (0, 1]");
  }
  if (!flatten_trainables(*this).allFinite()) {
    throw UsageError("parameter vector contains non-finite entries");
  }
}

Index trainable_count(const RenDims& d) {
  const Index nz = d.n_z, nv = d.n_v, nu = d.n_in;
  return nz * nu + nz + nv * nu + nv + (nz + nv + 1) + 2 + (nu - 1) +
         (2 * nz + nv) * (2 * nz + nv) + nz * nz;
}

namespace {

// Visits every trainable field in the canonical order. `f(double* data, Index size)`.
template <typename P, typename F>
void for_each_field(P& p, F&& f) {
  f(p.B2_imp.data(), p.B2_imp.size());
  f(p.C2.data(), p.C2.size());
  f(p.D12_imp.data(), p.D12_imp.size());
  f(p.D21.data(), p.D21.size());
  f(p.eta_tilde.data(), p.eta_tilde.size());
  f(&p.X3, Index{1});
  f(&p.Y3, Index{1});
  f(p.Z3.data(), p.Z3.size());
  f(p.X.data(), p.X.size());
  f(p.Y1.data(), p.Y1.size());
}

}  // namespace

VectorXd flatten_trainables(const DirectParams& p) {
  Index n = 0;
  for_each_field(p, [&](const double*, Index size) { n += size; });
  VectorXd flat(n);
  Index at = 0;
  for_each_field(p, [&](const double* data, Index size) {
    flat.segment(at, size) = Eigen::Map<const VectorXd>(data, size);
    at += size;
  });
  return flat;
}

void assign_trainables(DirectParams& p, const RenDims& dims, const VectorXd& flat) {
  if (flat.size() != trainable_count(dims)) {
    throw UsageError("flat parameter vector has length " + std::to_string(flat.size()) +
                     ", expected " + std::to_string(trainable_count(dims)));
  }
  DirectParams shaped = DirectParams::zeros(dims, p.epsilon, p.alpha_bar);
  Index at = 0;
  for_each_field(shaped, [&](double* data, Index size) {
    Eigen::Map<VectorXd>(data, size) = flat.segment(at, size);
    at += size;
  });
  p = std::move(shaped);
}

ExplicitRen ExplicitRen::zeros(const RenDims& dims) {
  const int nz = dims.n_z, nv = dims.n_v, nu = dims.n_in;
  ExplicitRen r;
  r.A = MatrixXd::Zero(nz, nz);
  r.B1 = MatrixXd::Zero(nz, nv);
  r.B2 = MatrixXd::Zero(nz, nu);
  r.C1 = MatrixXd::Zero(nv, nz);
  r.D11 = MatrixXd::Zero(nv, nv);
  r.D12 = MatrixXd::Zero(nv, nu);
  r.C2 = RowVectorXd::Zero(nz);
  r.D21 = RowVectorXd::Zero(nv);
  r.D22 = RowVectorXd::Zero(nu);
  r.bias_z = VectorXd::Zero(nz);
  r.bias_v = VectorXd::Zero(nv);
  r.bias_r = 0.0;
  return r;
}

Materialized materialize_traced(const RenDims& dims, const PerformanceSpec& spec,
                                const DirectParams& p) {
  p.validate(dims);
  if (spec.input_width() != dims.n_in) {
    throw UsageError("performance spec has l + m = " + std::to_string(spec.input_width()) +
                     " but the filter input width is " + std::to_string(dims.n_in));
  }
  const int nz = dims.n_z, nv = dims.n_v, nu = dims.n_in;
  const int nh = 2 * nz + nv;
  const WeightSpec w = build_weight_spec(spec);
  const double q = -w.Q;
  const double eps = p.epsilon;

  Materialized out;
  MaterializeTrace& tr = out.trace;
  ExplicitRen& ren = out.ren;

  // Cayley block. R = L_R' L_R and -Q = L_Q' L_Q are diagonal.
  const VectorXd lr = w.r_diag.cwiseSqrt();
  const double lq = std::sqrt(q);
  const double M = p.X3 * p.X3 + p.Z3.squaredNorm() + eps;
  tr.N.resize(nu);
  tr.N(0) = (1.0 - M) / (1.0 + M);
  tr.N.tail(nu - 1) = (-2.0 / (1.0 + M)) * p.Z3.transpose();
  ren.D22 = tr.N.cwiseProduct(lr.transpose()) / lq;

  const MatrixXd C2t = -q * ren.D22.transpose() * p.C2;                        // nu x nz
  const MatrixXd D21t = -q * ren.D22.transpose() * p.D21 - p.D12_imp.transpose();  // nu x nv
  tr.R_tilde = MatrixXd(w.r_diag.asDiagonal()) - q * ren.D22.transpose() * ren.D22;

  MatrixXd G(nh, nu);
  G << C2t.transpose(), D21t.transpose(), p.B2_imp;
  VectorXd c = VectorXd::Zero(nh);
  c.head(nz) = p.C2.transpose();
  c.segment(nz, nv) = p.D21.transpose();

  const Eigen::LLT<MatrixXd> r_llt(tr.R_tilde);
  tr.r_tilde_posdef = r_llt.info() == Eigen::Success;
  const MatrixXd Rinv_Gt = r_llt.solve(G.transpose());

  tr.H = p.X.transpose() * p.X;
  tr.H.diagonal().array() += eps;
  tr.H.noalias() += G * Rinv_Gt;
  tr.H.noalias() += q * c * c.transpose();

  const Eigen::LLT<MatrixXd> h_llt(tr.H);
  tr.h_posdef = h_llt.info() == Eigen::Success;
  if (tr.h_posdef) {
    const MatrixXd L = h_llt.matrixL();
    tr.h_min_pivot = L.diagonal().array().square().minCoeff();
  } else {
    tr.h_min_pivot = -std::numeric_limits<double>::infinity();
  }

  const auto H11 = tr.H.topLeftCorner(nz, nz);
  const auto H21 = tr.H.block(nz, 0, nv, nz);
  const auto H22 = tr.H.block(nz, nz, nv, nv);
  const auto H31 = tr.H.block(nz + nv, 0, nz, nz);
  const auto H32 = tr.H.block(nz + nv, nz, nz, nv);
  const auto H33 = tr.H.bottomRightCorner(nz, nz);

  // H22 = Phi - L - L', Lambda = Phi / 2, implicit D11 = L.
  tr.lambda = 0.5 * H22.diagonal();
  const MatrixXd L_imp = -MatrixXd(H22.triangularView<Eigen::StrictlyLower>());

  const double inv_a2 = 1.0 / (p.alpha_bar * p.alpha_bar);
  tr.E = 0.5 * (H11 + inv_a2 * H33 + p.Y1 - p.Y1.transpose());
  const Eigen::PartialPivLU<MatrixXd> e_lu(tr.E);
  const double rcond = e_lu.rcond();
  tr.e_condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();

  // State rows: left-multiply by E^-1.
  MatrixXd K(nz, nz + nv + nu + 1);
  K << H31, H32, p.B2_imp, p.eta_tilde.head(nz);
  const MatrixXd EK = e_lu.solve(K);
  ren.A = EK.leftCols(nz);
  ren.B1 = EK.middleCols(nz, nv);
  ren.B2 = EK.middleCols(nz + nv, nu);
  ren.bias_z = EK.col(nz + nv + nu);

  // Neuron rows: left-multiply by Lambda^-1.
  const VectorXd inv_lambda = tr.lambda.cwiseInverse();
  ren.C1 = inv_lambda.asDiagonal() * (-H21);
  ren.D11 = inv_lambda.asDiagonal() * L_imp;
  ren.D12 = inv_lambda.asDiagonal() * p.D12_imp;
  ren.bias_v = inv_lambda.cwiseProduct(p.eta_tilde.segment(nz, nv));

  ren.C2 = p.C2;
  ren.D21 = p.D21;
  ren.bias_r = p.eta_tilde(nz + nv);
  return out;
}

ExplicitRen materialize(const RenDims& dims, const PerformanceSpec& spec, const DirectParams& p) {
  Materialized m = materialize_traced(dims, spec, p);
  const MaterializeTrace& tr = m.trace;
  if (!tr.h_posdef) {
    throw CertificateError("H is not positive definite (Cholesky failed)");
  }
  if (!(tr.lambda.minCoeff() > 0.0)) {
    throw CertificateError("Lambda has a non-positive diagonal entry");
  }
  if (!(tr.e_condition < kMaxCondition)) {
    std::ostringstream os;
    os << "E is numerically singular (condition estimate " << tr.e_condition << ")";
    throw CertificateError(os.str());
  }
  if (!m.ren.A.allFinite() || !m.ren.D11.allFinite() || !m.ren.D22.allFinite()) {
    throw CertificateError("explicit weights are not finite");
  }
  return std::move(m.ren);
}

double activation(double v) { return std::tanh(v); }

double activation_slope(double v) {
  const double t = std::tanh(v);
  return 1.0 - t * t;
}

VectorXd activation(const VectorXd& v) { return v.array().tanh(); }

StepResult step(const ExplicitRen& ren, const VectorXd& z, const VectorXd& u_bar) {
  const Index nv = ren.n_v();
  StepResult out;
  // Everything in v except the D11 coupling.
  VectorXd v = ren.C1 * z + ren.D12 * u_bar + ren.bias_v;
  out.w.resize(nv);
  for (Index k = 0; k < nv; ++k) {
    const double vk = v(k) + ren.D11.row(k).head(k).dot(out.w.head(k));
    out.w(k) = activation(vk);
  }
  out.z_next = ren.A * z + ren.B1 * out.w + ren.B2 * u_bar + ren.bias_z;
  out.r = ren.C2.dot(z) + ren.D21.dot(out.w) + ren.D22.dot(u_bar) + ren.bias_r;
  return out;
}

Rollout rollout(const ExplicitRen& ren, const VectorXd& z0, const MatrixXd& inputs) {
  if (inputs.rows() == 0) {
    throw UsageError("rollout needs a non-empty input sequence");
  }
  if (inputs.cols() != ren.n_in()) {
    throw UsageError("rollout input width " + std::to_string(inputs.cols()) +
                     " does not match filter width " + std::to_string(ren.n_in()));
  }
  if (z0.size() != ren.n_z()) {
    throw UsageError("initial state has the wrong width");
  }
  const Index T = inputs.rows();
  Rollout out;
  out.residuals.resize(T);
  out.states.resize(T, ren.n_z());
  VectorXd z = z0;
  for (Index k = 0; k < T; ++k) {
    StepResult s = step(ren, z, inputs.row(k).transpose());
    out.residuals(k) = s.r;
    z = std::move(s.z_next);
    out.states.row(k) = z.transpose();
  }
  return out;
}

DirectParams init_params(const RenDims& dims, const PerformanceSpec& spec, std::uint64_t seed,
                         const InitOptions& options) {
  dims.validate();
  if (spec.input_width() != dims.n_in) {
    throw UsageError("performance spec does not match filter input width");
  }
  DirectParams p = DirectParams::zeros(dims, options.epsilon, options.alpha_bar);
  Rng rng(derive_seed(seed, "ren/init"));
  auto fill = [&](auto& m, Index fan_in) {
    const double sd = options.scale / std::sqrt(static_cast<double>(fan_in));
    for (Index j = 0; j < m.cols(); ++j) {
      for (Index i = 0; i < m.rows(); ++i) m(i, j) = sd * rng.normal();
    }
  };
  // Matrices: fan-in is the column count. Vectors: their length.
  fill(p.B2_imp, p.B2_imp.cols());
  fill(p.C2, p.C2.cols());
  fill(p.D12_imp, p.D12_imp.cols());
  fill(p.D21, p.D21.cols());
  fill(p.eta_tilde, p.eta_tilde.rows());
  p.X3 = options.scale * rng.normal();
  p.Y3 = options.scale * rng.normal();
  if (p.Z3.size() > 0) fill(p.Z3, p.Z3.rows());
  fill(p.X, p.X.cols());
  fill(p.Y1, p.Y1.cols());
  p.validate(dims);
  return p;
}

}  // namespace renfdi::ren
