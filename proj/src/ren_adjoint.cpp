// Reverse-mode derivative of the direct parameterization.
//
// The forward map is re-run to recover intermediates, then each stage is
// reversed in the opposite order. Gradients with respect to H are kept as a
// full (non-symmetric) matrix whose entry (i, j) is the sensitivity to the
// entry H(i, j) as it is read by the forward pass; symmetry is accounted for
// when the gradient is pushed into the terms that build H.

#include <cmath>

#include "renfdi/errors.hpp"
#include "renfdi/ren.hpp"

namespace renfdi::ren {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

DirectParams materialize_vjp(const RenDims& dims, const PerformanceSpec& spec,
                             const DirectParams& p, const ExplicitRen& g) {
  p.validate(dims);
  const int nz = dims.n_z, nv = dims.n_v, nu = dims.n_in;
  const int nh = 2 * nz + nv;
  const WeightSpec w = build_weight_spec(spec);
  const double q = -w.Q;
  const double eps = p.epsilon;
  const VectorXd lr = w.r_diag.cwiseSqrt();
  const double lq = std::sqrt(q);

  // ---- forward recomputation
  const double M = p.X3 * p.X3 + p.Z3.squaredNorm() + eps;
  RowVectorXd N(nu);
  N(0) = (1.0 - M) / (1.0 + M);
  N.tail(nu - 1) = (-2.0 / (1.0 + M)) * p.Z3.transpose();
  const RowVectorXd D22 = N.cwiseProduct(lr.transpose()) / lq;
  const MatrixXd C2t = -q * D22.transpose() * p.C2;
  const MatrixXd D21t = -q * D22.transpose() * p.D21 - p.D12_imp.transpose();
  const MatrixXd Rt = MatrixXd(w.r_diag.asDiagonal()) - q * D22.transpose() * D22;
  MatrixXd G(nh, nu);
  G << C2t.transpose(), D21t.transpose(), p.B2_imp;
  VectorXd c = VectorXd::Zero(nh);
  c.head(nz) = p.C2.transpose();
  c.segment(nz, nv) = p.D21.transpose();
  const Eigen::LLT<MatrixXd> r_llt(Rt);
  if (r_llt.info() != Eigen::Success) {
    throw CertificateError("R_tilde is not positive definite");
  }
  const MatrixXd S = r_llt.solve(MatrixXd::Identity(nu, nu));
  MatrixXd H = p.X.transpose() * p.X;
  H.diagonal().array() += eps;
  H.noalias() += G * S * G.transpose();
  H.noalias() += q * c * c.transpose();

  const VectorXd lambda = 0.5 * H.block(nz, nz, nv, nv).diagonal();
  const VectorXd inv_lambda = lambda.cwiseInverse();
  const MatrixXd L_imp = -MatrixXd(H.block(nz, nz, nv, nv).triangularView<Eigen::StrictlyLower>());
  const double inv_a2 = 1.0 / (p.alpha_bar * p.alpha_bar);
  const MatrixXd E = 0.5 * (H.topLeftCorner(nz, nz) + inv_a2 * H.bottomRightCorner(nz, nz) +
                            p.Y1 - p.Y1.transpose());
  const Eigen::PartialPivLU<MatrixXd> e_lu(E);
  MatrixXd K(nz, nz + nv + nu + 1);
  K << H.block(nz + nv, 0, nz, nz), H.block(nz + nv, nz, nz, nv), p.B2_imp,
      p.eta_tilde.head(nz);
  const MatrixXd EK = e_lu.solve(K);

  // ---- reverse
  DirectParams gp = DirectParams::zeros(dims, p.epsilon, p.alpha_bar);
  MatrixXd gH = MatrixXd::Zero(nh, nh);

  // State rows: EK = E^-1 K.
  MatrixXd gEK(nz, nz + nv + nu + 1);
  gEK << g.A, g.B1, g.B2, g.bias_z;
  const MatrixXd gK = e_lu.transpose().solve(gEK);
  const MatrixXd gE = -gK * EK.transpose();
  gH.block(nz + nv, 0, nz, nz) += gK.leftCols(nz);
  gH.block(nz + nv, nz, nz, nv) += gK.middleCols(nz, nv);
  gp.B2_imp += gK.middleCols(nz + nv, nu);
  gp.eta_tilde.head(nz) += gK.col(nz + nv + nu);

  gH.topLeftCorner(nz, nz) += 0.5 * gE;
  gH.bottomRightCorner(nz, nz) += (0.5 * inv_a2) * gE;
  gp.Y1 += 0.5 * (gE - gE.transpose());

  // Neuron rows: Y = Lambda^-1 K_v for K_v in {-H21, L, D12_imp, eta_v}.
  const MatrixXd C1_imp = -H.block(nz, 0, nv, nz);
  VectorXd g_lambda = VectorXd::Zero(nv);
  auto reverse_row_scale = [&](const MatrixXd& gY, const MatrixXd& K_v) -> MatrixXd {
    // Y = diag(1/lambda) K_v:  dK_v = diag(1/lambda) gY,
    // dlambda_j = -sum_k gY_jk K_v_jk / lambda_j^2.
    g_lambda.array() -= (gY.cwiseProduct(K_v)).rowwise().sum().array() *
                        inv_lambda.array().square();
    return inv_lambda.asDiagonal() * gY;
  };
  const MatrixXd gC1_imp = reverse_row_scale(g.C1, C1_imp);
  gH.block(nz, 0, nv, nz) -= gC1_imp;
  const MatrixXd gL =
      reverse_row_scale(g.D11, L_imp).triangularView<Eigen::StrictlyLower>();
  gH.block(nz, nz, nv, nv) -= gL;
  gp.D12_imp += reverse_row_scale(g.D12, p.D12_imp);
  const MatrixXd eta_v = p.eta_tilde.segment(nz, nv);
  gp.eta_tilde.segment(nz, nv) += reverse_row_scale(g.bias_v, eta_v);
  gH.block(nz, nz, nv, nv).diagonal() += 0.5 * g_lambda;

  // Output row is copied.
  gp.C2 += g.C2;
  gp.D21 += g.D21;
  gp.eta_tilde(nz + nv) += g.bias_r;
  RowVectorXd gD22 = g.D22;

  // H = X'X + eps I + G S G' + q c c'.
  const MatrixXd gHs = gH + gH.transpose();
  gp.X += p.X * gHs;
  const MatrixXd gG = gHs * G * S;
  const MatrixXd gS = G.transpose() * gH * G;
  const MatrixXd gRt = -S * gS * S;
  const VectorXd gc = q * gHs * c;
  gp.C2 += gc.head(nz).transpose();
  gp.D21 += gc.segment(nz, nv).transpose();

  // G = [C2t'; D21t'; B2_imp].
  const MatrixXd gC2t = gG.topRows(nz).transpose();        // nu x nz
  const MatrixXd gD21t = gG.middleRows(nz, nv).transpose(); // nu x nv
  gp.B2_imp += gG.bottomRows(nz);

  // C2t = -q D22' C2
  gD22 += -q * (gC2t * p.C2.transpose()).transpose();
  gp.C2 += -q * D22 * gC2t;
  // D21t = -q D22' D21 - D12_imp'
  gD22 += -q * (gD21t * p.D21.transpose()).transpose();
  gp.D21 += -q * D22 * gD21t;
  gp.D12_imp -= gD21t.transpose();
  // Rt = R - q D22' D22
  gD22 += -q * D22 * (gRt + gRt.transpose());

  // D22 = N .* lr' / lq
  const RowVectorXd gN = gD22.cwiseProduct(lr.transpose()) / lq;
  const double inv_1pM = 1.0 / (1.0 + M);
  double gM = gN(0) * (-2.0 * inv_1pM * inv_1pM);
  if (nu > 1) {
    gM += 2.0 * inv_1pM * inv_1pM * gN.tail(nu - 1).dot(p.Z3.transpose());
    gp.Z3 += (-2.0 * inv_1pM) * gN.tail(nu - 1).transpose();
  }
  gp.X3 += 2.0 * p.X3 * gM;
  gp.Z3 += 2.0 * gM * p.Z3;
  gp.Y3 = 0.0;
  return gp;
}

}  // namespace renfdi::ren
