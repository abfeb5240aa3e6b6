#include "renfdi/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "renfdi/errors.hpp"
#include "renfdi/rng.hpp"
#include "renfdi/signals.hpp"

namespace renfdi::verify {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

bool WellPosednessReport::pass() const {
  return h_posdef && lambda_positive && d11_strictly_lower && e_condition < ren::kMaxCondition &&
         n_norm < 1.0;
}

bool is_strictly_lower(const MatrixXd& m) {
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i <= std::min(j, m.rows() - 1); ++i) {
      if (m(i, j) != 0.0) return false;
    }
  }
  return true;
}

WellPosednessReport check_wellposed(const ren::MaterializeTrace& tr, const ren::ExplicitRen& ren) {
  WellPosednessReport r;
  r.h_posdef = tr.h_posdef;
  r.h_min_pivot = tr.h_min_pivot;
  r.lambda_min = tr.lambda.size() ? tr.lambda.minCoeff() : 0.0;
  r.lambda_positive = tr.lambda.size() > 0 && r.lambda_min > 0.0;
  r.e_condition = tr.e_condition;
  r.d11_strictly_lower = is_strictly_lower(ren.D11);
  r.n_norm = tr.N.norm();  // a single row: its 2-norm is the largest singular value
  return r;
}

WellPosednessReport check_wellposed(const ren::RenDims& dims, const ren::PerformanceSpec& spec,
                                    const ren::DirectParams& params) {
  const ren::Materialized m = ren::materialize_traced(dims, spec, params);
  return check_wellposed(m.trace, m.ren);
}

ContractionResult contraction_test(const ren::ExplicitRen& ren, const MatrixXd& inputs,
                                   const VectorXd& z0_a, const VectorXd& z0_b,
                                   double alpha_bar) {
  const double d0 = (z0_a - z0_b).norm();
  if (!(d0 > 0.0)) throw UsageError("contraction test needs two distinct initial states");
  const ren::Rollout a = ren::rollout(ren, z0_a, inputs);
  const ren::Rollout b = ren::rollout(ren, z0_b, inputs);

  ContractionResult out;
  double prev = d0;
  double log_sum = 0.0;
  for (Index k = 0; k < inputs.rows(); ++k) {
    const double d = (a.states.row(k) - b.states.row(k)).norm();
    const double ratio = d / prev;
    out.ratios.push_back(ratio);
    if (ratio == 0.0) {
      log_sum = -std::numeric_limits<double>::infinity();
    } else {
      log_sum += std::log(ratio);
    }
    prev = d;
    if (d < kConvergenceFloor * d0) {
      out.converged = true;
      out.converged_at = k + 1;
      break;
    }
  }
  out.geometric_mean = std::exp(log_sum / static_cast<double>(out.ratios.size()));
  out.pass = out.geometric_mean <= alpha_bar + kContractionMargin;
  return out;
}

namespace {

void check_same_shape(const MatrixXd& a, const MatrixXd& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw UsageError(std::string(what) + ": sequences differ in length or width");
  }
}

// Running sums of squared norms, entry k covering samples 0..k.
VectorXd running_energy(const VectorXd& per_sample) {
  VectorXd out(per_sample.size());
  double acc = 0.0;
  for (Index k = 0; k < per_sample.size(); ++k) {
    acc += per_sample(k);
    out(k) = acc;
  }
  return out;
}

BoundCheck bound_check(const ren::ExplicitRen& ren, const MatrixXd& healthy,
                       const MatrixXd& faulty, const VectorXd& fault_energy_per_sample,
                       double gain) {
  const VectorXd z0 = VectorXd::Zero(ren.n_z());
  const VectorXd dr =
      ren::rollout(ren, z0, faulty).residuals - ren::rollout(ren, z0, healthy).residuals;
  BoundCheck out;
  out.lhs = running_energy(dr.cwiseAbs2()).cwiseSqrt();
  out.rhs = gain * running_energy(fault_energy_per_sample).cwiseSqrt();
  out.pass = true;
  out.worst_margin = 1.0;
  for (Index k = 0; k < dr.size(); ++k) {
    if (out.rhs(k) > 0.0) {
      out.worst_margin = std::min(out.worst_margin, 1.0 - out.lhs(k) / out.rhs(k));
    }
    if (out.lhs(k) > out.rhs(k) * (1.0 + kBoundRelTol)) out.pass = false;
  }
  return out;
}

}  // namespace

IqcGap iqc_gap(const ren::ExplicitRen& ren, const ren::PerformanceSpec& spec,
               const MatrixXd& input_a, const MatrixXd& input_b, const VectorXd& z0) {
  check_same_shape(input_a, input_b, "iqc_gap");
  const ren::WeightSpec w = ren::build_weight_spec(spec);
  const VectorXd dr = ren::rollout(ren, z0, input_b).residuals -
                      ren::rollout(ren, z0, input_a).residuals;
  const MatrixXd du = input_b - input_a;
  // du' R du split as beta |du|^2 + gamma |dy~1|^2 + beta |dy_i|^2 + gamma |dy~2|^2.
  const VectorXd weighted = du.cwiseAbs2() * w.r_diag;
  IqcGap out;
  out.gap = running_energy(weighted + w.Q * dr.cwiseAbs2());
  out.min_gap = out.gap.minCoeff();
  out.energy = weighted.sum();
  out.tolerance = 1e-8 * out.energy;
  out.pass = out.min_gap >= -out.tolerance;
  return out;
}

BoundCheck sensitivity_bound_check(const ren::ExplicitRen& ren, const ren::PerformanceSpec& spec,
                                   const MatrixXd& healthy_inputs, const VectorXd& fault_i) {
  if (fault_i.size() != healthy_inputs.rows()) {
    throw UsageError("sensitivity check: fault length does not match the input length");
  }
  MatrixXd faulty = healthy_inputs;
  faulty.col(spec.l() + spec.sensor_index() - 1) += fault_i;
  return bound_check(ren, healthy_inputs, faulty, fault_i.cwiseAbs2(), spec.sensitivity_gain());
}

BoundCheck insensitivity_bound_check(const ren::ExplicitRen& ren,
                                     const ren::PerformanceSpec& spec,
                                     const MatrixXd& healthy_inputs, const MatrixXd& faults) {
  if (faults.rows() != healthy_inputs.rows() || faults.cols() != spec.m()) {
    throw UsageError("insensitivity check: fault matrix must be T x m");
  }
  if (faults.col(spec.sensor_index() - 1).cwiseAbs().maxCoeff() != 0.0) {
    throw UsageError("insensitivity check: the fault on the filter's own sensor must be zero");
  }
  MatrixXd faulty = healthy_inputs;
  faulty.rightCols(spec.m()) += faults;
  return bound_check(ren, healthy_inputs, faulty, faults.rowwise().squaredNorm(),
                     spec.insensitivity_gain());
}

nlohmann::json to_json(const std::vector<CheckResult>& results) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results) {
    arr.push_back({{"name", r.name},
                   {"seed", r.seed},
                   {"pass", r.pass},
                   {"worst_margin", r.worst_margin}});
  }
  return arr;
}

namespace {

MatrixXd random_inputs(std::uint64_t seed, int width, Index horizon) {
  signals::MultisineSpec spec = signals::MultisineSpec::road();
  spec.sample_rate = 4.0;
  spec.include_endpoint = false;
  spec.duration = static_cast<double>(horizon) / spec.sample_rate;
  MatrixXd in(horizon, width);
  for (int c = 0; c < width; ++c) {
    in.col(c) = signals::multisine(spec, derive_seed(seed, "verify/input", c)).samples;
  }
  return in;
}

VectorXd random_fault(std::uint64_t seed, Index horizon) {
  signals::MultisineSpec spec = signals::MultisineSpec::fault();
  spec.duration = static_cast<double>(horizon) / spec.sample_rate;
  return signals::synth_fault(spec, 1, horizon / 2, seed).signal;
}

}  // namespace

std::vector<CheckResult> run_suite(const std::vector<BankFilter>& bank, const SuiteOptions& o) {
  std::vector<CheckResult> out;
  for (const auto& f : bank) {
    const int i = f.spec.sensor_index();
    const std::string tag = "/filter" + std::to_string(i);
    const std::uint64_t fseed = derive_seed(o.seed, "verify/filter", static_cast<std::uint64_t>(i));
    const int width = f.dims.n_in;

    const WellPosednessReport wp = check_wellposed(f.dims, f.spec, f.params);
    out.push_back({"wellposed" + tag, fseed, wp.pass(), 1.0 - wp.n_norm});
    if (!wp.pass()) continue;
    const ren::ExplicitRen ren = ren::materialize(f.dims, f.spec, f.params);

    {
      CheckResult contraction{"contraction" + tag, fseed, true,
                              std::numeric_limits<double>::infinity()};
      CheckResult convergence{"convergence" + tag, fseed, true, 0.0};
      Index slowest = 0;
      for (int t = 0; t < o.contraction_pairs; ++t) {
        Rng rng(derive_seed(fseed, "contraction", static_cast<std::uint64_t>(t)));
        VectorXd za(f.dims.n_z), zb(f.dims.n_z);
        for (Index k = 0; k < f.dims.n_z; ++k) za(k) = o.state_scale * rng.normal();
        for (Index k = 0; k < f.dims.n_z; ++k) zb(k) = o.state_scale * rng.normal();
        const MatrixXd in =
            random_inputs(derive_seed(fseed, "contraction/input", t), width, o.horizon);
        const ContractionResult c = contraction_test(ren, in, za, zb, f.params.alpha_bar);
        contraction.pass = contraction.pass && c.pass;
        contraction.worst_margin =
            std::min(contraction.worst_margin,
                     f.params.alpha_bar + kContractionMargin - c.geometric_mean);
        convergence.pass = convergence.pass && c.converged;
        slowest = std::max(slowest, c.converged ? c.converged_at : o.horizon + 1);
      }
      // Margin: samples to spare before the end of the horizon.
      convergence.worst_margin = static_cast<double>(o.horizon - slowest);
      out.push_back(contraction);
      out.push_back(convergence);
    }

    CheckResult iqc{"iqc" + tag, fseed, true, std::numeric_limits<double>::infinity()};
    CheckResult sens{"sensitivity" + tag, fseed, true, std::numeric_limits<double>::infinity()};
    CheckResult insens{"insensitivity" + tag, fseed, true,
                       std::numeric_limits<double>::infinity()};
    CheckResult implied{"iqc_implies_bounds" + tag, fseed, true, 0.0};
    for (int t = 0; t < o.trials; ++t) {
      const auto ts = static_cast<std::uint64_t>(t);
      const MatrixXd a = random_inputs(derive_seed(fseed, "iqc/a", ts), width, o.horizon);
      const MatrixXd b = random_inputs(derive_seed(fseed, "iqc/b", ts), width, o.horizon);
      const IqcGap g = iqc_gap(ren, f.spec, a, b, VectorXd::Zero(f.dims.n_z));
      iqc.pass = iqc.pass && g.pass;
      iqc.worst_margin = std::min(iqc.worst_margin, (g.min_gap + g.tolerance) / g.energy);

      // Fault on the own sensor only.
      const MatrixXd healthy = random_inputs(derive_seed(fseed, "bound/u", ts), width, o.horizon);
      const VectorXd fi = random_fault(derive_seed(fseed, "bound/fi", ts), o.horizon);
      const BoundCheck s = sensitivity_bound_check(ren, f.spec, healthy, fi);
      MatrixXd own = healthy;
      own.col(f.spec.l() + i - 1) += fi;
      const IqcGap gs = iqc_gap(ren, f.spec, healthy, own, VectorXd::Zero(f.dims.n_z));

      // Faults on every other sensor jointly.
      MatrixXd others = MatrixXd::Zero(o.horizon, f.spec.m());
      for (int j = 1; j <= f.spec.m(); ++j) {
        if (j == i) continue;
        others.col(j - 1) =
            random_fault(derive_seed(fseed, "bound/fj", ts * 64 + static_cast<std::uint64_t>(j)),
                         o.horizon);
      }
      const BoundCheck n = insensitivity_bound_check(ren, f.spec, healthy, others);
      MatrixXd other_in = healthy;
      other_in.rightCols(f.spec.m()) += others;
      const IqcGap gn = iqc_gap(ren, f.spec, healthy, other_in, VectorXd::Zero(f.dims.n_z));

      sens.pass = sens.pass && s.pass;
      sens.worst_margin = std::min(sens.worst_margin, s.worst_margin);
      insens.pass = insens.pass && n.pass;
      insens.worst_margin = std::min(insens.worst_margin, n.worst_margin);
      if ((gs.pass && !s.pass) || (gn.pass && !n.pass)) implied.pass = false;
    }
    out.push_back(iqc);
    out.push_back(sens);
    out.push_back(insens);
    out.push_back(implied);
  }
  return out;
}

}  // namespace renfdi::verify
