#include "doctest.h"

#include <cmath>

#include "renfdi/errors.hpp"
#include "renfdi/ren.hpp"
#include "renfdi/rng.hpp"
#include "renfdi/signals.hpp"
#include "renfdi/verify.hpp"

using namespace renfdi;
using namespace renfdi::verify;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ren::PerformanceSpec spec_for(int i) { return ren::PerformanceSpec(1e4, 1.0, 100.0, i, 2, 4); }

MatrixXd multisine_inputs(std::uint64_t seed, int width = 6, Eigen::Index T = 80) {
  signals::MultisineSpec s = signals::MultisineSpec::road();
  s.sample_rate = 4.0;
  s.include_endpoint = false;
  MatrixXd in(T, width);
  for (int c = 0; c < width; ++c) {
    in.col(c) = signals::multisine(s, derive_seed(seed, "col", c)).samples.head(T);
  }
  return in;
}

VectorXd random_state(Rng& rng, int n) {
  VectorXd z(n);
  for (int k = 0; k < n; ++k) z(k) = rng.normal();
  return z;
}

}  // namespace

TEST_CASE("well-posedness: zero trainables and fuzzing") {
  ren::RenDims d;
  const WellPosednessReport z = check_wellposed(d, spec_for(1), ren::DirectParams::zeros(d));
  CHECK(z.pass());
  CHECK(z.h_min_pivot == doctest::Approx(1e-4).epsilon(1e-9));
  CHECK(z.n_norm < 1.0);
  for (int seed = 0; seed < 100; ++seed) {
    const auto s = spec_for(1 + seed % 4);
    const WellPosednessReport r = check_wellposed(d, s, ren::init_params(d, s, seed, {2.0}));
    CHECK(r.pass());
    CHECK(r.d11_strictly_lower);
    CHECK(r.lambda_min > 0.0);
  }
}

TEST_CASE("well-posedness: corrupted D11 is reported, not thrown") {
  ren::RenDims d;
  ren::Materialized m = ren::materialize_traced(d, spec_for(1), ren::init_params(d, spec_for(1), 3));
  CHECK(check_wellposed(m.trace, m.ren).pass());
  m.ren.D11(0, 1) = 0.5;
  const WellPosednessReport r = check_wellposed(m.trace, m.ren);
  CHECK_FALSE(r.d11_strictly_lower);
  CHECK_FALSE(r.pass());
  CHECK_FALSE(is_strictly_lower(MatrixXd::Identity(3, 3)));
  CHECK(is_strictly_lower(MatrixXd::Zero(3, 3)));
}

TEST_CASE("contraction test") {
  ren::RenDims d;
  const ren::ExplicitRen zero = ren::ExplicitRen::zeros(d);
  const MatrixXd in = multisine_inputs(1);
  VectorXd a = VectorXd::Ones(8), b = VectorXd::Zero(8);
  CHECK_THROWS_AS(contraction_test(zero, in, a, a, 0.95), UsageError);

  const ContractionResult z = contraction_test(zero, in, a, b, 0.95);
  CHECK(z.converged);
  CHECK(z.converged_at == 1);
  CHECK(z.pass);

  // Negative control: a slow linear mode fails the rate criterion.
  ren::ExplicitRen slow = zero;
  slow.A = 0.99 * MatrixXd::Identity(8, 8);
  const ContractionResult s = contraction_test(slow, in, a, b, 0.95);
  CHECK_FALSE(s.pass);
  CHECK_FALSE(s.converged);
  CHECK(s.geometric_mean == doctest::Approx(0.99));

  // Untrained random filters: the guarantee is architectural.
  Rng rng(10);
  for (int seed = 0; seed < 20; ++seed) {
    const auto sp = spec_for(1 + seed % 4);
    const ren::ExplicitRen r = ren::materialize(d, sp, ren::init_params(d, sp, seed));
    const ContractionResult c =
        contraction_test(r, multisine_inputs(seed), random_state(rng, 8), random_state(rng, 8),
                         0.95);
    CHECK(c.pass);
    CHECK(c.geometric_mean <= 0.97);
  }
}

TEST_CASE("IQC gap: identities and an independent evaluation") {
  ren::RenDims d;
  const auto sp = spec_for(2);
  const ren::ExplicitRen r = ren::materialize(d, sp, ren::init_params(d, sp, 4));
  const MatrixXd a = multisine_inputs(5), b = multisine_inputs(6);
  const VectorXd z0 = VectorXd::Zero(8);

  const IqcGap same = iqc_gap(r, sp, a, a, z0);
  CHECK(same.gap.isZero(0));
  CHECK(same.pass);

  const IqcGap g = iqc_gap(r, sp, a, b, z0);
  const VectorXd dr = ren::rollout(r, z0, b).residuals - ren::rollout(r, z0, a).residuals;
  double acc = 0.0, worst = 0.0;
  for (Eigen::Index k = 0; k < 80; ++k) {
    const auto du = (b.row(k) - a.row(k)).eval();
    // (u1, u2) and y_2 weighted by beta; y_1, y_3, y_4 by gamma.
    acc += -100.0 * dr(k) * dr(k) + 1e4 * (du(0) * du(0) + du(1) * du(1)) + du(2) * du(2) +
           1e4 * du(3) * du(3) + du(4) * du(4) + du(5) * du(5);
    worst = std::max(worst, std::abs(acc - g.gap(k)) / std::max(1.0, std::abs(acc)));
  }
  CHECK(worst < 1e-12);
  CHECK(g.pass);
  CHECK(g.tolerance == doctest::Approx(1e-8 * g.energy));

  CHECK_THROWS_AS(iqc_gap(r, sp, a, b.topRows(40), z0), UsageError);
}

TEST_CASE("IQC gap restricted to the own sensor is the sensitivity inequality") {
  ren::RenDims d;
  const auto sp = spec_for(1);
  const ren::ExplicitRen r = ren::materialize(d, sp, ren::init_params(d, sp, 8));
  const MatrixXd a = multisine_inputs(9);
  MatrixXd b = a;
  const VectorXd f = signals::multisine(signals::MultisineSpec::fault(), 3).samples;
  b.col(2) += f;
  const VectorXd z0 = VectorXd::Zero(8);
  const IqcGap g = iqc_gap(r, sp, a, b, z0);
  const VectorXd dr = ren::rollout(r, z0, b).residuals - ren::rollout(r, z0, a).residuals;
  double acc = 0.0;
  for (Eigen::Index k = 0; k < 80; ++k) {
    const double dy = b(k, 2) - a(k, 2);
    acc += 1e4 * dy * dy - 100.0 * dr(k) * dr(k);
    CHECK(g.gap(k) == doctest::Approx(acc).epsilon(1e-10));
  }
  CHECK(g.min_gap >= -g.tolerance);
}

TEST_CASE("IQC and bound checks: random trials and negative controls") {
  ren::RenDims d;
  for (int i = 1; i <= 4; ++i) {
    const auto sp = spec_for(i);
    const ren::ExplicitRen r = ren::materialize(d, sp, ren::init_params(d, sp, 40 + i));
    for (int t = 0; t < 25; ++t) {
      const MatrixXd a = multisine_inputs(100 * i + t), b = multisine_inputs(7000 + 100 * i + t);
      CHECK(iqc_gap(r, sp, a, b, VectorXd::Zero(8)).pass);
      const VectorXd f =
          signals::synth_fault(signals::MultisineSpec::fault(), i, 40, 50 + t).signal;
      CHECK(sensitivity_bound_check(r, sp, a, f).pass);
      MatrixXd others = MatrixXd::Zero(80, 4);
      for (int j = 1; j <= 4; ++j) {
        if (j != i) others.col(j - 1) = signals::synth_fault(signals::MultisineSpec::fault(), j,
                                                             0, 900 + 10 * t + j).signal;
      }
      const BoundCheck n = insensitivity_bound_check(r, sp, a, others);
      CHECK(n.pass);
      CHECK(n.lhs.size() == 80);
    }
  }

  // A filter that amplifies sensor 3 tenfold too much violates everything.
  ren::ExplicitRen loud = ren::ExplicitRen::zeros(d);
  loud.D22(4) = 100.0;  // sensor 3, a gamma channel for filter 1
  const auto sp = spec_for(1);
  const MatrixXd a = multisine_inputs(1), b = multisine_inputs(2);
  CHECK_FALSE(iqc_gap(loud, sp, a, b, VectorXd::Zero(8)).pass);
  MatrixXd others = MatrixXd::Zero(80, 4);
  others.col(2) = signals::multisine(signals::MultisineSpec::fault(), 5).samples;
  CHECK_FALSE(insensitivity_bound_check(loud, sp, a, others).pass);
  loud.D22(2) = 11.0;  // own sensor gain above sqrt(beta/q) = 10
  CHECK_FALSE(sensitivity_bound_check(loud, sp, a, others.col(2)).pass);
}

TEST_CASE("bound checks: trivial cases and argument errors") {
  ren::RenDims d;
  const auto sp = spec_for(1);
  const ren::ExplicitRen r = ren::materialize(d, sp, ren::init_params(d, sp, 2));
  const MatrixXd a = multisine_inputs(3);
  const BoundCheck s = sensitivity_bound_check(r, sp, a, VectorXd::Zero(80));
  CHECK(s.lhs.isZero(0));
  CHECK(s.rhs.isZero(0));
  CHECK(s.pass);
  const BoundCheck n = insensitivity_bound_check(r, sp, a, MatrixXd::Zero(80, 4));
  CHECK(n.pass);
  CHECK_THROWS_AS(sensitivity_bound_check(r, sp, a, VectorXd::Zero(79)), UsageError);
  MatrixXd own = MatrixXd::Zero(80, 4);
  own(50, 0) = 0.01;
  CHECK_THROWS_AS(insensitivity_bound_check(r, sp, a, own), UsageError);

  // Exact gains of a pure feedthrough filter.
  ren::ExplicitRen pass_through = ren::ExplicitRen::zeros(d);
  pass_through.D22(2) = 10.0;
  const VectorXd f = VectorXd::LinSpaced(80, 0.0, 0.1);
  const BoundCheck e = sensitivity_bound_check(pass_through, sp, a, f);
  CHECK(e.pass);
  CHECK((e.lhs - e.rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("suite on a random bank") {
  ren::RenDims d;
  std::vector<BankFilter> bank;
  for (int i = 1; i <= 4; ++i) {
    bank.push_back({d, spec_for(i), ren::init_params(d, spec_for(i), 300 + i)});
  }
  SuiteOptions o;
  o.trials = 10;
  o.contraction_pairs = 5;
  const auto r1 = run_suite(bank, o);
  const auto r2 = run_suite(bank, o);
  CHECK(r1.size() == 4 * 7);
  for (std::size_t k = 0; k < r1.size(); ++k) {
    CHECK_MESSAGE(r1[k].pass, r1[k].name);
    CHECK(r1[k].name == r2[k].name);
    CHECK(r1[k].worst_margin == r2[k].worst_margin);
    CHECK(r1[k].seed == r2[k].seed);
  }
  const auto j = to_json(r1);
  CHECK(j.size() == r1.size());
  CHECK(j[0].contains("name"));
  CHECK(j[0].contains("seed"));
  CHECK(j[0].contains("pass"));
  CHECK(j[0].contains("worst_margin"));
}
