#include "renfdi/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "renfdi/errors.hpp"
#include "renfdi/parallel.hpp"
#include "renfdi/rng.hpp"

namespace renfdi::training {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

void TrainConfig::validate(Index horizon) const {
  if (k0 < 0 || k0 >= horizon) {
    throw UsageError("k0 = " + std::to_string(k0) + " must lie in [0, " +
                     std::to_string(horizon) + ")");
  }
  if (!(step_size > 0.0)) throw UsageError("step size must be positive");
  if (epochs < 0) throw UsageError("epochs must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw UsageError("Adam moment coefficients must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw UsageError("Adam divisor offset must be positive");
  if (grad_check_every < 0 || grad_check_coords < 0) {
    throw UsageError("gradient-check cadence must be non-negative");
  }
  if (!(init_scale >= 0.0)) throw UsageError("init_scale must be non-negative");
}

json to_json(const TrainConfig& c) {
  return {{"k0", c.k0},
          {"epochs", c.epochs},
          {"step_size", c.step_size},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"seed", c.seed},
          {"grad_check_every", c.grad_check_every},
          {"grad_check_coords", c.grad_check_coords},
          {"init_scale", c.init_scale}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.k0 = j.value("k0", c.k0);
  c.epochs = j.value("epochs", c.epochs);
  c.step_size = j.value("step_size", c.step_size);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.seed = j.value("seed", c.seed);
  c.grad_check_every = j.value("grad_check_every", c.grad_check_every);
  c.grad_check_coords = j.value("grad_check_coords", c.grad_check_coords);
  c.init_scale = j.value("init_scale", c.init_scale);
  return c;
}

// ------------------------------------------------------------------ cost / BPTT

namespace {

void check_pairs(const std::vector<dataset::TrainingPair>& pairs, int n_in, int k0) {
  if (pairs.empty()) throw UsageError("cost needs at least one training pair");
  for (const auto& p : pairs) {
    if (p.inputs.cols() != n_in) throw UsageError("training pair input width mismatch");
    if (p.inputs.rows() != p.target.size()) {
      throw UsageError("training pair " + p.id + " has inputs and target of different length");
    }
    if (k0 < 0 || k0 >= p.target.size()) {
      throw UsageError("k0 outside the horizon of pair " + p.id);
    }
  }
}

void accumulate(ren::ExplicitRen& acc, const ren::ExplicitRen& g) {
  acc.A += g.A;
  acc.B1 += g.B1;
  acc.B2 += g.B2;
  acc.C1 += g.C1;
  acc.D11 += g.D11;
  acc.D12 += g.D12;
  acc.C2 += g.C2;
  acc.D21 += g.D21;
  acc.D22 += g.D22;
  acc.bias_z += g.bias_z;
  acc.bias_v += g.bias_v;
  acc.bias_r += g.bias_r;
}

ren::RenDims dims_of(const ren::ExplicitRen& r) { return {r.n_z(), r.n_v(), r.n_in(), 1}; }

}  // namespace

double cost(const ren::DirectParams& params, const ren::RenDims& dims,
            const ren::PerformanceSpec& spec, const std::vector<dataset::TrainingPair>& pairs,
            int k0) {
  check_pairs(pairs, dims.n_in, k0);
  const ren::ExplicitRen r = ren::materialize(dims, spec, params);
  const VectorXd z0 = VectorXd::Zero(dims.n_z);
  std::vector<double> per_pair(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t s) {
    const ren::Rollout ro = ren::rollout(r, z0, pairs[s].inputs);
    const Index T = ro.residuals.size();
    per_pair[s] = (ro.residuals - pairs[s].target).tail(T - k0).squaredNorm();
  });
  double J = 0.0;
  for (double v : per_pair) J += v;
  return J;
}

double rollout_cost_and_grad(const ren::ExplicitRen& r, const dataset::TrainingPair& pair, int k0,
                             ren::ExplicitRen& g) {
  const Index T = pair.inputs.rows();
  const Index nz = r.n_z(), nv = r.n_v();
  const MatrixXd& U = pair.inputs;

  // Forward, keeping the pre-update states and neuron outputs.
  MatrixXd Z(T, nz);
  MatrixXd W(T, nv);
  VectorXd res(T);
  VectorXd z = VectorXd::Zero(nz);
  for (Index k = 0; k < T; ++k) {
    Z.row(k) = z.transpose();
    ren::StepResult s = ren::step(r, z, U.row(k).transpose());
    W.row(k) = s.w.transpose();
    res(k) = s.r;
    z = std::move(s.z_next);
  }
  VectorXd rbar = VectorXd::Zero(T);
  double J = 0.0;
  for (Index k = k0; k < T; ++k) {
    const double e = res(k) - pair.target(k);
    J += e * e;
    rbar(k) = 2.0 * e;
  }

  // Reverse. GZ row k is the adjoint of z_{k+1}, GV row k that of v_k.
  MatrixXd GZ(T, nz);
  MatrixXd GV(T, nv);
  VectorXd gz_next = VectorXd::Zero(nz);
  VectorXd gw(nv);
  VectorXd gv(nv);
  const MatrixXd B1t = r.B1.transpose();
  const MatrixXd At = r.A.transpose();
  const MatrixXd C1t = r.C1.transpose();
  for (Index k = T - 1; k >= 0; --k) {
    GZ.row(k) = gz_next.transpose();
    gw.noalias() = B1t * gz_next;
    gw += rbar(k) * r.D21.transpose();
    // Neuron j feeds only neurons after it, so adjoints settle in reverse order.
    for (Index j = nv - 1; j >= 0; --j) {
      const double wj = W(k, j);
      gv(j) = gw(j) * (1.0 - wj * wj);
      if (j > 0) gw.head(j) += gv(j) * r.D11.row(j).head(j).transpose();
    }
    GV.row(k) = gv.transpose();
    VectorXd gz = At * gz_next;
    gz += rbar(k) * r.C2.transpose();
    gz.noalias() += C1t * gv;
    gz_next = std::move(gz);
  }

  g.A.noalias() += GZ.transpose() * Z;
  g.B1.noalias() += GZ.transpose() * W;
  g.B2.noalias() += GZ.transpose() * U;
  g.bias_z += GZ.colwise().sum().transpose();
  g.C1.noalias() += GV.transpose() * Z;
  g.D11 += MatrixXd(GV.transpose() * W).triangularView<Eigen::StrictlyLower>().toDenseMatrix();
  g.D12.noalias() += GV.transpose() * U;
  g.bias_v += GV.colwise().sum().transpose();
  g.C2.noalias() += rbar.transpose() * Z;
  g.D21.noalias() += rbar.transpose() * W;
  g.D22.noalias() += rbar.transpose() * U;
  g.bias_r += rbar.sum();
  return J;
}

CostGradient cost_and_gradient(const ren::DirectParams& params, const ren::RenDims& dims,
                               const ren::PerformanceSpec& spec,
                               const std::vector<dataset::TrainingPair>& pairs, int k0) {
  check_pairs(pairs, dims.n_in, k0);
  const ren::ExplicitRen r = ren::materialize(dims, spec, params);
  std::vector<ren::ExplicitRen> grads(pairs.size(), ren::ExplicitRen::zeros(dims_of(r)));
  std::vector<double> costs(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t s) {
    costs[s] = rollout_cost_and_grad(r, pairs[s], k0, grads[s]);
  });
  ren::ExplicitRen total = ren::ExplicitRen::zeros(dims);
  double J = 0.0;
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    accumulate(total, grads[s]);
    J += costs[s];
  }
  return {J, ren::materialize_vjp(dims, spec, params, total)};
}

ren::DirectParams gradient(const ren::DirectParams& params, const ren::RenDims& dims,
                           const ren::PerformanceSpec& spec,
                           const std::vector<dataset::TrainingPair>& pairs, int k0) {
  return cost_and_gradient(params, dims, spec, pairs, k0).grad;
}

double gradient_check(const ren::DirectParams& params, const ren::RenDims& dims,
                      const ren::PerformanceSpec& spec,
                      const std::vector<dataset::TrainingPair>& pairs, int k0,
                      const std::vector<Index>& coords) {
  const VectorXd g = ren::flatten_trainables(gradient(params, dims, spec, pairs, k0));
  const VectorXd theta = ren::flatten_trainables(params);
  double worst = 0.0;
  ren::DirectParams probe = params;
  for (Index c : coords) {
    const double h = 1e-5 * (1.0 + std::abs(theta(c)));
    VectorXd t = theta;
    t(c) = theta(c) + h;
    ren::assign_trainables(probe, dims, t);
    const double jp = cost(probe, dims, spec, pairs, k0);
    t(c) = theta(c) - h;
    ren::assign_trainables(probe, dims, t);
    const double jm = cost(probe, dims, spec, pairs, k0);
    const double fd = (jp - jm) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(g(c)), 1e-6});
    worst = std::max(worst, std::abs(fd - g(c)) / denom);
  }
  return worst;
}

// ------------------------------------------------------------------ optimizer

Adam::Adam(Index size, double step_size, double beta1, double beta2, double eps)
    : step_size_(step_size),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(VectorXd::Zero(size)),
      v_(VectorXd::Zero(size)) {}

void Adam::update(VectorXd& params, const VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -=
      step_size_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

TrainResult train_from(ren::DirectParams init, const ren::RenDims& dims,
                       const ren::PerformanceSpec& spec,
                       const std::vector<dataset::TrainingPair>& pairs, const TrainConfig& config,
                       const EpochCallback& on_epoch) {
  if (pairs.empty()) throw UsageError("training needs at least one training pair");
  config.validate(pairs.front().target.size());
  const auto t_start = std::chrono::steady_clock::now();

  TrainResult out;
  out.params = std::move(init);
  VectorXd theta = ren::flatten_trainables(out.params);
  Adam adam(theta.size(), config.step_size, config.beta1, config.beta2, config.adam_eps);
  Rng probe_rng(derive_seed(config.seed, "train/grad-check"));

  for (int epoch = 0; epoch <= config.epochs; ++epoch) {
    CostGradient cg = cost_and_gradient(out.params, dims, spec, pairs, config.k0);
    const VectorXd g = ren::flatten_trainables(cg.grad);
    const double gnorm = g.norm();
    if (!std::isfinite(cg.cost) || !std::isfinite(gnorm)) {
      throw TrainingError("non-finite loss or gradient at epoch " + std::to_string(epoch));
    }
    out.report.loss.push_back(cg.cost);
    out.report.grad_norm.push_back(gnorm);
    if (on_epoch) on_epoch(epoch, cg.cost, gnorm);
    if (config.grad_check_every > 0 && epoch % config.grad_check_every == 0) {
      std::vector<Index> coords;
      for (int k = 0; k < config.grad_check_coords; ++k) {
        coords.push_back(probe_rng.uniform_int(0, theta.size() - 1));
      }
      out.report.grad_check_worst = std::max(
          out.report.grad_check_worst,
          gradient_check(out.params, dims, spec, pairs, config.k0, coords));
    }
    if (epoch == config.epochs) break;
    adam.update(theta, g);
    ren::assign_trainables(out.params, dims, theta);
  }
  out.report.initial_loss = out.report.loss.front();
  out.report.final_loss = out.report.loss.back();
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

TrainResult train_filter(int filter_index, const ren::RenDims& dims,
                         const ren::PerformanceSpec& spec, const dataset::ScenarioSet& set,
                         const TrainConfig& config, const EpochCallback& on_epoch) {
  if (spec.sensor_index() != filter_index) {
    throw UsageError("performance spec is for sensor " + std::to_string(spec.sensor_index()) +
                     ", not filter " + std::to_string(filter_index));
  }
  const auto pairs = dataset::training_pairs(set, filter_index);
  ren::InitOptions init;
  init.scale = config.init_scale;
  ren::DirectParams p0 = ren::init_params(
      dims, spec, derive_seed(config.seed, "filter", static_cast<std::uint64_t>(filter_index)),
      init);
  return train_from(std::move(p0), dims, spec, pairs, config, on_epoch);
}

void write_train_log(const std::filesystem::path& path, const TrainReport& report) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << "epoch,loss,grad_norm\n";
  char buf[96];
  for (std::size_t e = 0; e < report.loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e, report.loss[e], report.grad_norm[e]);
    os << buf;
  }
}

// ------------------------------------------------------------------ bank / RMSE

std::vector<ren::ExplicitRen> FilterBank::materialized() const {
  std::vector<ren::ExplicitRen> out;
  out.reserve(filters.size());
  for (const auto& f : filters) out.push_back(ren::materialize(f.dims, f.spec, f.params));
  return out;
}

std::filesystem::path bank_file(const std::filesystem::path& dir, int filter_index) {
  return dir / ("filter_" + std::to_string(filter_index) + ".json");
}

FilterBank load_bank(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("bank directory " + dir.string() + " does not exist");
  }
  FilterBank bank;
  for (int i = 1;; ++i) {
    const auto path = bank_file(dir, i);
    if (!std::filesystem::exists(path)) break;
    bank.filters.push_back(ren::load_checkpoint(path));
    if (bank.filters.back().spec.sensor_index() != i) {
      throw DataError(path.string() + " holds the filter for sensor " +
                      std::to_string(bank.filters.back().spec.sensor_index()));
    }
  }
  if (bank.filters.empty()) throw DataError("no filter_<i>.json files in " + dir.string());
  return bank;
}

std::string label_name(const std::vector<int>& label) {
  if (label.empty()) return "Healthy";
  std::string s = label.size() == 1 ? "Sensor " : "Sensors ";
  for (std::size_t k = 0; k < label.size(); ++k) {
    if (k > 0) s += " & ";
    s += std::to_string(label[k]);
  }
  return s;
}

std::string RmseTable::to_csv() const {
  std::ostringstream os;
  os << "scenario,count";
  for (Index i = 0; i < mean_rmse.cols(); ++i) os << ",detector_" << (i + 1);
  os << '\n';
  char buf[32];
  for (std::size_t r = 0; r < labels.size(); ++r) {
    os << label_name(labels[r]) << ',' << counts[r];
    for (Index i = 0; i < mean_rmse.cols(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", mean_rmse(static_cast<Index>(r), i));
      os << ',' << buf;
    }
    os << '\n';
  }
  return os.str();
}

std::string RmseTable::to_text() const {
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-14s %6s", "Fault scenario", "count");
  os << buf;
  for (Index i = 0; i < mean_rmse.cols(); ++i) {
    std::snprintf(buf, sizeof buf, "  detector %-3lld", static_cast<long long>(i + 1));
    os << buf;
  }
  os << '\n';
  for (std::size_t r = 0; r < labels.size(); ++r) {
    std::snprintf(buf, sizeof buf, "%-14s %6d", label_name(labels[r]).c_str(), counts[r]);
    os << buf;
    for (Index i = 0; i < mean_rmse.cols(); ++i) {
      std::snprintf(buf, sizeof buf, "  %12.4f", mean_rmse(static_cast<Index>(r), i));
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

RmseTable rmse_table(const dataset::ScenarioSet& set, const std::vector<MatrixXd>& residuals,
                     int k0) {
  if (residuals.size() != set.scenarios.size()) {
    throw UsageError("need one residual matrix per scenario");
  }
  auto order = [](const std::vector<int>& a, const std::vector<int>& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  };
  std::map<std::vector<int>, std::pair<VectorXd, int>, decltype(order)> acc(order);
  Index n_filters = -1;
  for (std::size_t s = 0; s < set.scenarios.size(); ++s) {
    const auto& sc = set.scenarios[s];
    const MatrixXd& res = residuals[s];
    if (n_filters < 0) n_filters = res.cols();
    if (res.cols() != n_filters || res.rows() != sc.faults.rows()) {
      throw UsageError("residual matrix shape mismatch for " + sc.id);
    }
    if (k0 < 0 || k0 >= res.rows()) throw UsageError("k0 outside the horizon");
    for (Index j = 0; j < sc.faults.cols(); ++j) {
      const bool listed =
          std::find(sc.label.begin(), sc.label.end(), static_cast<int>(j + 1)) != sc.label.end();
      if (!listed && sc.faults.col(j).cwiseAbs().maxCoeff() != 0.0) {
        throw UsageError("scenario " + sc.id + " has an unlabeled fault on sensor " +
                         std::to_string(j + 1));
      }
    }
    const Index n = res.rows() - k0;
    VectorXd rmse(n_filters);
    for (Index i = 0; i < n_filters; ++i) {
      const VectorXd target =
          i < sc.faults.cols() ? VectorXd(sc.faults.col(i)) : VectorXd::Zero(res.rows());
      rmse(i) = std::sqrt((res.col(i) - target).tail(n).squaredNorm() / static_cast<double>(n));
    }
    auto [it, fresh] = acc.try_emplace(sc.label, VectorXd::Zero(n_filters), 0);
    it->second.first += rmse;
    it->second.second += 1;
  }
  RmseTable t;
  t.mean_rmse.resize(static_cast<Index>(acc.size()), std::max<Index>(n_filters, 0));
  Index row = 0;
  for (const auto& [label, sum_count] : acc) {
    t.labels.push_back(label);
    t.counts.push_back(sum_count.second);
    t.mean_rmse.row(row++) = (sum_count.first / sum_count.second).transpose();
  }
  return t;
}

MatrixXd bank_residuals(const std::vector<ren::ExplicitRen>& bank, const dataset::Scenario& s) {
  const MatrixXd in = dataset::filter_input(s);
  MatrixXd res(in.rows(), static_cast<Index>(bank.size()));
  for (std::size_t i = 0; i < bank.size(); ++i) {
    res.col(static_cast<Index>(i)) =
        ren::rollout(bank[i], VectorXd::Zero(bank[i].n_z()), in).residuals;
  }
  return res;
}

RmseTable evaluate_rmse(const FilterBank& bank, const dataset::ScenarioSet& test_set, int k0) {
  const auto rens = bank.materialized();
  std::vector<MatrixXd> residuals(test_set.scenarios.size());
  parallel_for(test_set.scenarios.size(), [&](std::size_t s) {
    residuals[s] = bank_residuals(rens, test_set.scenarios[s]);
  });
  return rmse_table(test_set, residuals, k0);
}

}  // namespace renfdi::training
