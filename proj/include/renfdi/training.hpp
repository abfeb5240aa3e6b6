#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "renfdi/checkpoint.hpp"
#include "renfdi/dataset.hpp"
#include "renfdi/ren.hpp"

namespace renfdi::training {

struct TrainConfig {
  int k0 = 4;                 // first sample counted in the loss
  int epochs = 500;
  double step_size = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  int grad_check_every = 0;   // epochs between finite-difference spot checks, 0 = off
  int grad_check_coords = 6;  // coordinates probed per spot check
  double init_scale = 0.3;

  /// Throws UsageError unless 0 <= k0 < horizon, step_size > 0, epochs >= 0.
  void validate(Eigen::Index horizon) const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TrainReport {
  std::vector<double> loss;       // loss before each update, plus the final loss
  std::vector<double> grad_norm;  // matching gradient norms
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double wall_seconds = 0.0;
  double grad_check_worst = 0.0;  // worst relative error of the spot checks
  std::string checkpoint_path;
};

/// Sum over pairs of sum_{k >= k0} (r_k - f_k)^2, zero initial filter state.
/// Throws UsageError on an empty pair list.
double cost(const ren::DirectParams& params, const ren::RenDims& dims,
            const ren::PerformanceSpec& spec, const std::vector<dataset::TrainingPair>& pairs,
            int k0);

struct CostGradient {
  double cost = 0.0;
  ren::DirectParams grad;
};

/// Cost and its exact gradient: backpropagation through time over the
/// rollout, then through the parameter map. Per-pair adjoints are reduced in
/// pair order so the result does not depend on threading.
CostGradient cost_and_gradient(const ren::DirectParams& params, const ren::RenDims& dims,
                               const ren::PerformanceSpec& spec,
                               const std::vector<dataset::TrainingPair>& pairs, int k0);

ren::DirectParams gradient(const ren::DirectParams& params, const ren::RenDims& dims,
                           const ren::PerformanceSpec& spec,
                           const std::vector<dataset::TrainingPair>& pairs, int k0);

/// Gradient of the cost with respect to the explicit weights (the rollout part
/// only). Exposed for testing the two halves of the chain rule separately.
double rollout_cost_and_grad(const ren::ExplicitRen& ren, const dataset::TrainingPair& pair,
                             int k0, ren::ExplicitRen& grad_accum);

/// Worst relative error |g - g_fd| / max(|g|, |g_fd|, 1e-6) over the probed
/// coordinates, g_fd by central differences with h = 1e-5 (1 + |theta|).
double gradient_check(const ren::DirectParams& params, const ren::RenDims& dims,
                      const ren::PerformanceSpec& spec,
                      const std::vector<dataset::TrainingPair>& pairs, int k0,
                      const std::vector<Eigen::Index>& coords);

/// Adam with bias correction, over a flat parameter vector.
class Adam {
 public:
  Adam(Eigen::Index size, double step_size, double beta1, double beta2, double eps);
  void update(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  long steps() const { return t_; }

 private:
  double step_size_, beta1_, beta2_, eps_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

struct TrainResult {
  ren::DirectParams params;
  TrainReport report;
};

using EpochCallback = std::function<void(int epoch, double loss, double grad_norm)>;

/// Full-batch Adam on the pairs of filter `filter_index`. Every iterate is
/// materialized (and therefore certified). Throws TrainingError on a
/// non-finite loss or gradient, naming the epoch.
TrainResult train_filter(int filter_index, const ren::RenDims& dims,
                         const ren::PerformanceSpec& spec, const dataset::ScenarioSet& set,
                         const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Variant that starts from given parameters.
TrainResult train_from(ren::DirectParams init, const ren::RenDims& dims,
                       const ren::PerformanceSpec& spec,
                       const std::vector<dataset::TrainingPair>& pairs, const TrainConfig& config,
                       const EpochCallback& on_epoch = {});

/// Writes `epoch,loss,grad_norm`.
void write_train_log(const std::filesystem::path& path, const TrainReport& report);

/// A bank of m filters, filter i at index i - 1.
struct FilterBank {
  std::vector<ren::Checkpoint> filters;
  std::vector<ren::ExplicitRen> materialized() const;
};

/// Bank files are `filter_<i>.json`.
std::filesystem::path bank_file(const std::filesystem::path& dir, int filter_index);
FilterBank load_bank(const std::filesystem::path& dir);

struct RmseTable {
  std::vector<std::vector<int>> labels;  // one row per fault class
  std::vector<int> counts;
  Eigen::MatrixXd mean_rmse;             // rows x filters

  /// Writes `scenario,count,detector_1,...`.
  std::string to_csv() const;
  std::string to_text() const;
};

std::string label_name(const std::vector<int>& label);

/// Mean RMSE per (fault class, filter) from precomputed residuals,
/// residuals[s](k, i) for scenario s, sample k, filter i. Rows are ordered by
/// label size then lexicographically ({1}, {2}, {1,2} for the default test set).
/// Throws UsageError if a scenario carries a fault on a sensor its label does
/// not list.
RmseTable rmse_table(const dataset::ScenarioSet& set,
                     const std::vector<Eigen::MatrixXd>& residuals, int k0);

/// Residuals of every filter on one scenario, T x m.
Eigen::MatrixXd bank_residuals(const std::vector<ren::ExplicitRen>& bank,
                               const dataset::Scenario& s);

RmseTable evaluate_rmse(const FilterBank& bank, const dataset::ScenarioSet& test_set, int k0);

}  // namespace renfdi::training
