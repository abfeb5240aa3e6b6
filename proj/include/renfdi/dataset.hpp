#pragma once

// Scenario corpus: plant simulation at the integration rate, decimation to the
// filter rate, additive sensor faults, and the per-filter training pairs.
//
// Conventions (also written into every manifest):
//   * filter input u_bar = (u1, u2, y1, y2, y3, y4), measured outputs
//   * y = (q1 - q3, q2 - q4, qd1 - qd3, qd2 - qd4)
//   * filter-grid sample k is integration-grid sample 25 k (plain decimation)
//   * faults are added on the filter grid, after decimation
//   * multisines are evaluated at t_k = k / rate

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "renfdi/plant.hpp"
#include "renfdi/signals.hpp"

namespace renfdi::dataset {

inline constexpr const char* kDatasetFormat = "renfdi-dataset/1";

struct ScenarioGroup {
  std::string name;
  int count = 0;
  std::vector<int> faulty_sensors;  // 1-based, sorted
};

struct DatasetConfig {
  std::vector<ScenarioGroup> groups;
  int l = 2;
  int m = 4;
  double duration = 20.0;     // [s]
  double plant_rate = 100.0;  // [Hz]
  double filter_rate = 4.0;   // [Hz]
  double onset_fraction = 0.5;
  signals::MultisineSpec road = signals::MultisineSpec::road();
  signals::MultisineSpec fault = signals::MultisineSpec::fault();
  plant::RollPlaneParams plant;

  /// 5 healthy, 5 fault on sensor 1, 5 on sensor 2, 5 on sensors 1 and 2.
  static DatasetConfig training_default();
  /// `per_class` scenarios for each of: sensor 1, sensor 2, sensors 1 and 2.
  static DatasetConfig test_default(int per_class = 100);
  static DatasetConfig healthy_only(int count);

  /// Throws UsageError on inconsistent settings (e.g. faulting sensor 7 of 4).
  void validate() const;
  int decimation() const;
  Eigen::Index plant_samples() const;
  Eigen::Index filter_samples() const;
  Eigen::Index onset_sample() const;
  int scenario_count() const;
};

nlohmann::json to_json(const DatasetConfig& c);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

struct Scenario {
  std::string id;
  std::string group;
  std::uint64_t seed = 0;
  std::vector<int> label;          // faulty sensors, 1-based, sorted
  Eigen::MatrixXd u;               // plant grid, T100 x l
  Eigen::MatrixXd u_filter;        // filter grid, T4 x l
  Eigen::MatrixXd y_clean;         // T4 x m
  Eigen::MatrixXd faults;          // T4 x m
  Eigen::MatrixXd measured;        // T4 x m, y_clean + faults
  Eigen::Index onset_sample = 0;
  std::vector<signals::MultisineDraw> road_draws;   // one per input channel
  std::vector<signals::MultisineDraw> fault_draws;  // one per sensor, empty if healthy
};

struct ScenarioSet {
  DatasetConfig config;
  std::uint64_t master_seed = 0;
  std::vector<Scenario> scenarios;

  /// Number of scenarios per label.
  std::vector<std::pair<std::vector<int>, int>> composition() const;
};

/// Simulates every scenario. Scenario s uses seed derive_seed(master, "scenario", s).
ScenarioSet build_scenarios(const DatasetConfig& config, std::uint64_t master_seed);

/// Filter input, one row per filter-grid sample: (u1, u2, ym1, ym2, ym3, ym4).
Eigen::MatrixXd filter_input(const Scenario& s);

struct TrainingPair {
  std::string id;
  Eigen::MatrixXd inputs;   // T4 x (l + m)
  Eigen::VectorXd target;   // fault on sensor i, zero if sensor i is healthy
};

/// One pair per scenario for filter `filter_index` (1-based).
std::vector<TrainingPair> training_pairs(const ScenarioSet& set, int filter_index);

/// Writes manifest.json plus, per scenario, `<id>.csv` on the filter grid
/// (k,t,u1,u2,y1..y4,f1..f4,ym1..ym4) and `<id>_input.csv` on the plant grid.
void save_set(const std::filesystem::path& dir, const ScenarioSet& set);
/// Throws DataError on version mismatch, checksum failure or malformed rows.
ScenarioSet load_set(const std::filesystem::path& dir);

}  // namespace renfdi::dataset
