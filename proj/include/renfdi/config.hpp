#pragma once

// Run configuration shared by every subcommand. A JSON document; every field
// is optional and falls back to the defaults below.
//
//   {
//     "format": "renfdi-config/1",
//     "ren":         {"n_z": 8, "n_v": 32, "alpha_bar": 0.95, "epsilon": 1e-4},
//     "performance": {"beta": 10000, "gamma": 1, "q": 100},
//     "train":       {TrainConfig fields},
//     "train_data":  {DatasetConfig fields},
//     "test_data":   {DatasetConfig fields},
//     "verify":      {"trials": 100, "contraction_pairs": 20, "seed": 7, "state_scale": 1}
//   }

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "renfdi/dataset.hpp"
#include "renfdi/ren.hpp"
#include "renfdi/training.hpp"
#include "renfdi/verify.hpp"

namespace renfdi::config {

inline constexpr const char* kConfigFormat = "renfdi-config/1";
inline constexpr const char* kConfigEnv = "RENFDI_CONFIG";

struct Config {
  ren::RenDims dims;  // n_in is derived from the data widths
  double alpha_bar = 0.95;
  double epsilon = 1e-4;
  double beta = 1e4;
  double gamma = 1.0;
  double q = 100.0;
  training::TrainConfig train;
  dataset::DatasetConfig train_data = dataset::DatasetConfig::training_default();
  dataset::DatasetConfig test_data = dataset::DatasetConfig::test_default();
  verify::SuiteOptions verify;

  /// Performance spec of filter `sensor_index` under these settings.
  ren::PerformanceSpec spec(int sensor_index) const;
  ren::RenDims filter_dims() const;
  ren::InitOptions init_options() const;
  void validate() const;
};

nlohmann::json to_json(const Config& c);
/// Throws UsageError on invalid values, DataError on a wrong format string.
Config config_from_json(const nlohmann::json& j);

/// Reads a config file; throws DataError if it cannot be read or parsed.
Config load_config(const std::filesystem::path& path);

/// Explicit path if given, else $RENFDI_CONFIG if set, else none (defaults).
std::optional<std::filesystem::path> resolve_config_path(const std::string& explicit_path);

/// FNV-1a of the canonical (sorted-key, compact) JSON form, as 16 hex digits.
std::string config_hash(const Config& c);

}  // namespace renfdi::config
