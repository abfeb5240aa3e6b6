#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "renfdi/ren.hpp"

namespace renfdi::ren {

inline constexpr const char* kCheckpointFormat = "renfdi-checkpoint/1";

/// One trained (or freshly initialized) filter as stored on disk.
struct Checkpoint {
  RenDims dims;
  PerformanceSpec spec;
  DirectParams params;
  std::uint64_t seed = 0;
};

/// Every matrix is written as nested row-major arrays of doubles. The output
/// is a pure function of the checkpoint, so equal checkpoints serialize to
/// identical bytes.
nlohmann::json to_json(const Checkpoint& ckpt);
/// Throws DataError on a version mismatch, missing fields or bad shapes.
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Matrix helpers shared by the other serializers.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& what);

}  // namespace renfdi::ren
