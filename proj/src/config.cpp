#include "renfdi/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "renfdi/errors.hpp"
#include "renfdi/rng.hpp"

namespace renfdi::config {

using nlohmann::json;

ren::PerformanceSpec Config::spec(int sensor_index) const {
  return ren::PerformanceSpec(beta, gamma, q, sensor_index, train_data.l, train_data.m);
}

ren::RenDims Config::filter_dims() const {
  return ren::RenDims::make(dims.n_z, dims.n_v, train_data.l + train_data.m);
}

ren::InitOptions Config::init_options() const {
  return {train.init_scale, epsilon, alpha_bar};
}

void Config::validate() const {
  filter_dims();
  if (!(alpha_bar > 0.0 && alpha_bar <= 1.0)) throw UsageError("alpha_bar must lie in (0, 1]");
  if (!(epsilon > 0.0)) throw UsageError("epsilon must be positive");
  spec(1);
  train_data.validate();
  test_data.validate();
  if (train_data.l != test_data.l || train_data.m != test_data.m) {
    throw UsageError("training and test data must have the same input and sensor counts");
  }
  train.validate(train_data.filter_samples());
  if (verify.trials < 1 || verify.contraction_pairs < 1) {
    throw UsageError("verify trials and contraction pairs must be positive");
  }
  if (!(verify.state_scale > 0.0)) throw UsageError("verify state_scale must be positive");
}

json to_json(const Config& c) {
  return {{"format", kConfigFormat},
          {"ren",
           {{"n_z", c.dims.n_z}, {"n_v", c.dims.n_v}, {"alpha_bar", c.alpha_bar},
            {"epsilon", c.epsilon}}},
          {"performance", {{"beta", c.beta}, {"gamma", c.gamma}, {"q", c.q}}},
          {"train", training::to_json(c.train)},
          {"train_data", dataset::to_json(c.train_data)},
          {"test_data", dataset::to_json(c.test_data)},
          {"verify",
           {{"trials", c.verify.trials},
            {"contraction_pairs", c.verify.contraction_pairs},
            {"seed", c.verify.seed},
            {"state_scale", c.verify.state_scale}}}};
}

Config config_from_json(const json& j) {
  if (!j.is_object()) throw DataError("config must be a JSON object");
  if (j.contains("format") && j.at("format") != kConfigFormat) {
    throw DataError("unsupported config format " + j.at("format").dump());
  }
  Config c;
  try {
    if (j.contains("ren")) {
      const json& r = j.at("ren");
      c.dims.n_z = r.value("n_z", c.dims.n_z);
      c.dims.n_v = r.value("n_v", c.dims.n_v);
      c.alpha_bar = r.value("alpha_bar", c.alpha_bar);
      c.epsilon = r.value("epsilon", c.epsilon);
    }
    if (j.contains("performance")) {
      const json& p = j.at("performance");
      c.beta = p.value("beta", c.beta);
      c.gamma = p.value("gamma", c.gamma);
      c.q = p.value("q", c.q);
    }
    if (j.contains("train")) c.train = training::train_config_from_json(j.at("train"));
    if (j.contains("train_data")) {
      c.train_data = dataset::dataset_config_from_json(j.at("train_data"));
    }
    if (j.contains("test_data")) {
      const json& t = j.at("test_data");
      c.test_data = dataset::dataset_config_from_json(t);
      if (!t.contains("groups")) c.test_data.groups = dataset::DatasetConfig::test_default().groups;
    }
    if (j.contains("verify")) {
      const json& v = j.at("verify");
      c.verify.trials = v.value("trials", c.verify.trials);
      c.verify.contraction_pairs = v.value("contraction_pairs", c.verify.contraction_pairs);
      c.verify.seed = v.value("seed", c.verify.seed);
      c.verify.state_scale = v.value("state_scale", c.verify.state_scale);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::optional<std::filesystem::path> resolve_config_path(const std::string& explicit_path) {
  if (!explicit_path.empty()) return std::filesystem::path(explicit_path);
  if (const char* env = std::getenv(kConfigEnv); env != nullptr && *env != '\0') {
    return std::filesystem::path(env);
  }
  return std::nullopt;
}

std::string config_hash(const Config& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json(c).dump())));
  return buf;
}

}  // namespace renfdi::config
