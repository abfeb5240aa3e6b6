#include "renfdi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "renfdi/errors.hpp"
#include "renfdi/parallel.hpp"
#include "renfdi/rng.hpp"

namespace renfdi::dataset {

using Eigen::Index;
using Eigen::MatrixXd;
using nlohmann::json;

DatasetConfig DatasetConfig::training_default() {
  DatasetConfig c;
  c.groups = {{"healthy", 5, {}},
              {"sensor1", 5, {1}},
              {"sensor2", 5, {2}},
              {"sensor1+2", 5, {1, 2}}};
  return c;
}

DatasetConfig DatasetConfig::test_default(int per_class) {
  DatasetConfig c;
  c.groups = {{"sensor1", per_class, {1}},
              {"sensor2", per_class, {2}},
              {"sensor1+2", per_class, {1, 2}}};
  return c;
}

DatasetConfig DatasetConfig::healthy_only(int count) {
  DatasetConfig c;
  c.groups = {{"healthy", count, {}}};
  return c;
}

int DatasetConfig::decimation() const {
  return static_cast<int>(std::llround(plant_rate / filter_rate));
}

Index DatasetConfig::plant_samples() const {
  return static_cast<Index>(std::llround(duration * plant_rate)) + 1;
}

Index DatasetConfig::filter_samples() const {
  return static_cast<Index>(std::llround(duration * filter_rate));
}

Index DatasetConfig::onset_sample() const {
  return static_cast<Index>(std::llround(onset_fraction * static_cast<double>(filter_samples())));
}

int DatasetConfig::scenario_count() const {
  int n = 0;
  for (const auto& g : groups) n += g.count;
  return n;
}

void DatasetConfig::validate() const {
  if (l != 2) throw UsageError("the roll-plane plant has exactly 2 road inputs (l = 2)");
  if (m != 4) throw UsageError("the roll-plane plant has exactly 4 sensors (m = 4)");
  if (!(duration > 0.0) || !(plant_rate > 0.0) || !(filter_rate > 0.0)) {
    throw UsageError("duration and sample rates must be positive");
  }
  const double ratio = plant_rate / filter_rate;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0) {
    throw UsageError("plant rate must be an integer multiple of the filter rate");
  }
  if (filter_samples() < 1) throw UsageError("horizon shorter than one filter sample");
  if (!(onset_fraction >= 0.0 && onset_fraction <= 1.0)) {
    throw UsageError("onset_fraction must lie in [0, 1]");
  }
  if (std::abs(road.sample_rate - plant_rate) > 0.0 || road.samples() != plant_samples()) {
    throw UsageError("road multisine must be sampled on the plant grid");
  }
  if (std::abs(fault.sample_rate - filter_rate) > 0.0 || fault.samples() != filter_samples()) {
    throw UsageError("fault multisine must be sampled on the filter grid");
  }
  road.validate();
  fault.validate();
  plant.validate();
  if (groups.empty()) throw UsageError("dataset config has no scenario groups");
  for (const auto& g : groups) {
    if (g.count < 0) throw UsageError("group '" + g.name + "' has a negative count");
    for (int s : g.faulty_sensors) {
      if (s < 1 || s > m) {
        throw UsageError("group '" + g.name + "' faults sensor " + std::to_string(s) +
                         ", which does not exist (m = " + std::to_string(m) + ")");
      }
    }
    if (!std::is_sorted(g.faulty_sensors.begin(), g.faulty_sensors.end()) ||
        std::adjacent_find(g.faulty_sensors.begin(), g.faulty_sensors.end()) !=
            g.faulty_sensors.end()) {
      throw UsageError("group '" + g.name + "' must list distinct sensors in increasing order");
    }
  }
}

json to_json(const DatasetConfig& c) {
  json groups = json::array();
  for (const auto& g : c.groups) {
    groups.push_back({{"name", g.name}, {"count", g.count}, {"faulty_sensors", g.faulty_sensors}});
  }
  const auto& p = c.plant;
  return {{"groups", groups},
          {"l", c.l},
          {"m", c.m},
          {"duration", c.duration},
          {"plant_rate", c.plant_rate},
          {"filter_rate", c.filter_rate},
          {"onset_fraction", c.onset_fraction},
          {"road", signals::to_json(c.road)},
          {"fault", signals::to_json(c.fault)},
          {"plant",
           {{"m", p.m}, {"m_t1", p.m_t1}, {"m_t2", p.m_t2}, {"I", p.I}, {"L", p.L},
            {"c1", p.c1}, {"c2", p.c2}, {"c1n", p.c1n}, {"c2n", p.c2n}, {"k1", p.k1},
            {"k2", p.k2}, {"kt1", p.kt1}, {"kt2", p.kt2}, {"k1n", p.k1n}, {"k2n", p.k2n}}}};
}

DatasetConfig dataset_config_from_json(const json& j) {
  DatasetConfig c = DatasetConfig::training_default();
  if (j.contains("groups")) {
    c.groups.clear();
    for (const auto& g : j.at("groups")) {
      c.groups.push_back({g.value("name", std::string("group")), g.at("count").get<int>(),
                          g.value("faulty_sensors", std::vector<int>{})});
    }
  }
  c.l = j.value("l", c.l);
  c.m = j.value("m", c.m);
  c.duration = j.value("duration", c.duration);
  c.plant_rate = j.value("plant_rate", c.plant_rate);
  c.filter_rate = j.value("filter_rate", c.filter_rate);
  c.onset_fraction = j.value("onset_fraction", c.onset_fraction);
  c.road.duration = c.duration;
  c.road.sample_rate = c.plant_rate;
  c.fault.duration = c.duration;
  c.fault.sample_rate = c.filter_rate;
  if (j.contains("road")) c.road = signals::multisine_spec_from_json(j.at("road"));
  if (j.contains("fault")) c.fault = signals::multisine_spec_from_json(j.at("fault"));
  if (j.contains("plant")) {
    const json& p = j.at("plant");
    auto& q = c.plant;
    q.m = p.value("m", q.m);
    q.m_t1 = p.value("m_t1", q.m_t1);
    q.m_t2 = p.value("m_t2", q.m_t2);
    q.I = p.value("I", q.I);
    q.L = p.value("L", q.L);
    q.c1 = p.value("c1", q.c1);
    q.c2 = p.value("c2", q.c2);
    q.c1n = p.value("c1n", q.c1n);
    q.c2n = p.value("c2n", q.c2n);
    q.k1 = p.value("k1", q.k1);
    q.k2 = p.value("k2", q.k2);
    q.kt1 = p.value("kt1", q.kt1);
    q.kt2 = p.value("kt2", q.kt2);
    q.k1n = p.value("k1n", q.k1n);
    q.k2n = p.value("k2n", q.k2n);
  }
  c.validate();
  return c;
}

std::vector<std::pair<std::vector<int>, int>> ScenarioSet::composition() const {
  std::map<std::vector<int>, int> counts;
  for (const auto& s : scenarios) ++counts[s.label];
  return {counts.begin(), counts.end()};
}

namespace {

std::string scenario_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scenario_%04zu", index);
  return buf;
}

Scenario simulate_scenario(const DatasetConfig& c, const plant::RollPlaneModel& model,
                           const ScenarioGroup& group, std::size_t index,
                           std::uint64_t master_seed) {
  Scenario s;
  s.id = scenario_id(index);
  s.group = group.name;
  s.seed = derive_seed(master_seed, "scenario", index);
  s.label = group.faulty_sensors;

  const Index T100 = c.plant_samples();
  const Index T4 = c.filter_samples();
  const int dec = c.decimation();

  s.u.resize(T100, c.l);
  for (int r = 0; r < c.l; ++r) {
    signals::Multisine ms =
        signals::multisine(c.road, derive_seed(s.seed, "road", static_cast<std::uint64_t>(r)));
    s.u.col(r) = ms.samples;
    s.road_draws.push_back(std::move(ms.draw));
  }
  const auto traj = model.simulate(s.u, c.plant_rate, c.duration);

  s.u_filter.resize(T4, c.l);
  s.y_clean.resize(T4, c.m);
  for (Index k = 0; k < T4; ++k) {
    const Index src = k * dec;
    s.u_filter.row(k) = s.u.row(src);
    s.y_clean.row(k) = plant::measure(traj[static_cast<std::size_t>(src)]).transpose();
  }

  s.onset_sample = c.onset_sample();
  s.faults = MatrixXd::Zero(T4, c.m);
  s.fault_draws.assign(static_cast<std::size_t>(c.m), signals::MultisineDraw{});
  for (int sensor : group.faulty_sensors) {
    signals::FaultProfile f =
        signals::synth_fault(c.fault, sensor, s.onset_sample,
                             derive_seed(s.seed, "fault", static_cast<std::uint64_t>(sensor)));
    s.faults.col(sensor - 1) = f.signal;
    s.fault_draws[static_cast<std::size_t>(sensor - 1)] = std::move(f.draw);
  }
  s.measured = s.y_clean + s.faults;
  return s;
}

}  // namespace

ScenarioSet build_scenarios(const DatasetConfig& config, std::uint64_t master_seed) {
  config.validate();
  ScenarioSet set;
  set.config = config;
  set.master_seed = master_seed;
  std::vector<const ScenarioGroup*> owner;
  for (const auto& g : config.groups) {
    for (int k = 0; k < g.count; ++k) owner.push_back(&g);
  }
  const plant::RollPlaneModel model(config.plant);
  set.scenarios.resize(owner.size());
  parallel_for(owner.size(), [&](std::size_t i) {
    set.scenarios[i] = simulate_scenario(config, model, *owner[i], i, master_seed);
  });
  return set;
}

MatrixXd filter_input(const Scenario& s) {
  MatrixXd in(s.measured.rows(), s.u_filter.cols() + s.measured.cols());
  in << s.u_filter, s.measured;
  return in;
}

std::vector<TrainingPair> training_pairs(const ScenarioSet& set, int filter_index) {
  if (filter_index < 1 || filter_index > set.config.m) {
    throw UsageError("filter index " + std::to_string(filter_index) + " outside [1, " +
                     std::to_string(set.config.m) + "]");
  }
  std::vector<TrainingPair> pairs;
  pairs.reserve(set.scenarios.size());
  for (const auto& s : set.scenarios) {
    pairs.push_back({s.id, filter_input(s), s.faults.col(filter_index - 1)});
  }
  return pairs;
}

// ---------------------------------------------------------------- persistence

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string filter_header(int l, int m) {
  std::ostringstream os;
  os << "k,t";
  for (int i = 1; i <= l; ++i) os << ",u" << i;
  for (int i = 1; i <= m; ++i) os << ",y" << i;
  for (int i = 1; i <= m; ++i) os << ",f" << i;
  for (int i = 1; i <= m; ++i) os << ",ym" << i;
  return os.str();
}

std::string input_header(int l) {
  std::ostringstream os;
  os << "k,t";
  for (int i = 1; i <= l; ++i) os << ",u" << i;
  return os.str();
}

std::string filter_csv(const Scenario& s, double rate) {
  std::ostringstream os;
  os << filter_header(static_cast<int>(s.u_filter.cols()), static_cast<int>(s.measured.cols()))
     << '\n';
  for (Index k = 0; k < s.measured.rows(); ++k) {
    os << k << ',' << fmt17(static_cast<double>(k) / rate);
    for (const MatrixXd* block : {&s.u_filter, &s.y_clean, &s.faults, &s.measured}) {
      for (Index j = 0; j < block->cols(); ++j) os << ',' << fmt17((*block)(k, j));
    }
    os << '\n';
  }
  return os.str();
}

std::string input_csv(const Scenario& s, double rate) {
  std::ostringstream os;
  os << input_header(static_cast<int>(s.u.cols())) << '\n';
  for (Index k = 0; k < s.u.rows(); ++k) {
    os << k << ',' << fmt17(static_cast<double>(k) / rate);
    for (Index j = 0; j < s.u.cols(); ++j) os << ',' << fmt17(s.u(k, j));
    os << '\n';
  }
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("failed writing " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// Parses a CSV with a known header into a rows x (columns) matrix.
MatrixXd parse_csv(const std::string& bytes, const std::string& header, Index rows,
                   const std::string& name) {
  std::istringstream is(bytes);
  std::string line;
  if (!std::getline(is, line) || line != header) {
    throw DataError(name + ": unexpected header (want '" + header + "')");
  }
  const auto cols = static_cast<Index>(std::count(header.begin(), header.end(), ',') + 1);
  MatrixXd out(rows, cols);
  Index r = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (r >= rows) {
      throw DataError(name + ": row-count mismatch, more than " + std::to_string(rows) + " rows");
    }
    std::istringstream ls(line);
    std::string cell;
    Index c = 0;
    while (std::getline(ls, cell, ',')) {
      if (c >= cols) throw DataError(name + ": too many columns in row " + std::to_string(r));
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw DataError(name + ": malformed value '" + cell + "' in row " + std::to_string(r));
      }
      out(r, c++) = v;
    }
    if (c != cols) throw DataError(name + ": too few columns in row " + std::to_string(r));
    ++r;
  }
  if (r != rows) {
    throw DataError(name + ": row-count mismatch, expected " + std::to_string(rows) +
                    " rows, found " + std::to_string(r));
  }
  return out;
}

json conventions() {
  return {{"filter_input_order", "u1,u2,ym1,ym2,ym3,ym4"},
          {"sensor_map", "y1=q1-q3, y2=q2-q4, y3=qd1-qd3, y4=qd2-qd4"},
          {"downsampling", "filter sample k = plant sample 25k, no anti-alias filter"},
          {"fault_injection", "additive on the filter grid after downsampling"},
          {"multisine_argument", "continuous time t_k = k / sample_rate"},
          {"input_hold", "zero-order hold between plant samples"},
          {"initial_state", "zero"}};
}

}  // namespace

void save_set(const std::filesystem::path& dir, const ScenarioSet& set) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("output directory " + dir.string() + " does not exist");
  }
  json scenarios = json::array();
  for (const auto& s : set.scenarios) {
    const std::string fcsv = filter_csv(s, set.config.filter_rate);
    const std::string icsv = input_csv(s, set.config.plant_rate);
    write_file(dir / (s.id + ".csv"), fcsv);
    write_file(dir / (s.id + "_input.csv"), icsv);
    json road = json::array();
    for (const auto& d : s.road_draws) road.push_back(signals::to_json(d));
    json faults = json::array();
    for (const auto& d : s.fault_draws) {
      faults.push_back(d.amplitudes.size() == 0 ? json(nullptr) : signals::to_json(d));
    }
    scenarios.push_back({{"id", s.id},
                         {"group", s.group},
                         {"seed", s.seed},
                         {"label", s.label},
                         {"onset_sample", s.onset_sample},
                         {"road_draws", road},
                         {"fault_draws", faults},
                         {"file", s.id + ".csv"},
                         {"input_file", s.id + "_input.csv"},
                         {"checksum", hex64(fnv1a64(fcsv))},
                         {"input_checksum", hex64(fnv1a64(icsv))}});
  }
  json comp = json::array();
  for (const auto& [label, count] : set.composition()) {
    comp.push_back({{"label", label}, {"count", count}});
  }
  const json manifest = {{"format", kDatasetFormat},
                         {"master_seed", set.master_seed},
                         {"config", to_json(set.config)},
                         {"composition", comp},
                         {"conventions", conventions()},
                         {"seed_rule", "scenario s: derive_seed(master, \"scenario\", s); "
                                       "road r: derive_seed(scenario, \"road\", r); "
                                       "fault j: derive_seed(scenario, \"fault\", j)"},
                         {"scenarios", scenarios}};
  write_file(dir / "manifest.json", manifest.dump(1) + "\n");
}

ScenarioSet load_set(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + " is not valid JSON: " + e.what());
  }
  try {
    if (!manifest.contains("format") || manifest.at("format") != kDatasetFormat) {
      throw DataError(manifest_path.string() + ": unsupported dataset version " +
                      (manifest.contains("format") ? manifest.at("format").dump()
                                                   : std::string("(missing)")) +
                      ", expected \"" + kDatasetFormat + "\"");
    }
    ScenarioSet set;
    try {
      set.config = dataset_config_from_json(manifest.at("config"));
    } catch (const UsageError& e) {
      throw DataError(manifest_path.string() + ": invalid config: " + e.what());
    }
    set.master_seed = manifest.at("master_seed").get<std::uint64_t>();
    const auto& c = set.config;
    const Index T4 = c.filter_samples();
    const Index T100 = c.plant_samples();
    const std::string fh = filter_header(c.l, c.m);
    const std::string ih = input_header(c.l);
    for (const auto& js : manifest.at("scenarios")) {
      Scenario s;
      s.id = js.at("id").get<std::string>();
      s.group = js.at("group").get<std::string>();
      s.seed = js.at("seed").get<std::uint64_t>();
      s.label = js.at("label").get<std::vector<int>>();
      s.onset_sample = js.at("onset_sample").get<Index>();
      for (const auto& d : js.at("road_draws")) {
        s.road_draws.push_back(signals::multisine_draw_from_json(d));
      }
      for (const auto& d : js.at("fault_draws")) {
        s.fault_draws.push_back(d.is_null() ? signals::MultisineDraw{}
                                            : signals::multisine_draw_from_json(d));
      }
      const auto fpath = dir / js.at("file").get<std::string>();
      const auto ipath = dir / js.at("input_file").get<std::string>();
      const std::string fbytes = read_file(fpath);
      const std::string ibytes = read_file(ipath);
      // Structure first, so a truncated file reports its row count.
      const MatrixXd f = parse_csv(fbytes, fh, T4, fpath.string());
      const MatrixXd in = parse_csv(ibytes, ih, T100, ipath.string());
      if (hex64(fnv1a64(fbytes)) != js.at("checksum").get<std::string>()) {
        throw DataError(fpath.string() + ": checksum failure");
      }
      if (hex64(fnv1a64(ibytes)) != js.at("input_checksum").get<std::string>()) {
        throw DataError(ipath.string() + ": checksum failure");
      }
      s.u = in.rightCols(c.l);
      s.u_filter = f.middleCols(2, c.l);
      s.y_clean = f.middleCols(2 + c.l, c.m);
      s.faults = f.middleCols(2 + c.l + c.m, c.m);
      s.measured = f.middleCols(2 + c.l + 2 * c.m, c.m);
      if (s.measured != s.y_clean + s.faults) {
        throw DataError(fpath.string() + ": measured outputs differ from clean + fault");
      }
      set.scenarios.push_back(std::move(s));
    }
    return set;
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": malformed manifest: " + e.what());
  }
}

}  // namespace renfdi::dataset
