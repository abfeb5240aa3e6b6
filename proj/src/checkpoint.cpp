#include "renfdi/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "renfdi/errors.hpp"

namespace renfdi::ren {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw DataError(what + ": expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw DataError(what + ": ragged matrix");
    }
    for (Eigen::Index k = 0; k < cols; ++k) {
      const json& v = row[static_cast<std::size_t>(k)];
      if (!v.is_number()) throw DataError(what + ": non-numeric entry");
      m(i, k) = v.get<double>();
    }
  }
  return m;
}

json to_json(const Checkpoint& c) {
  const DirectParams& p = c.params;
  json doc;
  doc["format"] = kCheckpointFormat;
  doc["dims"] = {{"n_z", c.dims.n_z}, {"n_v", c.dims.n_v}, {"n_in", c.dims.n_in},
                 {"n_out", c.dims.n_out}};
  doc["spec"] = {{"beta", c.spec.beta()},
                 {"gamma", c.spec.gamma()},
                 {"q", c.spec.q()},
                 {"sensor_index", c.spec.sensor_index()},
                 {"l", c.spec.l()},
                 {"m", c.spec.m()}};
  doc["alpha_bar"] = p.alpha_bar;
  doc["epsilon"] = p.epsilon;
  doc["seed"] = c.seed;
  json& t = doc["params"];
  t["B2_imp"] = matrix_to_json(p.B2_imp);
  t["C2"] = matrix_to_json(p.C2);
  t["D12_imp"] = matrix_to_json(p.D12_imp);
  t["D21"] = matrix_to_json(p.D21);
  t["eta_tilde"] = matrix_to_json(p.eta_tilde);
  t["X3"] = p.X3;
  t["Y3"] = p.Y3;
  t["Z3"] = matrix_to_json(p.Z3);
  t["X"] = matrix_to_json(p.X);
  t["Y1"] = matrix_to_json(p.Y1);
  return doc;
}

Checkpoint checkpoint_from_json(const json& doc) {
  try {
    if (!doc.contains("format") || doc.at("format") != kCheckpointFormat) {
      throw DataError("unsupported checkpoint format '" +
                      (doc.contains("format") ? doc.at("format").dump() : std::string("?")) +
                      "', expected " + kCheckpointFormat);
    }
    const json& d = doc.at("dims");
    RenDims dims;
    dims.n_z = d.at("n_z").get<int>();
    dims.n_v = d.at("n_v").get<int>();
    dims.n_in = d.at("n_in").get<int>();
    dims.n_out = d.at("n_out").get<int>();
    dims.validate();
    const json& s = doc.at("spec");
    PerformanceSpec spec(s.at("beta").get<double>(), s.at("gamma").get<double>(),
                         s.at("q").get<double>(), s.at("sensor_index").get<int>(),
                         s.at("l").get<int>(), s.at("m").get<int>());
    const json& t = doc.at("params");
    DirectParams p;
    p.B2_imp = matrix_from_json(t.at("B2_imp"), "B2_imp");
    p.C2 = matrix_from_json(t.at("C2"), "C2");
    p.D12_imp = matrix_from_json(t.at("D12_imp"), "D12_imp");
    p.D21 = matrix_from_json(t.at("D21"), "D21");
    p.eta_tilde = matrix_from_json(t.at("eta_tilde"), "eta_tilde");
    p.X3 = t.at("X3").get<double>();
    p.Y3 = t.at("Y3").get<double>();
    p.Z3 = matrix_from_json(t.at("Z3"), "Z3");
    if (p.Z3.size() == 0) p.Z3.resize(dims.n_in - 1);
    p.X = matrix_from_json(t.at("X"), "X");
    p.Y1 = matrix_from_json(t.at("Y1"), "Y1");
    p.alpha_bar = doc.at("alpha_bar").get<double>();
    p.epsilon = doc.at("epsilon").get<double>();
    p.validate(dims);
    return Checkpoint{dims, spec, std::move(p), doc.at("seed").get<std::uint64_t>()};
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("invalid checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  os << to_json(ckpt).dump(1) << '\n';
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  json doc;
  try {
    is >> doc;
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    return checkpoint_from_json(doc);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace renfdi::ren
