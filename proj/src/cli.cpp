#include "renfdi/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "renfdi/checkpoint.hpp"
#include "renfdi/config.hpp"
#include "renfdi/dataset.hpp"
#include "renfdi/errors.hpp"
#include "renfdi/parallel.hpp"
#include "renfdi/rng.hpp"
#include "renfdi/svg.hpp"
#include "renfdi/training.hpp"
#include "renfdi/verify.hpp"

namespace renfdi::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void require_dir(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " directory not given");
  if (!fs::is_directory(path)) {
    throw DataError(std::string(what) + " directory " + path + " does not exist");
  }
}

struct Common {
  std::string config_path;
  std::string out;
};

struct Run {
  std::string subcommand;
  config::Config cfg;
  std::optional<fs::path> cfg_path;
  std::string started;
  json seeds = json::object();
  json inputs = json::object();
  json outputs = json::array();
  json args = json::object();
};

Run start(const std::string& name, const Common& c) {
  Run r;
  r.subcommand = name;
  r.started = utc_now();
  r.cfg_path = config::resolve_config_path(c.config_path);
  if (r.cfg_path) r.cfg = config::load_config(*r.cfg_path);
  require_dir(c.out, "output");
  return r;
}

void finish(const Run& r, const fs::path& out_dir) {
  json m = {{"subcommand", r.subcommand},
            {"tool_version", kVersion},
            {"config_path", r.cfg_path ? r.cfg_path->string() : std::string()},
            {"config_hash", config::config_hash(r.cfg)},
            {"config", config::to_json(r.cfg)},
            {"arguments", r.args},
            {"seeds", r.seeds},
            {"inputs", r.inputs},
            {"outputs", r.outputs},
            {"started_at", r.started},
            {"finished_at", utc_now()}};
  const fs::path path = out_dir / "run_manifest.json";
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << m.dump(2) << '\n';
}

std::vector<int> parse_filters(const std::string& spec, int m) {
  std::vector<int> out;
  if (spec == "all") {
    for (int i = 1; i <= m; ++i) out.push_back(i);
    return out;
  }
  int i = 0;
  try {
    std::size_t used = 0;
    i = std::stoi(spec, &used);
    if (used != spec.size()) throw std::invalid_argument(spec);
  } catch (const std::exception&) {
    throw UsageError("--filter expects a sensor index or 'all', got '" + spec + "'");
  }
  if (i < 1 || i > m) {
    throw UsageError("--filter " + spec + " is outside 1.." + std::to_string(m));
  }
  return {i};
}

const dataset::Scenario& pick_scenario(const dataset::ScenarioSet& set, const std::string& id) {
  if (set.scenarios.empty()) throw DataError("dataset has no scenarios");
  if (id.empty()) return set.scenarios.front();
  for (const auto& s : set.scenarios) {
    if (s.id == id) return s;
  }
  throw UsageError("no scenario '" + id + "' in the dataset");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
}

// ---------------------------------------------------------------- subcommands

struct SimulateArgs {
  Common c;
  std::uint64_t seed = 1;
  bool test = false;
  bool healthy_only = false;
  int count = 0;
  int per_class = 0;
};

int cmd_simulate(const SimulateArgs& a) {
  Run r = start("simulate", a.c);
  dataset::DatasetConfig dc = a.test ? r.cfg.test_data : r.cfg.train_data;
  if (a.healthy_only) {
    if (a.count < 1) throw UsageError("--healthy-only needs --count >= 1");
    const auto base = dc;
    dc = dataset::DatasetConfig::healthy_only(a.count);
    dc.l = base.l;
    dc.m = base.m;
    dc.duration = base.duration;
    dc.plant_rate = base.plant_rate;
    dc.filter_rate = base.filter_rate;
    dc.onset_fraction = base.onset_fraction;
    dc.road = base.road;
    dc.fault = base.fault;
    dc.plant = base.plant;
  } else if (a.per_class > 0) {
    for (auto& g : dc.groups) g.count = a.per_class;
  }
  dc.validate();
  const auto set = dataset::build_scenarios(dc, a.seed);
  dataset::save_set(a.c.out, set);
  std::cout << "simulated " << set.scenarios.size() << " scenarios into " << a.c.out << '\n';
  for (const auto& [label, n] : set.composition()) {
    std::cout << "  " << training::label_name(label) << ": " << n << '\n';
  }
  r.seeds["master"] = a.seed;
  r.args = {{"test", a.test}, {"healthy_only", a.healthy_only}, {"count", a.count},
            {"per_class", a.per_class}, {"dataset", dataset::to_json(dc)}};
  r.outputs.push_back((fs::path(a.c.out) / "manifest.json").string());
  finish(r, a.c.out);
  return kOk;
}

struct TrainArgs {
  Common c;
  std::string data;
  std::string filter = "all";
  int epochs = -1;
  long long seed = -1;
};

int cmd_train(const TrainArgs& a) {
  Run r = start("train", a.c);
  require_dir(a.data, "data");
  if (a.epochs >= 0) r.cfg.train.epochs = a.epochs;
  if (a.seed >= 0) r.cfg.train.seed = static_cast<std::uint64_t>(a.seed);
  const auto set = dataset::load_set(a.data);
  if (set.config.l != r.cfg.train_data.l || set.config.m != r.cfg.train_data.m) {
    throw DataError("dataset widths do not match the configuration");
  }
  r.cfg.train.validate(set.config.filter_samples());
  const auto filters = parse_filters(a.filter, set.config.m);
  const ren::RenDims dims = r.cfg.filter_dims();

  std::vector<training::TrainResult> results(filters.size());
  parallel_for(filters.size(), [&](std::size_t k) {
    const int i = filters[k];
    const ren::PerformanceSpec spec = r.cfg.spec(i);
    const auto pairs = dataset::training_pairs(set, i);
    const ren::DirectParams p0 = ren::init_params(
        dims, spec, derive_seed(r.cfg.train.seed, "filter", static_cast<std::uint64_t>(i)),
        r.cfg.init_options());
    results[k] = training::train_from(p0, dims, spec, pairs, r.cfg.train);
  });

  for (std::size_t k = 0; k < filters.size(); ++k) {
    const int i = filters[k];
    auto& res = results[k];
    const fs::path ckpt = training::bank_file(a.c.out, i);
    ren::save_checkpoint(ckpt, {dims, r.cfg.spec(i), res.params, r.cfg.train.seed});
    const fs::path log = fs::path(a.c.out) / ("train_log_" + std::to_string(i) + ".csv");
    training::write_train_log(log, res.report);
    res.report.checkpoint_path = ckpt.string();
    std::printf("filter %d: loss %.6g -> %.6g in %d epochs (%.2f s)\n", i,
                res.report.initial_loss, res.report.final_loss, r.cfg.train.epochs,
                res.report.wall_seconds);
    r.outputs.push_back(ckpt.string());
    r.outputs.push_back(log.string());
  }
  r.seeds["train"] = r.cfg.train.seed;
  r.seeds["data_master"] = set.master_seed;
  r.inputs["data"] = a.data;
  r.args = {{"filter", a.filter}};
  finish(r, a.c.out);
  return kOk;
}

struct EvalArgs {
  Common c;
  std::string bank;
  std::string data;
};

int cmd_evaluate(const EvalArgs& a) {
  Run r = start("evaluate", a.c);
  require_dir(a.bank, "bank");
  require_dir(a.data, "data");
  const auto bank = training::load_bank(a.bank);
  const auto set = dataset::load_set(a.data);
  const auto table = training::evaluate_rmse(bank, set, r.cfg.train.k0);
  std::cout << table.to_text();
  const fs::path csv = fs::path(a.c.out) / "rmse_table.csv";
  write_text(csv, table.to_csv());
  r.inputs = {{"bank", a.bank}, {"data", a.data}};
  r.seeds["data_master"] = set.master_seed;
  r.outputs.push_back(csv.string());
  finish(r, a.c.out);
  return kOk;
}

struct VerifyArgs {
  Common c;
  std::string bank;
  bool random = false;
  long long seed = -1;
  int trials = 0;
};

int cmd_verify(const VerifyArgs& a) {
  Run r = start("verify", a.c);
  if (a.random == !a.bank.empty()) throw UsageError("give exactly one of --bank and --random");
  verify::SuiteOptions opts = r.cfg.verify;
  if (a.seed >= 0) opts.seed = static_cast<std::uint64_t>(a.seed);
  if (a.trials > 0) opts.trials = a.trials;
  opts.horizon = r.cfg.train_data.filter_samples();

  std::vector<verify::BankFilter> filters;
  if (a.random) {
    const ren::RenDims dims = r.cfg.filter_dims();
    for (int i = 1; i <= r.cfg.train_data.m; ++i) {
      const auto spec = r.cfg.spec(i);
      filters.push_back({dims, spec,
                         ren::init_params(dims, spec,
                                          derive_seed(opts.seed, "verify/random-bank",
                                                      static_cast<std::uint64_t>(i)),
                                          r.cfg.init_options())});
    }
  } else {
    require_dir(a.bank, "bank");
    for (const auto& f : training::load_bank(a.bank).filters) {
      filters.push_back({f.dims, f.spec, f.params});
    }
    r.inputs["bank"] = a.bank;
  }
  const auto results = verify::run_suite(filters, opts);
  bool ok = true;
  for (const auto& c : results) {
    std::printf("%-4s %-28s worst margin %.6g\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                c.worst_margin);
    ok = ok && c.pass;
  }
  const fs::path report = fs::path(a.c.out) / "verify_report.json";
  write_text(report, json{{"pass", ok}, {"checks", verify::to_json(results)}}.dump(2) + "\n");
  r.seeds["verify"] = opts.seed;
  r.args = {{"random", a.random}, {"trials", opts.trials},
            {"contraction_pairs", opts.contraction_pairs}};
  r.outputs.push_back(report.string());
  finish(r, a.c.out);
  return ok ? kOk : kVerification;
}

struct InferArgs {
  Common c;
  std::string bank;
  std::string data;
  std::string scenario;
};

Eigen::MatrixXd infer_residuals(const InferArgs& a, Run& r, const dataset::Scenario** picked,
                                dataset::ScenarioSet& set) {
  require_dir(a.bank, "bank");
  require_dir(a.data, "data");
  const auto bank = training::load_bank(a.bank);
  set = dataset::load_set(a.data);
  const dataset::Scenario& s = pick_scenario(set, a.scenario);
  *picked = &s;
  r.inputs = {{"bank", a.bank}, {"data", a.data}, {"scenario", s.id}};
  r.seeds["scenario"] = s.seed;
  return training::bank_residuals(bank.materialized(), s);
}

int cmd_infer(const InferArgs& a) {
  Run r = start("infer", a.c);
  dataset::ScenarioSet set;
  const dataset::Scenario* s = nullptr;
  const Eigen::MatrixXd res = infer_residuals(a, r, &s, set);
  const fs::path path = fs::path(a.c.out) / (s->id + "_residuals.csv");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << "k,t";
  for (Eigen::Index i = 0; i < res.cols(); ++i) os << ",r" << i + 1;
  os << '\n';
  char buf[40];
  for (Eigen::Index k = 0; k < res.rows(); ++k) {
    os << k;
    std::snprintf(buf, sizeof buf, ",%.17g", static_cast<double>(k) / set.config.filter_rate);
    os << buf;
    for (Eigen::Index i = 0; i < res.cols(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", res(k, i));
      os << buf;
    }
    os << '\n';
  }
  os.close();
  std::cout << "wrote " << path.string() << '\n';
  r.outputs.push_back(path.string());
  finish(r, a.c.out);
  return kOk;
}

int cmd_plot(const InferArgs& a) {
  Run r = start("plot", a.c);
  dataset::ScenarioSet set;
  const dataset::Scenario* s = nullptr;
  const Eigen::MatrixXd res = infer_residuals(a, r, &s, set);
  for (const auto& p : svg::write_residual_plots(a.c.out, *s, res, set.config.filter_rate)) {
    std::cout << "wrote " << p.string() << '\n';
    r.outputs.push_back(p.string());
  }
  finish(r, a.c.out);
  return kOk;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path,
                  std::string("JSON config (default: $") + config::kConfigEnv + " or built-in)");
  app->add_option("--out", c.out, "existing output directory")->required();
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Fault-isolation filter bank with contracting recurrent equilibrium networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "simulate a labeled scenario corpus");
  add_common(s, sim.c);
  s->add_option("--seed", sim.seed, "master seed")->capture_default_str();
  s->add_flag("--test", sim.test, "use the test corpus composition");
  s->add_flag("--healthy-only", sim.healthy_only, "only fault-free scenarios");
  s->add_option("--count", sim.count, "scenario count with --healthy-only");
  s->add_option("--per-class", sim.per_class, "override every group's scenario count");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train filters on a corpus");
  add_common(t, tr.c);
  t->add_option("--data,--scenarios", tr.data, "training corpus directory")->required();
  t->add_option("--filter", tr.filter, "sensor index or 'all'")->capture_default_str();
  t->add_option("--epochs", tr.epochs, "override the configured epoch count");
  t->add_option("--seed", tr.seed, "override the configured training seed");

  EvalArgs ev;
  auto* e = app.add_subcommand("evaluate", "mean RMSE table of a bank on a labeled corpus");
  add_common(e, ev.c);
  e->add_option("--bank", ev.bank, "directory with filter_<i>.json")->required();
  e->add_option("--data,--scenarios", ev.data, "test corpus directory")->required();

  VerifyArgs ve;
  auto* v = app.add_subcommand("verify", "run the certificate suite");
  add_common(v, ve.c);
  v->add_option("--bank", ve.bank, "directory with filter_<i>.json");
  v->add_flag("--random", ve.random, "verify a freshly initialized bank");
  v->add_option("--seed", ve.seed, "suite seed");
  v->add_option("--trials", ve.trials, "random trials per check");

  InferArgs in;
  auto* i = app.add_subcommand("infer", "residual traces of a bank on one scenario");
  add_common(i, in.c);
  i->add_option("--bank", in.bank, "directory with filter_<i>.json")->required();
  i->add_option("--data,--scenarios", in.data, "corpus directory")->required();
  i->add_option("--scenario", in.scenario, "scenario id (default: first)");

  InferArgs pl;
  auto* p = app.add_subcommand("plot", "SVG residual and fault traces, one per filter");
  add_common(p, pl.c);
  p->add_option("--bank", pl.bank, "directory with filter_<i>.json")->required();
  p->add_option("--data,--scenarios", pl.data, "corpus directory")->required();
  p->add_option("--scenario", pl.scenario, "scenario id (default: first)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_evaluate(ev);
    if (*v) return cmd_verify(ve);
    if (*i) return cmd_infer(in);
    if (*p) return cmd_plot(pl);
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << '\n';
    return kUsage;
  } catch (const CertificateError& err) {
    std::cerr << "verification failure: " << err.what() << '\n';
    return kVerification;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kData;
  }
  return kUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  return run(args);
}

}  // namespace renfdi::cli
