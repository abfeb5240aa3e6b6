#include "renfdi/signals.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "renfdi/errors.hpp"
#include "renfdi/rng.hpp"

namespace renfdi::signals {

using std::numbers::pi;

MultisineSpec MultisineSpec::road() {
  MultisineSpec s;
  s.amplitude = {0.01, 0.1};
  s.frequency = {0.6 * pi, 3.0 * pi};
  s.phase = {0.0, 0.94 * pi};
  s.n_lo = 2;
  s.n_hi = 10;
  s.sample_rate = 100.0;
  s.duration = 20.0;
  s.include_endpoint = true;
  return s;
}

MultisineSpec MultisineSpec::fault() {
  MultisineSpec s = road();
  s.frequency = {0.6 * pi, 5.0 * pi};
  s.sample_rate = 4.0;
  s.include_endpoint = false;
  return s;
}

Eigen::Index MultisineSpec::samples() const {
  return static_cast<Eigen::Index>(std::llround(duration * sample_rate)) +
         (include_endpoint ? 1 : 0);
}

void MultisineSpec::validate() const {
  auto check = [](const Interval& iv, const char* name) {
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi) {
      throw UsageError(std::string("multisine ") + name + " range is empty or not finite");
    }
  };
  check(amplitude, "amplitude");
  check(frequency, "frequency");
  check(phase, "phase");
  if (!(amplitude.lo > 0.0)) throw UsageError("multisine amplitudes must be positive");
  if (n_lo < 1 || n_lo > n_hi) throw UsageError("multisine component count range is invalid");
  if (!(sample_rate > 0.0) || !(duration > 0.0)) {
    throw UsageError("multisine sample rate and duration must be positive");
  }
}

MultisineDraw draw_multisine(const MultisineSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const long n = rng.uniform_int(spec.n_lo, spec.n_hi);
  MultisineDraw d;
  d.amplitudes.resize(n);
  d.frequencies.resize(n);
  d.phases.resize(n);
  for (long l = 0; l < n; ++l) {
    d.amplitudes(l) = rng.uniform(spec.amplitude.lo, spec.amplitude.hi);
    d.frequencies(l) = rng.uniform(spec.frequency.lo, spec.frequency.hi);
    d.phases(l) = rng.uniform(spec.phase.lo, spec.phase.hi);
  }
  return d;
}

Eigen::VectorXd evaluate_multisine(const MultisineDraw& draw, double sample_rate,
                                   Eigen::Index n_samples) {
  const Eigen::Index n = draw.amplitudes.size();
  if (n == 0 || draw.frequencies.size() != n || draw.phases.size() != n) {
    throw UsageError("multisine draw is empty or inconsistent");
  }
  const double gain = draw.amplitudes.maxCoeff() / draw.amplitudes.sum();
  Eigen::VectorXd s(n_samples);
  for (Eigen::Index k = 0; k < n_samples; ++k) {
    const double t = static_cast<double>(k) / sample_rate;
    double acc = 0.0;
    for (Eigen::Index l = 0; l < n; ++l) {
      acc += draw.amplitudes(l) * std::sin(draw.frequencies(l) * t + draw.phases(l));
    }
    s(k) = gain * acc;
  }
  return s;
}

Multisine multisine(const MultisineSpec& spec, std::uint64_t seed) {
  Multisine m;
  m.draw = draw_multisine(spec, seed);
  m.samples = evaluate_multisine(m.draw, spec.sample_rate, spec.samples());
  return m;
}

FaultProfile synth_fault(const MultisineSpec& spec, int sensor_index, Eigen::Index onset_sample,
                         std::uint64_t seed) {
  const Eigen::Index n = spec.samples();
  if (onset_sample < 0 || onset_sample > n) {
    throw UsageError("fault onset " + std::to_string(onset_sample) + " outside [0, " +
                     std::to_string(n) + "]");
  }
  Multisine m = multisine(spec, seed);
  FaultProfile f;
  f.sensor_index = sensor_index;
  f.onset_sample = onset_sample;
  f.signal = std::move(m.samples);
  f.signal.head(onset_sample).setZero();
  f.draw = std::move(m.draw);
  return f;
}

FaultProfile zero_fault(int sensor_index, Eigen::Index samples) {
  FaultProfile f;
  f.sensor_index = sensor_index;
  f.onset_sample = samples;
  f.signal = Eigen::VectorXd::Zero(samples);
  return f;
}

nlohmann::json to_json(const MultisineSpec& s) {
  return {{"amplitude", {s.amplitude.lo, s.amplitude.hi}},
          {"frequency", {s.frequency.lo, s.frequency.hi}},
          {"phase", {s.phase.lo, s.phase.hi}},
          {"n", {s.n_lo, s.n_hi}},
          {"sample_rate", s.sample_rate},
          {"duration", s.duration},
          {"include_endpoint", s.include_endpoint}};
}

MultisineSpec multisine_spec_from_json(const nlohmann::json& j) {
  MultisineSpec s;
  s.amplitude = {j.at("amplitude").at(0).get<double>(), j.at("amplitude").at(1).get<double>()};
  s.frequency = {j.at("frequency").at(0).get<double>(), j.at("frequency").at(1).get<double>()};
  s.phase = {j.at("phase").at(0).get<double>(), j.at("phase").at(1).get<double>()};
  s.n_lo = j.at("n").at(0).get<long>();
  s.n_hi = j.at("n").at(1).get<long>();
  s.sample_rate = j.at("sample_rate").get<double>();
  s.duration = j.at("duration").get<double>();
  s.include_endpoint = j.at("include_endpoint").get<bool>();
  s.validate();
  return s;
}

namespace {
nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}
Eigen::VectorXd vec_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace

nlohmann::json to_json(const MultisineDraw& d) {
  return {{"amplitudes", vec_to_json(d.amplitudes)},
          {"frequencies", vec_to_json(d.frequencies)},
          {"phases", vec_to_json(d.phases)}};
}

MultisineDraw multisine_draw_from_json(const nlohmann::json& j) {
  MultisineDraw d;
  d.amplitudes = vec_from_json(j.at("amplitudes"));
  d.frequencies = vec_from_json(j.at("frequencies"));
  d.phases = vec_from_json(j.at("phases"));
  return d;
}

}  // namespace renfdi::signals
