#pragma once

// Peak-normalized random multisines used for road inputs and for synthetic
// additive sensor faults:
//
//     s(t) = (max_l a_l / sum_l a_l) * sum_l a_l sin(w_l t + phi_l)
//
// evaluated at t_k = k / sample_rate.

#include <Eigen/Dense>

#include <cstdint>

#include "json.hpp"

namespace renfdi::signals {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct MultisineSpec {
  Interval amplitude;   // [m]
  Interval frequency;   // [rad/s]
  Interval phase;       // [rad]
  long n_lo = 2;        // component count, inclusive range
  long n_hi = 10;
  double sample_rate = 100.0;  // [Hz]
  double duration = 20.0;      // [s]
  bool include_endpoint = true;

  /// Road-height input on the 100 Hz simulation grid, 20 s, 2001 samples.
  static MultisineSpec road();
  /// Sensor fault on the 4 Hz filter grid, 20 s, 80 samples.
  static MultisineSpec fault();

  Eigen::Index samples() const;
  /// Throws UsageError on an empty or inverted range.
  void validate() const;
};

struct MultisineDraw {
  Eigen::VectorXd amplitudes;
  Eigen::VectorXd frequencies;
  Eigen::VectorXd phases;
};

struct Multisine {
  MultisineDraw draw;
  Eigen::VectorXd samples;
};


/// Draws the component count, then (amplitude, frequency, phase) per component.
MultisineDraw draw_multisine(const MultisineSpec& spec, std::uint64_t seed);
Eigen::VectorXd evaluate_multisine(const MultisineDraw& draw, double sample_rate,
                                   Eigen::Index n_samples);
Multisine multisine(const MultisineSpec& spec, std::uint64_t seed);

struct FaultProfile {
  int sensor_index = 0;
  Eigen::Index onset_sample = 0;
  Eigen::VectorXd signal;   // zero before onset_sample
  MultisineDraw draw;
};

/// Multisine fault on sensor `sensor_index`, zeroed before `onset_sample`.
/// Throws UsageError if the onset lies outside [0, samples].
FaultProfile synth_fault(const MultisineSpec& spec, int sensor_index, Eigen::Index onset_sample,
                         std::uint64_t seed);

/// Identically zero profile (healthy sensor).
FaultProfile zero_fault(int sensor_index, Eigen::Index samples);

nlohmann::json to_json(const MultisineSpec& spec);
MultisineSpec multisine_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MultisineDraw& draw);
MultisineDraw multisine_draw_from_json(const nlohmann::json& j);

}  // namespace renfdi::signals
