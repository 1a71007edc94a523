#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stosim/experiments.hpp"
#include "stosim/integrator.hpp"
#include "stosim/magnetics.hpp"
#include "stosim/mixer.hpp"
#include "stosim/network.hpp"

namespace stosim::io {

inline constexpr int kSchemaVersion = 1;

enum class Experiment { trajectory, network, psd_compare, mixer_sweep, p1db, iip3, volume_lock };

const char* to_string(Experiment e);

/// Per-oscillator departures from the shared device parameters.
struct OscillatorOverride {
  std::optional<double> alpha, gamma, ms, volume, epsilon, r_p, r_ap, temperature;
  std::optional<Vec3> k1, k2, m_p;
  std::optional<double> i_dc;     // A
  std::optional<Vec3> initial;    // starting magnetization

  bool operator==(const OscillatorOverride&) const = default;
};

struct NetworkSettings {
  std::size_t count = 1;
  double i_dc = 25.4e-3;  // A, shared bias
  double g_m = 0.0;       // S
  network::Topology topology = network::Topology::global;
  double hp_cutoff = 9e6;  // Hz
  Vec3 h_ext{};            // T
  std::vector<network::RfTone> rf_tones;
  std::vector<OscillatorOverride> oscillators;  // empty or one per oscillator

  bool operator==(const NetworkSettings&) const = default;
};

struct RunSettings {
  double duration = 2e-6;  // s
  std::size_t sample_stride = 20;

  bool operator==(const RunSettings&) const = default;
};

struct SweepSettings {
  std::vector<double> p_in_grid;  // dBm
  double f_rf = 130e6;            // Hz
  double settle_time = 0.5e-6;    // s
  double measure_time = 2e-6;     // s
  std::size_t seed_count = 1;     // seeds master_seed, master_seed + 1, ...
  mixer::Sideband sideband = mixer::Sideband::lower;
  std::size_t tap = 0;
  double band = 0.0;              // Hz, 0 selects f_rf / 5
  double floor_margin_db = 3.0;

  bool operator==(const SweepSettings&) const = default;
};

struct CompareSettings {
  std::size_t seed_pairs = 8;  // seeds master_seed, master_seed + 1, ...

  bool operator==(const CompareSettings&) const = default;
};

struct VolumeSettings {
  std::vector<double> volumes;  // m^3
  bool scale_with_volume = true;

  bool operator==(const VolumeSettings&) const = default;
};

struct AnalysisSettings : experiments::AnalysisOptions {
  bool operator==(const AnalysisSettings& o) const {
    return settle_fraction == o.settle_fraction && f_min == o.f_min && f_max == o.f_max &&
           welch_segments == o.welch_segments && pn_lo == o.pn_lo && pn_hi == o.pn_hi;
  }
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  Experiment experiment = Experiment::trajectory;
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";
  magnetics::DeviceParams device;
  NetworkSettings network;
  sde::StepperConfig stepper;
  RunSettings run;
  AnalysisSettings analysis;
  SweepSettings sweep;
  CompareSettings compare;
  VolumeSettings volume_lock;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses and validates a JSON document. Unknown fields, wrong types and
/// violated constraints raise ConfigError naming the field path.
ExperimentConfig parse_config(std::string_view text);

/// Canonical JSON with every field present; parse_config(emit_config(c)) == c.
std::string emit_config(const ExperimentConfig& cfg);

/// Throws ConfigError naming the first violated constraint.
void validate(const ExperimentConfig& cfg);

/// Network description with overrides applied and the master seed set.
network::NetworkConfig build_network(const ExperimentConfig& cfg);

/// Consecutive seeds starting at master_seed.
std::vector<std::uint64_t> seed_list(std::uint64_t master_seed, std::size_t count);

}  // namespace stosim::io
