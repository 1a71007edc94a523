#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "stosim/config.hpp"
#include "stosim/spectral.hpp"
#include "stosim/trace.hpp"

namespace stosim::io {

inline constexpr const char* kSoftwareVersion = "0.1.0";

/// 17 significant digits ("%.17g").
std::string format_number(double x);

/// `time_s` followed by mx, my, mz, r, v, i_inj per oscillator. With more than
/// one oscillator the channel names carry an `oscJ_` prefix.
std::string trace_csv(const TraceSet& trace);

/// Two columns, `freq_hz,psd_v2_per_hz`.
std::string spectrum_csv(const spectral::Spectrum& s);

/// Writes to a temporary file in the same directory and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

std::string sha256_hex(std::string_view data);

struct RunManifest {
  std::string config_hash;  // sha256 of config.json as written
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  std::string software_version = kSoftwareVersion;
  double wall_time_s = 0.0;
};

/// Runs the configured experiment, writes its artifacts plus config.json
/// into cfg.output_dir, then writes manifest.json. Library errors propagate
/// (ConfigError, SimulationError, AnalysisError).
RunManifest run_experiment(const ExperimentConfig& cfg, std::size_t threads = 1);

}  // namespace stosim::io
