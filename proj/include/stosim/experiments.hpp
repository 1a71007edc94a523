#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stosim/integrator.hpp"
#include "stosim/network.hpp"
#include "stosim/spectral.hpp"
#include "stosim/trace.hpp"

namespace stosim::experiments {

struct AnalysisOptions {
  double settle_fraction = 0.2;  // leading part of the record discarded
  double f_min = 5e8;            // carrier search band, Hz
  double f_max = 3e9;
  std::size_t welch_segments = 4;  // half-overlapping segments per record
  double pn_lo = 2e6;              // phase-noise slope fit band, Hz
  double pn_hi = 2e7;
};

void validate(const AnalysisOptions& opts);

/// Drops the settling part of a trace.
TraceSet settled(const TraceSet& trace, const AnalysisOptions& opts);

/// Welch spectrum of one oscillator's voltage.
spectral::Spectrum voltage_spectrum(const TraceSet& trace, std::size_t osc,
                                    const AnalysisOptions& opts);

struct OscillatorMetrics {
  double f_osc = 0.0;        // Hz
  double power_dbm = 0.0;    // carrier band power into R_av
  double linewidth = 0.0;    // Hz, FWHM
  bool fitted = false;
  bool resolution_limited = false;
  double pn_slope = 0.0;     // dB/decade over [pn_lo, pn_hi]
  double l_1mhz = 0.0;       // dBc/Hz at 1 MHz offset
};

/// Carrier, linewidth and phase noise of oscillator `osc` in an already
/// settled trace. `r_load` converts mean-square volts to dBm.
OscillatorMetrics analyse_oscillator(const TraceSet& trace, std::size_t osc, double r_load,
                                     const AnalysisOptions& opts);

struct CompareRun {
  std::uint64_t seed = 0;
  std::vector<OscillatorMetrics> coupled;
  std::vector<OscillatorMetrics> uncoupled;
};

struct PsdCompareResult {
  std::vector<CompareRun> runs;
  double median_linewidth_coupled = 0.0;
  double median_linewidth_uncoupled = 0.0;
  double median_power_coupled = 0.0;  // dBm
  double median_power_uncoupled = 0.0;
  bool narrower = false;  // coupled median linewidth strictly below uncoupled
  bool stronger = false;  // coupled median power strictly above uncoupled
  spectral::Spectrum spectrum_coupled;    // oscillator 0, averaged over seeds
  spectral::Spectrum spectrum_uncoupled;
};

/// Runs `cfg` with its topology and with topology none for every seed and
/// compares medians over all oscillators and seeds.
PsdCompareResult psd_compare(const network::NetworkConfig& cfg, const sde::StepperConfig& stepper,
                             const network::SimulationOptions& sim, const AnalysisOptions& opts,
                             std::span<const std::uint64_t> seeds, std::size_t threads);

double median(std::vector<double> values);

}  // namespace stosim::experiments
