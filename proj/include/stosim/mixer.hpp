#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stosim/integrator.hpp"
#include "stosim/network.hpp"
#include "stosim/spectral.hpp"
#include "stosim/trace.hpp"

namespace stosim::mixer {

struct PowerLevel {
  double watt = 0.0;
  double dbm = spectral::kFloorDb;
};

/// P_in = (i_ac / sqrt 2)^2 r_av for a sinusoidal current of amplitude i_ac.
PowerLevel input_power(double i_ac, double r_av);

/// Inverse of input_power: the current amplitude delivering `p_in_dbm`.
double drive_amplitude(double p_in_dbm, double r_av);

/// Rounds a dB value to a multiple of 2^-40 dB. Sums and differences of such
/// values (magnitude below 2^12) are exact in double precision.
double quantize_db(double db);

enum class Sideband { lower, upper };
enum class LockState { locked, unlocked, partial };

const char* to_string(Sideband s);
const char* to_string(LockState s);

struct MeasureOptions {
  double r_load = 0.0;           // ohm
  double band = 0.0;             // Hz, integration width; 0 selects f_rf / 5
  double floor_margin_db = 3.0;  // detection threshold above the local median psd
};

struct ProductPower {
  double frequency = 0.0;  // Hz
  double dbm = spectral::kFloorDb;
  double snr_db = 0.0;     // peak psd over the local median psd
};

/// Power of a mixing product at `f`. The local noise floor is the median psd
/// over f +/- f_rf/2; throws NoSidebandError when the strongest bin inside the
/// integration band is less than floor_margin_db above it.
ProductPower product_power(const spectral::Spectrum& s, double f, double f_rf,
                           const MeasureOptions& opts);

/// Welch spectrum of the tap oscillator's voltage with four half-overlapping
/// segments, checked against the resolution requirement RBW <= f_rf / 30.
spectral::Spectrum output_spectrum(const TraceSet& trace, std::size_t tap, double f_rf);

double sideband_frequency(double f_osc, double f_rf, Sideband side);

/// p_sideband - p_in in dB.
double conversion_gain(const spectral::Spectrum& s, double f_osc, double f_rf, double p_in_dbm,
                       Sideband side, const MeasureOptions& opts);
double conversion_gain(const TraceSet& trace, std::size_t tap, double f_osc, double f_rf,
                       double p_in_dbm, Sideband side, const MeasureOptions& opts);

/// Band power of the single-tone third-order product at f_osc - 3 f_rf, dBm.
double third_order_power(const spectral::Spectrum& s, double f_osc, double f_rf,
                         const MeasureOptions& opts);
double third_order_power(const TraceSet& trace, std::size_t tap, double f_osc, double f_rf,
                         const MeasureOptions& opts);

struct SweepPoint {
  double p_in = 0.0;   // dBm
  double p_out = 0.0;  // dBm
};

struct P1dbOptions {
  double low_region_margin = 6.0;  // dB below the largest input
  double linear_tolerance = 0.2;   // dB, admissible deviation inside the fit region
};

/// Input power at which the output falls 1 dB below the unit-slope small-signal
/// line. The line is fitted over the points at least low_region_margin below
/// the largest input, dropping the highest of them while any deviates from the
/// fit by more than linear_tolerance. Absent when the deviation never reaches
/// 1 dB.
std::optional<double> p1db_sweep(std::span<const SweepPoint> points, const P1dbOptions& opts = {});

struct Intercept {
  double iip3 = 0.0;         // dBm
  double oip3 = 0.0;         // dBm
  double fund_offset = 0.0;  // p_out = p_in + fund_offset
  double third_offset = 0.0; // p_out = 3 p_in + third_offset
  double fund_slope = 0.0;   // unconstrained fits, diagnostics
  double third_slope = 0.0;
  std::size_t n_fund = 0;
  std::size_t n_third = 0;
};

/// Intersects the slope-1 and slope-3 least-squares lines. When `p1db` is
/// given only points at least 5 dB below it are used. Throws AnalysisError for
/// fewer than three usable points per curve and NonCubicRegimeError when the
/// free slopes leave [0.7, 1.3] or [2.4, 3.6].
Intercept iip3_extrapolate(std::span<const SweepPoint> fund, std::span<const SweepPoint> third,
                           std::optional<double> p1db = std::nullopt);

struct LockResult {
  LockState state = LockState::unlocked;
  double drift = 0.0;         // rad/s, slope of phase_a - phase_b
  double residual_std = 0.0;  // rad
};

/// Locked iff |d(phi_a - phi_b)/dt| < 2 pi 0.001 f_osc and the residual of
/// the phase difference about its linear fit has std below pi/4.
LockResult lock_detector(std::span<const double> phase_a, std::span<const double> phase_b,
                         double fs, double f_osc);

struct NetworkLock {
  LockState state = LockState::locked;
  double f_osc = 0.0;  // Hz, demodulation frequency
  std::vector<LockResult> pairs;  // (0,1), (0,2), ..., (1,2), ...
};

/// Demodulates every oscillator at the carrier of oscillator 0 (strongest bin
/// in [f_min, f_max]) and classifies all pairs: every pair locked gives
/// locked, none gives unlocked, otherwise partial. A single oscillator is
/// reported locked.
NetworkLock network_lock(const TraceSet& trace, double f_min, double f_max);

/// Combines verdicts from repeated runs.
LockState combine(std::span<const LockState> states);

struct VolumeStudyOptions {
  double duration = 2e-6;        // s
  double settle_fraction = 0.2;  // discarded before analysis
  std::size_t sample_stride = 20;
  double f_min = 0.0;            // carrier search band, Hz
  double f_max = 0.0;
  /// Scale bias and RF currents and g_m by V / V_ref and resistances by
  /// V_ref / V, which leaves the noiseless dynamics unchanged.
  bool scale_with_volume = true;
  std::size_t threads = 1;
};

struct VolumeVerdict {
  double volume = 0.0;  // m^3
  NetworkLock lock;
};

/// Runs the network once per volume (V_ref is oscillator 0's volume in
/// `base`) and applies network_lock.
std::vector<VolumeVerdict> volume_lock_study(const network::NetworkConfig& base,
                                             std::span<const double> volumes,
                                             const sde::StepperConfig& stepper,
                                             const VolumeStudyOptions& opts);

/// Smallest volume above which every verdict is locked, provided some smaller
/// volume is not locked.
std::optional<double> transition_volume(std::span<const VolumeVerdict> verdicts);

struct SweepSpec {
  std::vector<double> p_in_grid;  // dBm, strictly increasing
  double f_rf = 0.0;              // Hz
  double settle_time = 0.0;       // s
  double measure_time = 0.0;      // s
  std::vector<std::uint64_t> seeds;
};

void validate(const SweepSpec& spec);

struct MixerReport {
  double f_osc = 0.0;  // Hz
  double f_rf = 0.0;   // Hz
  double p_in = 0.0;   // dBm
  Sideband sideband = Sideband::lower;
  std::optional<double> p_sideband_low;   // dBm at f_osc - f_rf
  std::optional<double> p_sideband_high;  // dBm at f_osc + f_rf
  std::optional<double> p_third;          // dBm at f_osc - 3 f_rf
  std::optional<double> conversion_gain;  // dB, chosen sideband
  std::optional<double> p1db_in;
  std::optional<double> iip3;
  std::optional<double> oip3;
  LockState lock = LockState::locked;
};

/// Measures one operating point on an already simulated trace.
MixerReport measure_point(const spectral::Spectrum& s, double p_in_dbm, double f_rf,
                          double f_min, double f_max, Sideband side, const MeasureOptions& opts);

struct MixerSweepOptions {
  std::size_t tap = 0;  // output oscillator; the RF tone is injected here too
  std::size_t sample_stride = 20;
  double f_min = 0.0;   // carrier search band, Hz
  double f_max = 0.0;
  Sideband sideband = Sideband::lower;
  MeasureOptions measure;  // r_load 0 selects the tap's R_av
  P1dbOptions p1db;
  std::size_t threads = 1;
};

struct MixerSweepResult {
  std::vector<MixerReport> points;  // one per p_in, spectra averaged over seeds
  std::optional<double> p1db_in;
  std::optional<Intercept> intercept;
  std::string p1db_error;       // reason when the sweep could not be analysed
  std::string intercept_error;  // reason when intercept is absent
  std::vector<spectral::Spectrum> spectra;  // seed-averaged output spectrum per point
};

/// Adds an RF tone at f_rf to `base` for every grid power and seed, simulates
/// settle_time + measure_time and measures the tap output after settling.
/// Points and seeds run in parallel; results are reduced in grid order.
MixerSweepResult run_mixer_sweep(const network::NetworkConfig& base, const SweepSpec& spec,
                                 const sde::StepperConfig& stepper,
                                 const MixerSweepOptions& opts);

}  // namespace stosim::mixer
