#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace stosim::spectral {

/// Floor used for the dB value of zero power (dBm, dBc/Hz).
inline constexpr double kFloorDb = -300.0;

/// 10 log10(x), clamped at kFloorDb.
double to_db(double ratio);
/// Power in watt to dBm, clamped at kFloorDb.
double watt_to_dbm(double watt);
double dbm_to_watt(double dbm);

enum class Detrend { none, mean, linear };

struct WelchOptions {
  std::size_t segment_len = 0;  // 0 selects the whole series
  double overlap = 0.5;
  Detrend detrend = Detrend::mean;
};

/// Single-sided power spectral density on a uniform grid from 0 to fs/2.
struct Spectrum {
  std::vector<double> frequencies;  // Hz
  std::vector<double> psd;          // V^2 / Hz
  double sample_rate = 0.0;
  double resolution_bw = 0.0;       // bin spacing, Hz
  std::size_t segment_len = 0;
  std::size_t n_segments = 0;
  std::string window = "hann";

  std::size_t size() const { return psd.size(); }
  /// Integral of the psd over all bins, V^2.
  double total_power() const;
  /// Index of the bin nearest to f.
  std::size_t bin_of(double f) const;
};

/// Hann-windowed, overlap-averaged Welch estimate. The window is normalized by
/// its power (sum w^2) so that total_power() equals the mean-square value of
/// the segments after detrending.
Spectrum welch_psd(std::span<const double> series, double fs, const WelchOptions& opts = {});

/// |total_power - var| / var for the series the spectrum was computed from.
double parseval_error(const Spectrum& s, std::span<const double> series);

struct BandPower {
  double mean_square = 0.0;  // V^2
  double watt = 0.0;
  double dbm = kFloorDb;
};

/// Integrates the psd over bins whose centres lie in [f0 - bw/2, f0 + bw/2]
/// and converts to power in r_load.
BandPower band_power(const Spectrum& s, double f0, double bw, double r_load);

struct Carrier {
  double frequency = 0.0;    // Hz, parabolic-refined
  double mean_square = 0.0;  // V^2 within +/- 3 resolution bandwidths
  std::size_t bin = 0;
};

/// Strongest psd bin within [f_min, f_max].
Carrier find_carrier(const Spectrum& s, double f_min, double f_max);

struct Linewidth {
  double fwhm = 0.0;  // Hz
  bool fitted = false;             // Lorentzian fit converged
  bool resolution_limited = false; // width <= 2 resolution bandwidths
};

/// FWHM from a least-squares Lorentzian (plus constant floor) fit around the
/// peak, falling back to the interpolated -3 dB crossing width.
Linewidth linewidth(const Spectrum& s, double f_peak);

struct PhaseSeries {
  std::vector<double> phase;  // rad, unwrapped, same length as input
  std::size_t valid_begin = 0;  // samples outside [valid_begin, valid_end)
  std::size_t valid_end = 0;    // are affected by the filter edges

  std::span<const double> valid() const {
    return std::span<const double>(phase).subspan(valid_begin, valid_end - valid_begin);
  }
};

/// Quadrature demodulation at f0: mix with exp(-i 2 pi f0 t), low-pass at
/// f0/2 with a Blackman-windowed sinc FIR, unwrap the four-quadrant angle.
PhaseSeries instantaneous_phase(std::span<const double> series, double fs, double f0);

struct PhaseNoiseCurve {
  std::vector<double> offsets;       // Hz
  std::vector<double> l_dbc_per_hz;  // dBc/Hz
};

/// L(df) = 10 log10(S_phi(df) / 2) with S_phi the single-sided PSD of the
/// linearly detrended phase.
PhaseNoiseCurve phase_noise(std::span<const double> phase, double fs, const WelchOptions& opts);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Least-squares slope of L against log10(offset) over [f_lo, f_hi], dB/decade.
double phase_noise_slope(const PhaseNoiseCurve& curve, double f_lo, double f_hi);

/// Level of the curve at `offset`, interpolated linearly in log-frequency.
double phase_noise_at(const PhaseNoiseCurve& curve, double offset);

}  // namespace stosim::spectral
