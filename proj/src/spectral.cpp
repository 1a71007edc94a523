#include "stosim/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "fft.hpp"
#include "stosim/constants.hpp"
#include "stosim/errors.hpp"

namespace stosim::spectral {

using constants::pi;
using constants::two_pi;

double to_db(double ratio) {
  if (!(ratio > 0.0)) return kFloorDb;
  return std::max(10.0 * std::log10(ratio), kFloorDb);
}

double watt_to_dbm(double watt) { return to_db(watt / 1e-3); }

double dbm_to_watt(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

double Spectrum::total_power() const {
  return std::accumulate(psd.begin(), psd.end(), 0.0) * resolution_bw;
}

std::size_t Spectrum::bin_of(double f) const {
  const double k = std::round(f / resolution_bw);
  return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(size() - 1)));
}

namespace {

void detrend(std::span<double> x, Detrend mode) {
  const std::size_t n = x.size();
  if (mode == Detrend::none || n == 0) return;
  if (mode == Detrend::mean || n < 2) {
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    for (double& v : x) v -= mean;
    return;
  }
  // Closed-form least squares against the sample index.
  const double nd = static_cast<double>(n);
  const double t_mean = 0.5 * (nd - 1.0);
  double y_mean = 0.0;
  for (double v : x) y_mean += v;
  y_mean /= nd;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = static_cast<double>(i) - t_mean;
    sxy += dt * (x[i] - y_mean);
    sxx += dt * dt;
  }
  const double slope = sxy / sxx;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] -= y_mean + slope * (static_cast<double>(i) - t_mean);
  }
}

std::vector<double> periodic_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(two_pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

}  // namespace

Spectrum welch_psd(std::span<const double> series, double fs, const WelchOptions& opts) {
  if (!(fs > 0.0)) throw AnalysisError("welch_psd: sample rate must be > 0");
  if (!(opts.overlap >= 0.0 && opts.overlap < 1.0)) {
    throw AnalysisError("welch_psd: overlap must be in [0, 1)");
  }
  const std::size_t len = opts.segment_len == 0 ? series.size() : opts.segment_len;
  if (len < 2 || series.size() < len) {
    throw AnalysisError("welch_psd: series shorter than one segment (" +
                        std::to_string(series.size()) + " < " + std::to_string(len) + ")");
  }
  const std::size_t hop = std::max<std::size_t>(
      1, len - static_cast<std::size_t>(std::floor(static_cast<double>(len) * opts.overlap)));
  const std::size_t n_seg = 1 + (series.size() - len) / hop;

  const std::vector<double> window = periodic_hann(len);
  const double u = std::inner_product(window.begin(), window.end(), window.begin(), 0.0);

  detail::RealFft fft(len);
  const std::size_t n_bins = len / 2 + 1;
  std::vector<double> acc(n_bins, 0.0);
  std::vector<double> segment(len);
  for (std::size_t s = 0; s < n_seg; ++s) {
    std::copy_n(series.begin() + static_cast<std::ptrdiff_t>(s * hop), len, segment.begin());
    detrend(segment, opts.detrend);
    auto in = fft.input();
    for (std::size_t i = 0; i < len; ++i) in[i] = segment[i] * window[i];
    fft.execute();
    const auto out = fft.output();
    for (std::size_t k = 0; k < n_bins; ++k) acc[k] += std::norm(out[k]);
  }

  Spectrum spec;
  spec.sample_rate = fs;
  spec.segment_len = len;
  spec.n_segments = n_seg;
  spec.resolution_bw = fs / static_cast<double>(len);
  spec.frequencies.resize(n_bins);
  spec.psd.resize(n_bins);
  const double scale = 1.0 / (static_cast<double>(n_seg) * fs * u);
  for (std::size_t k = 0; k < n_bins; ++k) {
    const bool unpaired = k == 0 || (len % 2 == 0 && k == len / 2);
    spec.frequencies[k] = static_cast<double>(k) * spec.resolution_bw;
    spec.psd[k] = (unpaired ? 1.0 : 2.0) * acc[k] * scale;
  }
  return spec;
}

double parseval_error(const Spectrum& s, std::span<const double> series) {
  const double n = static_cast<double>(series.size());
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  var /= n;
  return std::abs(s.total_power() - var) / var;
}

BandPower band_power(const Spectrum& s, double f0, double bw, double r_load) {
  const double nyquist = s.frequencies.back();
  if (!(f0 >= 0.0 && f0 <= nyquist)) throw AnalysisError("band_power: centre outside spectrum range");
  if (!(bw >= s.resolution_bw)) throw AnalysisError("band_power: bandwidth below resolution");
  if (!(r_load > 0.0)) throw AnalysisError("band_power: load must be > 0");
  const double lo = f0 - 0.5 * bw;
  const double hi = f0 + 0.5 * bw;
  const double tol = 1e-9 * s.resolution_bw;
  double sum = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double f = s.frequencies[k];
    if (f >= lo - tol && f <= hi + tol) sum += s.psd[k];
  }
  BandPower out;
  out.mean_square = sum * s.resolution_bw;
  out.watt = out.mean_square / r_load;
  out.dbm = watt_to_dbm(out.watt);
  return out;
}

Carrier find_carrier(const Spectrum& s, double f_min, double f_max) {
  const double tol = 1e-9 * s.resolution_bw;
  std::size_t best = s.size();
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double f = s.frequencies[k];
    if (f < f_min - tol || f > f_max + tol) continue;
    if (best == s.size() || s.psd[k] > s.psd[best]) best = k;
  }
  if (best == s.size()) throw AnalysisError("find_carrier: empty frequency range");

  Carrier c;
  c.bin = best;
  c.frequency = s.frequencies[best];
  if (best > 0 && best + 1 < s.size()) {
    // Parabola through the log-psd of the peak and its neighbours.
    const double tiny = std::numeric_limits<double>::min();
    const double a = std::log(s.psd[best - 1] + tiny);
    const double b = std::log(s.psd[best] + tiny);
    const double g = std::log(s.psd[best + 1] + tiny);
    const double denom = a - 2.0 * b + g;
    if (denom < 0.0) {
      const double delta = 0.5 * (a - g) / denom;
      c.frequency += std::clamp(delta, -0.5, 0.5) * s.resolution_bw;
    }
  }
  const std::size_t lo = best >= 3 ? best - 3 : 0;
  const std::size_t hi = std::min(best + 3, s.size() - 1);
  double sum = 0.0;
  for (std::size_t k = lo; k <= hi; ++k) sum += s.psd[k];
  c.mean_square = sum * s.resolution_bw;
  return c;
}

namespace {

/// a / (1 + ((x - x0) / h)^2) + c over normalized coordinates.
struct LorentzResidual : Eigen::DenseFunctor<double> {
  LorentzResidual(std::vector<double> x, std::vector<double> y)
      : Eigen::DenseFunctor<double>(4, static_cast<int>(x.size())), x_(std::move(x)), y_(std::move(y)) {}

  int operator()(const InputType& p, ValueType& r) const {
    for (std::size_t i = 0; i < x_.size(); ++i) {
      const double u = (x_[i] - p[1]) / p[2];
      r[static_cast<Eigen::Index>(i)] = p[0] / (1.0 + u * u) + p[3] - y_[i];
    }
    return 0;
  }

  int df(const InputType& p, JacobianType& j) const {
    for (std::size_t i = 0; i < x_.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const double u = (x_[i] - p[1]) / p[2];
      const double d = 1.0 / (1.0 + u * u);
      j(row, 0) = d;
      j(row, 1) = p[0] * d * d * 2.0 * u / p[2];
      j(row, 2) = p[0] * d * d * 2.0 * u * u / p[2];
      j(row, 3) = 1.0;
    }
    return 0;
  }

  std::vector<double> x_, y_;
};

/// Centered moving average over 2 * half + 1 bins.
std::vector<double> smooth(std::span<const double> y, std::size_t half) {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t lo = i > half ? i - half : 0;
    const std::size_t hi = std::min(i + half, y.size() - 1);
    double sum = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) sum += y[k];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

/// Walks uphill from k to the nearest local maximum of y.
std::size_t climb(std::span<const double> y, std::size_t k) {
  while (k > 0 && k + 1 < y.size() && (y[k - 1] > y[k] || y[k + 1] > y[k])) {
    k = y[k - 1] > y[k + 1] ? k - 1 : k + 1;
  }
  return k;
}

/// Width between the interpolated half-maximum crossings on either side of k,
/// in bins.
double half_max_width(std::span<const double> y, std::size_t k) {
  const double half = 0.5 * y[k];
  auto crossing = [&](int dir) {
    std::size_t i = k;
    while (true) {
      if ((dir < 0 && i == 0) || (dir > 0 && i + 1 >= y.size())) return static_cast<double>(i);
      const std::size_t next = dir < 0 ? i - 1 : i + 1;
      if (y[next] <= half) {
        const double frac = (y[i] - half) / (y[i] - y[next]);
        return static_cast<double>(i) + dir * frac;
      }
      i = next;
    }
  };
  return crossing(+1) - crossing(-1);
}

}  // namespace

Linewidth linewidth(const Spectrum& s, double f_peak) {
  const std::size_t k = climb(s.psd, s.bin_of(f_peak));
  if (k == 0 || k + 1 >= s.size()) throw AnalysisError("linewidth: peak at spectrum edge");
  if (!(s.psd[k] > 0.0)) throw AnalysisError("linewidth: no spectral peak");

  // Broad, noisy lines: take the initial width from smoothed copies whose
  // kernel is at most a quarter of the width they measure, so noisy bins do
  // not set the scale. The fit uses the raw psd.
  const double rbw = s.resolution_bw;
  double estimate = half_max_width(s.psd, k);
  for (std::size_t half = 2; 4 * half < s.size(); half *= 2) {
    const std::vector<double> smoothed = smooth(s.psd, half);
    const double width = half_max_width(smoothed, climb(smoothed, k));
    if (width > 4.0 * static_cast<double>(2 * half + 1)) estimate = std::max(estimate, width);
  }
  estimate *= rbw;
  const double peak = s.psd[k];
  const double half_window = std::max(20.0 * rbw, 2.0 * estimate);
  const auto span_bins = static_cast<std::size_t>(std::ceil(half_window / rbw));
  const std::size_t lo = k > span_bins ? k - span_bins : 0;
  const std::size_t hi = std::min(k + span_bins, s.size() - 1);

  // Fit in units of bins relative to the peak and of the peak height.
  std::vector<double> x, y;
  for (std::size_t i = lo; i <= hi; ++i) {
    x.push_back(static_cast<double>(i) - static_cast<double>(k));
    y.push_back(s.psd[i] / peak);
  }
  Linewidth out;
  out.fwhm = estimate;
  if (x.size() >= 5) {
    LorentzResidual residual(x, y);
    Eigen::LevenbergMarquardt<LorentzResidual> lm(residual);
    Eigen::VectorXd p(4);
    p << 1.0, 0.0, std::max(0.5 * estimate / rbw, 0.25), 0.0;
    const auto status = lm.minimize(p);
    const double fwhm = 2.0 * std::abs(p[2]) * rbw;
    const bool converged = status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters &&
                           status != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation;
    if (converged && std::isfinite(fwhm) && fwhm > 0.0 && p[0] > 0.0 &&
        std::abs(p[1]) <= static_cast<double>(span_bins) && fwhm < 4.0 * half_window) {
      out.fwhm = fwhm;
      out.fitted = true;
    }
  }
  out.resolution_limited = out.fwhm <= 2.0 * rbw;
  return out;
}

namespace {

std::vector<double> blackman_sinc_lowpass(double cutoff, double fs, std::size_t taps) {
  std::vector<double> h(taps);
  const double m = 0.5 * static_cast<double>(taps - 1);
  const double wc = two_pi * cutoff / fs;
  for (std::size_t k = 0; k < taps; ++k) {
    const double n = static_cast<double>(k) - m;
    const double sinc = n == 0.0 ? wc / pi : std::sin(wc * n) / (pi * n);
    const double phase = two_pi * static_cast<double>(k) / static_cast<double>(taps - 1);
    const double w = 0.42 - 0.5 * std::cos(phase) + 0.08 * std::cos(2.0 * phase);
    h[k] = sinc * w;
  }
  const double sum = std::accumulate(h.begin(), h.end(), 0.0);
  for (double& v : h) v /= sum;
  return h;
}

}  // namespace

PhaseSeries instantaneous_phase(std::span<const double> series, double fs, double f0) {
  if (!(f0 > 0.0 && f0 < 0.5 * fs)) throw AnalysisError("instantaneous_phase: f0 outside (0, fs/2)");
  const std::size_t n = series.size();
  // Blackman transition width is about 5.5 fs / taps; place the stopband
  // edge at 3 f0 / 4 so the mixing image and DC leakage are rejected.
  std::size_t taps = static_cast<std::size_t>(std::ceil(11.0 * fs / f0));
  taps |= 1u;
  if (n < taps + 10 || static_cast<double>(n) < 10.0 * fs / f0) {
    throw AnalysisError("instantaneous_phase: series too short for the demodulation filter");
  }
  const std::vector<double> h = blackman_sinc_lowpass(0.5 * f0, fs, taps);
  const std::size_t half = taps / 2;

  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  const double cycles_per_sample = f0 / fs;
  std::vector<double> re(n), im(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double cycles = cycles_per_sample * static_cast<double>(i);
    const double arg = two_pi * (cycles - std::floor(cycles));
    const double x = series[i] - mean;
    re[i] = x * std::cos(arg);
    im[i] = -x * std::sin(arg);
  }

  PhaseSeries out;
  out.phase.assign(n, 0.0);
  out.valid_begin = half;
  out.valid_end = n - half;
  double previous = 0.0;
  double offset = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sr = 0.0, si = 0.0;
    const std::size_t k_lo = i < half ? half - i : 0;
    const std::size_t k_hi = std::min(taps, n + half - i);
    for (std::size_t k = k_lo; k < k_hi; ++k) {
      const std::size_t src = i + k - half;
      sr += h[k] * re[src];
      si += h[k] * im[src];
    }
    const double wrapped = std::atan2(si, sr);
    if (i > 0) {
      double d = wrapped - previous;
      if (d > pi) offset -= two_pi;
      else if (d < -pi) offset += two_pi;
    }
    previous = wrapped;
    out.phase[i] = wrapped + offset;
  }
  return out;
}

PhaseNoiseCurve phase_noise(std::span<const double> phase, double fs, const WelchOptions& opts) {
  const std::size_t len = opts.segment_len == 0 ? phase.size() : opts.segment_len;
  if (phase.size() < len || len < 2) {
    throw AnalysisError("phase_noise: fewer samples than one PSD segment");
  }
  std::vector<double> detrended(phase.begin(), phase.end());
  detrend(detrended, Detrend::linear);
  WelchOptions w = opts;
  w.segment_len = len;
  w.detrend = Detrend::linear;
  const Spectrum s = welch_psd(detrended, fs, w);
  PhaseNoiseCurve curve;
  for (std::size_t k = 1; k < s.size(); ++k) {
    curve.offsets.push_back(s.frequencies[k]);
    curve.l_dbc_per_hz.push_back(to_db(0.5 * s.psd[k]));
  }
  return curve;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw AnalysisError("fit_line: need at least two paired points");
  const double xm = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double ym = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - xm) * (y[i] - ym);
    sxx += (x[i] - xm) * (x[i] - xm);
  }
  if (sxx == 0.0) throw AnalysisError("fit_line: abscissae are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = ym - f.slope * xm;
  return f;
}

double phase_noise_slope(const PhaseNoiseCurve& curve, double f_lo, double f_hi) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < curve.offsets.size(); ++i) {
    if (curve.offsets[i] >= f_lo && curve.offsets[i] <= f_hi) {
      lx.push_back(std::log10(curve.offsets[i]));
      ly.push_back(curve.l_dbc_per_hz[i]);
    }
  }
  return fit_line(lx, ly).slope;
}

double phase_noise_at(const PhaseNoiseCurve& curve, double offset) {
  const auto& f = curve.offsets;
  if (f.empty()) throw AnalysisError("phase_noise_at: empty curve");
  if (offset <= f.front()) return curve.l_dbc_per_hz.front();
  if (offset >= f.back()) return curve.l_dbc_per_hz.back();
  const auto it = std::upper_bound(f.begin(), f.end(), offset);
  const std::size_t i = static_cast<std::size_t>(it - f.begin());
  const double w = (std::log(offset) - std::log(f[i - 1])) / (std::log(f[i]) - std::log(f[i - 1]));
  return (1.0 - w) * curve.l_dbc_per_hz[i - 1] + w * curve.l_dbc_per_hz[i];
}

}  // namespace stosim::spectral
