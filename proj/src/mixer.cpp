#include "stosim/mixer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stosim/constants.hpp"
#include "stosim/errors.hpp"
#include "stosim/parallel.hpp"

namespace stosim::mixer {

using spectral::Spectrum;

PowerLevel input_power(double i_ac, double r_av) {
  if (!(i_ac >= 0.0)) throw ConfigError("i_ac", "must be >= 0");
  if (!(r_av > 0.0)) throw ConfigError("r_av", "must be > 0");
  const double rms = i_ac / std::sqrt(2.0);
  PowerLevel out;
  out.watt = rms * rms * r_av;
  out.dbm = spectral::watt_to_dbm(out.watt);
  return out;
}

double drive_amplitude(double p_in_dbm, double r_av) {
  if (!(r_av > 0.0)) throw ConfigError("r_av", "must be > 0");
  return std::sqrt(2.0 * spectral::dbm_to_watt(p_in_dbm) / r_av);
}

double quantize_db(double db) {
  constexpr double scale = 1099511627776.0;  // 2^40
  return std::nearbyint(db * scale) / scale;
}

const char* to_string(Sideband s) { return s == Sideband::lower ? "lower" : "upper"; }

const char* to_string(LockState s) {
  switch (s) {
    case LockState::locked: return "locked";
    case LockState::unlocked: return "unlocked";
    case LockState::partial: return "partial";
  }
  return "unknown";
}

namespace {

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double band_of(const MeasureOptions& opts, double f_rf) {
  return opts.band > 0.0 ? opts.band : f_rf / 5.0;
}

}  // namespace

ProductPower product_power(const Spectrum& s, double f, double f_rf, const MeasureOptions& opts) {
  if (!(f_rf > 0.0)) throw ConfigError("f_rf", "must be > 0");
  if (!(opts.r_load > 0.0)) throw ConfigError("r_load", "must be > 0");
  const double bw = band_of(opts, f_rf);
  const auto bp = spectral::band_power(s, f, bw, opts.r_load);

  std::vector<double> local;
  double peak = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double d = std::abs(s.frequencies[k] - f);
    if (d <= 0.5 * f_rf) local.push_back(s.psd[k]);
    if (d <= 0.5 * bw) peak = std::max(peak, s.psd[k]);
  }
  const double floor = median(std::move(local));
  ProductPower out;
  out.frequency = f;
  out.dbm = bp.dbm;
  out.snr_db = floor > 0.0 ? 10.0 * std::log10(peak / floor) : (peak > 0.0 ? 300.0 : 0.0);
  if (!(out.snr_db >= opts.floor_margin_db)) {
    throw NoSidebandError("no product above the noise floor at " + std::to_string(f) + " Hz");
  }
  return out;
}

Spectrum output_spectrum(const TraceSet& trace, std::size_t tap, double f_rf) {
  if (tap >= trace.oscillators.size()) throw ConfigError("tap", "index out of range");
  const auto& v = trace.oscillators[tap].v;
  const std::size_t seg = v.size() / 4;
  if (seg < 8 || trace.sample_rate / static_cast<double>(seg) > f_rf / 30.0) {
    throw AnalysisError("measurement too short: resolution bandwidth exceeds f_rf/30");
  }
  spectral::WelchOptions w;
  w.segment_len = seg;
  w.overlap = 0.5;
  w.detrend = spectral::Detrend::mean;
  return spectral::welch_psd(v, trace.sample_rate, w);
}

double sideband_frequency(double f_osc, double f_rf, Sideband side) {
  return side == Sideband::lower ? f_osc - f_rf : f_osc + f_rf;
}

double conversion_gain(const Spectrum& s, double f_osc, double f_rf, double p_in_dbm, Sideband side,
                       const MeasureOptions& opts) {
  const auto p = product_power(s, sideband_frequency(f_osc, f_rf, side), f_rf, opts);
  return quantize_db(p.dbm) - quantize_db(p_in_dbm);
}

double conversion_gain(const TraceSet& trace, std::size_t tap, double f_osc, double f_rf,
                       double p_in_dbm, Sideband side, const MeasureOptions& opts) {
  return conversion_gain(output_spectrum(trace, tap, f_rf), f_osc, f_rf, p_in_dbm, side, opts);
}

double third_order_power(const Spectrum& s, double f_osc, double f_rf, const MeasureOptions& opts) {
  return product_power(s, f_osc - 3.0 * f_rf, f_rf, opts).dbm;
}

double third_order_power(const TraceSet& trace, std::size_t tap, double f_osc, double f_rf,
                         const MeasureOptions& opts) {
  return third_order_power(output_spectrum(trace, tap, f_rf), f_osc, f_rf, opts);
}

namespace {

void require_increasing(std::span<const SweepPoint> pts, const char* what) {
  for (std::size_t k = 1; k < pts.size(); ++k) {
    if (!(pts[k].p_in > pts[k - 1].p_in)) {
      throw AnalysisError(std::string(what) + ": input powers must be strictly increasing");
    }
  }
}

double mean_offset(std::span<const SweepPoint> pts, double slope) {
  double sum = 0.0;
  for (const auto& p : pts) sum += p.p_out - slope * p.p_in;
  return sum / static_cast<double>(pts.size());
}

double free_slope(std::span<const SweepPoint> pts) {
  std::vector<double> x, y;
  for (const auto& p : pts) {
    x.push_back(p.p_in);
    y.push_back(p.p_out);
  }
  return spectral::fit_line(x, y).slope;
}

}  // namespace

std::optional<double> p1db_sweep(std::span<const SweepPoint> points, const P1dbOptions& opts) {
  if (points.size() < 5) throw AnalysisError("p1db_sweep: at least 5 points required");
  require_increasing(points, "p1db_sweep");
  const double limit = points.back().p_in - opts.low_region_margin;
  std::size_t m = 0;
  while (m < points.size() && points[m].p_in <= limit) ++m;
  if (m < 2) throw AnalysisError("p1db_sweep: fewer than 2 points in the small-signal region");

  double gain = 0.0;
  for (;; --m) {
    gain = mean_offset(points.first(m), 1.0);
    double worst = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      worst = std::max(worst, std::abs(points[k].p_out - points[k].p_in - gain));
    }
    if (worst <= opts.linear_tolerance || m == 2) break;
  }

  double prev = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double dev = points[k].p_in + gain - points[k].p_out;
    if (dev >= 1.0) {
      if (k == 0) return points[0].p_in;
      const double t = (1.0 - prev) / (dev - prev);
      return points[k - 1].p_in + t * (points[k].p_in - points[k - 1].p_in);
    }
    prev = dev;
  }
  return std::nullopt;
}

Intercept iip3_extrapolate(std::span<const SweepPoint> fund, std::span<const SweepPoint> third,
                           std::optional<double> p1db) {
  auto usable = [&](std::span<const SweepPoint> pts) {
    std::vector<SweepPoint> out;
    for (const auto& p : pts) {
      if (!p1db || p.p_in <= *p1db - 5.0) out.push_back(p);
    }
    return out;
  };
  const auto f = usable(fund);
  const auto t = usable(third);
  if (f.size() < 3 || t.size() < 3) {
    throw AnalysisError("iip3_extrapolate: at least 3 low-power points per curve required");
  }
  require_increasing(f, "iip3_extrapolate");
  require_increasing(t, "iip3_extrapolate");

  Intercept r;
  r.n_fund = f.size();
  r.n_third = t.size();
  r.fund_offset = mean_offset(f, 1.0);
  r.third_offset = mean_offset(t, 3.0);
  r.fund_slope = free_slope(f);
  r.third_slope = free_slope(t);
  if (r.fund_slope < 0.7 || r.fund_slope > 1.3 || r.third_slope < 2.4 || r.third_slope > 3.6) {
    throw NonCubicRegimeError("non-cubic regime: fitted slopes " + std::to_string(r.fund_slope) +
                              " and " + std::to_string(r.third_slope) +
                              " dB/dB; use lower input powers");
  }
  r.iip3 = 0.5 * (r.fund_offset - r.third_offset);
  r.oip3 = r.iip3 + r.fund_offset;
  return r;
}

LockResult lock_detector(std::span<const double> phase_a, std::span<const double> phase_b,
                         double fs, double f_osc) {
  if (phase_a.size() != phase_b.size()) throw AnalysisError("lock_detector: length mismatch");
  if (!(fs > 0.0) || !(f_osc > 0.0)) throw AnalysisError("lock_detector: fs and f_osc must be > 0");
  const std::size_t n = phase_a.size();
  if (n < 2 || static_cast<double>(n) / fs < 100.0 / f_osc) {
    throw AnalysisError("lock_detector: fewer than 100 carrier periods");
  }
  std::vector<double> t(n), d(n);
  for (std::size_t k = 0; k < n; ++k) {
    t[k] = static_cast<double>(k) / fs;
    d[k] = phase_a[k] - phase_b[k];
  }
  const auto fit = spectral::fit_line(t, d);
  double ss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = d[k] - fit.intercept - fit.slope * t[k];
    ss += r * r;
  }
  LockResult out;
  out.drift = fit.slope;
  out.residual_std = std::sqrt(ss / static_cast<double>(n));
  const bool locked = std::abs(out.drift) < constants::two_pi * 1e-3 * f_osc &&
                      out.residual_std < constants::pi / 4.0;
  out.state = locked ? LockState::locked : LockState::unlocked;
  return out;
}

LockState combine(std::span<const LockState> states) {
  bool any_locked = false, any_unlocked = false;
  for (auto s : states) {
    if (s == LockState::partial) return LockState::partial;
    (s == LockState::locked ? any_locked : any_unlocked) = true;
  }
  if (any_locked && any_unlocked) return LockState::partial;
  return any_unlocked ? LockState::unlocked : LockState::locked;
}

NetworkLock network_lock(const TraceSet& trace, double f_min, double f_max) {
  const std::size_t n = trace.oscillators.size();
  if (n == 0) throw AnalysisError("network_lock: empty trace");
  spectral::WelchOptions w;
  w.segment_len = trace.size() / 4;
  const auto s = spectral::welch_psd(trace.oscillators[0].v, trace.sample_rate, w);
  NetworkLock out;
  out.f_osc = spectral::find_carrier(s, f_min, f_max).frequency;
  if (n == 1) return out;

  std::vector<spectral::PhaseSeries> phases;
  std::size_t begin = 0, end = trace.size();
  for (const auto& o : trace.oscillators) {
    phases.push_back(spectral::instantaneous_phase(o.v, trace.sample_rate, out.f_osc));
    begin = std::max(begin, phases.back().valid_begin);
    end = std::min(end, phases.back().valid_end);
  }
  if (end <= begin) throw AnalysisError("network_lock: trace shorter than the demodulation filter");
  std::vector<LockState> states;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      auto pa = std::span<const double>(phases[a].phase).subspan(begin, end - begin);
      auto pb = std::span<const double>(phases[b].phase).subspan(begin, end - begin);
      out.pairs.push_back(lock_detector(pa, pb, trace.sample_rate, out.f_osc));
      states.push_back(out.pairs.back().state);
    }
  }
  out.state = combine(states);
  return out;
}

namespace {

network::NetworkConfig scaled_to_volume(const network::NetworkConfig& base, double volume,
                                        bool scale) {
  auto cfg = base;
  const double s = volume / base.oscillators.front().volume;
  for (auto& p : cfg.oscillators) {
    if (scale) {
      p.volume *= s;
      p.r_p /= s;
      p.r_ap /= s;
    } else {
      p.volume = volume;
    }
  }
  if (scale) {
    for (auto& i : cfg.i_dc) i *= s;
    for (auto& tone : cfg.rf_tones) tone.amplitude *= s;
    cfg.g_m *= s;
  }
  return cfg;
}

std::size_t settle_samples(double settle, double fs) {
  return static_cast<std::size_t>(std::llround(settle * fs));
}

}  // namespace

std::vector<VolumeVerdict> volume_lock_study(const network::NetworkConfig& base,
                                             std::span<const double> volumes,
                                             const sde::StepperConfig& stepper,
                                             const VolumeStudyOptions& opts) {
  if (volumes.size() < 2) throw ConfigError("volumes", "at least two volumes required");
  for (double v : volumes) {
    if (!(v > 0.0)) throw ConfigError("volumes", "must be > 0");
  }
  if (!(opts.settle_fraction >= 0.0 && opts.settle_fraction < 1.0)) {
    throw ConfigError("settle_fraction", "must lie in [0, 1)");
  }
  network::validate(base);
  std::vector<VolumeVerdict> out(volumes.size());
  parallel_for(volumes.size(), opts.threads, [&](std::size_t k) {
    const auto cfg = scaled_to_volume(base, volumes[k], opts.scale_with_volume);
    network::SimulationOptions so{opts.duration, opts.sample_stride};
    const auto trace = network::simulate_network(cfg, stepper, so);
    const auto cut = trace.tail(settle_samples(opts.settle_fraction * opts.duration, trace.sample_rate));
    out[k].volume = volumes[k];
    out[k].lock = network_lock(cut, opts.f_min, opts.f_max);
  });
  return out;
}

std::optional<double> transition_volume(std::span<const VolumeVerdict> verdicts) {
  std::vector<const VolumeVerdict*> sorted;
  for (const auto& v : verdicts) sorted.push_back(&v);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->volume < b->volume; });
  std::size_t k = sorted.size();
  while (k > 0 && sorted[k - 1]->lock.state == LockState::locked) --k;
  if (k == 0 || k == sorted.size()) return std::nullopt;
  return sorted[k]->volume;
}

void validate(const SweepSpec& spec) {
  if (spec.p_in_grid.empty()) throw ConfigError("sweep.p_in_grid", "must not be empty");
  for (std::size_t k = 1; k < spec.p_in_grid.size(); ++k) {
    if (!(spec.p_in_grid[k] > spec.p_in_grid[k - 1])) {
      throw ConfigError("sweep.p_in_grid", "must be strictly increasing");
    }
  }
  if (!(spec.f_rf > 0.0)) throw ConfigError("sweep.f_rf", "must be > 0");
  if (!(spec.settle_time > 0.0)) throw ConfigError("sweep.settle_time", "must be > 0");
  if (!(spec.measure_time > 0.0)) throw ConfigError("sweep.measure_time", "must be > 0");
  if (spec.seeds.empty()) throw ConfigError("sweep.seeds", "must not be empty");
}

MixerReport measure_point(const Spectrum& s, double p_in_dbm, double f_rf, double f_min,
                          double f_max, Sideband side, const MeasureOptions& opts) {
  MixerReport r;
  r.f_osc = spectral::find_carrier(s, f_min, f_max).frequency;
  r.f_rf = f_rf;
  r.p_in = quantize_db(p_in_dbm);
  r.sideband = side;
  auto probe = [&](double f) -> std::optional<double> {
    if (!(f > 0.0) || f > s.frequencies.back()) return std::nullopt;
    try {
      return quantize_db(product_power(s, f, f_rf, opts).dbm);
    } catch (const NoSidebandError&) {
      return std::nullopt;
    }
  };
  r.p_sideband_low = probe(r.f_osc - f_rf);
  r.p_sideband_high = probe(r.f_osc + f_rf);
  r.p_third = probe(r.f_osc - 3.0 * f_rf);
  const auto& chosen = side == Sideband::lower ? r.p_sideband_low : r.p_sideband_high;
  if (chosen) r.conversion_gain = *chosen - r.p_in;
  return r;
}

MixerSweepResult run_mixer_sweep(const network::NetworkConfig& base, const SweepSpec& spec,
                                 const sde::StepperConfig& stepper,
                                 const MixerSweepOptions& opts) {
  validate(spec);
  network::validate(base);
  if (opts.tap >= base.size()) throw ConfigError("mixer.tap", "index out of range");
  MeasureOptions measure = opts.measure;
  if (measure.r_load == 0.0) measure.r_load = base.oscillators[opts.tap].r_av();

  const std::size_t n_points = spec.p_in_grid.size();
  const std::size_t n_seeds = spec.seeds.size();
  std::vector<Spectrum> spectra(n_points * n_seeds);
  std::vector<LockState> locks(n_points * n_seeds, LockState::locked);

  parallel_for(n_points * n_seeds, opts.threads, [&](std::size_t job) {
    const std::size_t point = job / n_seeds;
    auto cfg = base;
    cfg.master_seed = spec.seeds[job % n_seeds];
    network::RfTone tone;
    tone.amplitude = drive_amplitude(spec.p_in_grid[point], cfg.oscillators[opts.tap].r_av());
    tone.frequency = spec.f_rf;
    tone.target = opts.tap;
    cfg.rf_tones.push_back(tone);
    network::SimulationOptions so{spec.settle_time + spec.measure_time, opts.sample_stride};
    const auto trace = network::simulate_network(cfg, stepper, so);
    const auto cut = trace.tail(settle_samples(spec.settle_time, trace.sample_rate));
    spectra[job] = output_spectrum(cut, opts.tap, spec.f_rf);
    if (cfg.size() > 1) locks[job] = network_lock(cut, opts.f_min, opts.f_max).state;
  });

  MixerSweepResult out;
  for (std::size_t point = 0; point < n_points; ++point) {
    Spectrum avg = spectra[point * n_seeds];
    for (std::size_t s = 1; s < n_seeds; ++s) {
      const auto& other = spectra[point * n_seeds + s];
      for (std::size_t k = 0; k < avg.size(); ++k) avg.psd[k] += other.psd[k];
      avg.n_segments += other.n_segments;
    }
    for (auto& v : avg.psd) v /= static_cast<double>(n_seeds);
    auto report = measure_point(avg, spec.p_in_grid[point], spec.f_rf, opts.f_min, opts.f_max,
                                opts.sideband, measure);
    report.lock = combine(std::span<const LockState>(locks).subspan(point * n_seeds, n_seeds));
    out.points.push_back(report);
    out.spectra.push_back(std::move(avg));
  }

  std::vector<SweepPoint> fund, third;
  for (const auto& r : out.points) {
    const auto& sb = r.sideband == Sideband::lower ? r.p_sideband_low : r.p_sideband_high;
    if (sb) fund.push_back({r.p_in, *sb});
    if (r.p_third) third.push_back({r.p_in, *r.p_third});
  }
  try {
    out.p1db_in = p1db_sweep(fund, opts.p1db);
  } catch (const AnalysisError& e) {
    out.p1db_error = e.what();
  }
  try {
    out.intercept = iip3_extrapolate(fund, third, out.p1db_in);
  } catch (const AnalysisError& e) {
    out.intercept_error = e.what();
  }
  for (auto& r : out.points) {
    r.p1db_in = out.p1db_in;
    if (out.intercept) {
      r.iip3 = out.intercept->iip3;
      r.oip3 = out.intercept->oip3;
    }
  }
  return out;
}

}  // namespace stosim::mixer
