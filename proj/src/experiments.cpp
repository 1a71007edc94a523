#include "stosim/experiments.hpp"

#include <algorithm>
#include <cmath>

#include "stosim/errors.hpp"
#include "stosim/parallel.hpp"

namespace stosim::experiments {

void validate(const AnalysisOptions& opts) {
  if (!(opts.settle_fraction >= 0.0 && opts.settle_fraction < 1.0)) {
    throw ConfigError("analysis.settle_fraction", "must lie in [0, 1)");
  }
  if (!(opts.f_min >= 0.0 && opts.f_max > opts.f_min)) {
    throw ConfigError("analysis.f_max", "carrier band must satisfy 0 <= f_min < f_max");
  }
  if (opts.welch_segments < 1) throw ConfigError("analysis.welch_segments", "must be >= 1");
  if (!(opts.pn_lo > 0.0 && opts.pn_hi > opts.pn_lo)) {
    throw ConfigError("analysis.pn_hi", "phase-noise band must satisfy 0 < pn_lo < pn_hi");
  }
}

TraceSet settled(const TraceSet& trace, const AnalysisOptions& opts) {
  const auto first = static_cast<std::size_t>(
      std::llround(opts.settle_fraction * static_cast<double>(trace.size())));
  return trace.tail(first);
}

spectral::Spectrum voltage_spectrum(const TraceSet& trace, std::size_t osc,
                                    const AnalysisOptions& opts) {
  spectral::WelchOptions w;
  w.segment_len = trace.size() / opts.welch_segments;
  return spectral::welch_psd(trace.oscillators.at(osc).v, trace.sample_rate, w);
}

OscillatorMetrics analyse_oscillator(const TraceSet& trace, std::size_t osc, double r_load,
                                     const AnalysisOptions& opts) {
  const auto s = voltage_spectrum(trace, osc, opts);
  const auto carrier = spectral::find_carrier(s, opts.f_min, opts.f_max);
  OscillatorMetrics m;
  m.f_osc = carrier.frequency;
  m.power_dbm = spectral::watt_to_dbm(carrier.mean_square / r_load);
  const auto lw = spectral::linewidth(s, carrier.frequency);
  m.linewidth = lw.fwhm;
  m.fitted = lw.fitted;
  m.resolution_limited = lw.resolution_limited;

  const auto phase = spectral::instantaneous_phase(trace.oscillators[osc].v, trace.sample_rate,
                                                   carrier.frequency);
  const auto valid = phase.valid();
  spectral::WelchOptions w;
  w.segment_len = valid.size() / opts.welch_segments;
  const auto pn = spectral::phase_noise(valid, trace.sample_rate, w);
  m.pn_slope = spectral::phase_noise_slope(pn, opts.pn_lo, opts.pn_hi);
  m.l_1mhz = spectral::phase_noise_at(pn, 1e6);
  return m;
}

double median(std::vector<double> values) {
  if (values.empty()) throw AnalysisError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

spectral::Spectrum average(const std::vector<spectral::Spectrum>& spectra) {
  spectral::Spectrum out = spectra.front();
  for (std::size_t s = 1; s < spectra.size(); ++s) {
    for (std::size_t k = 0; k < out.size(); ++k) out.psd[k] += spectra[s].psd[k];
    out.n_segments += spectra[s].n_segments;
  }
  for (auto& v : out.psd) v /= static_cast<double>(spectra.size());
  return out;
}

}  // namespace

PsdCompareResult psd_compare(const network::NetworkConfig& cfg, const sde::StepperConfig& stepper,
                             const network::SimulationOptions& sim, const AnalysisOptions& opts,
                             std::span<const std::uint64_t> seeds, std::size_t threads) {
  if (seeds.empty()) throw ConfigError("compare.seed_pairs", "must be >= 1");
  network::validate(cfg);
  validate(opts);
  const std::size_t n_seeds = seeds.size();
  const std::size_t n = cfg.size();

  PsdCompareResult out;
  out.runs.resize(n_seeds);
  std::vector<spectral::Spectrum> coupled(n_seeds), uncoupled(n_seeds);
  parallel_for(2 * n_seeds, threads, [&](std::size_t job) {
    const std::size_t k = job / 2;
    const bool is_coupled = job % 2 == 0;
    auto run_cfg = cfg;
    run_cfg.master_seed = seeds[k];
    if (!is_coupled) run_cfg.topology = network::Topology::none;
    const auto trace = settled(network::simulate_network(run_cfg, stepper, sim), opts);
    std::vector<OscillatorMetrics> metrics;
    for (std::size_t j = 0; j < n; ++j) {
      metrics.push_back(analyse_oscillator(trace, j, run_cfg.oscillators[j].r_av(), opts));
    }
    out.runs[k].seed = seeds[k];
    (is_coupled ? out.runs[k].coupled : out.runs[k].uncoupled) = std::move(metrics);
    (is_coupled ? coupled : uncoupled)[k] = voltage_spectrum(trace, 0, opts);
  });

  std::vector<double> lw_c, lw_u, p_c, p_u;
  for (const auto& run : out.runs) {
    for (const auto& m : run.coupled) {
      lw_c.push_back(m.linewidth);
      p_c.push_back(m.power_dbm);
    }
    for (const auto& m : run.uncoupled) {
      lw_u.push_back(m.linewidth);
      p_u.push_back(m.power_dbm);
    }
  }
  out.median_linewidth_coupled = median(lw_c);
  out.median_linewidth_uncoupled = median(lw_u);
  out.median_power_coupled = median(p_c);
  out.median_power_uncoupled = median(p_u);
  out.narrower = out.median_linewidth_coupled < out.median_linewidth_uncoupled;
  out.stronger = out.median_power_coupled > out.median_power_uncoupled;
  out.spectrum_coupled = average(coupled);
  out.spectrum_uncoupled = average(uncoupled);
  return out;
}

}  // namespace stosim::experiments
