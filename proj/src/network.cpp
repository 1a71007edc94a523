#include "stosim/network.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "stosim/constants.hpp"
#include "stosim/errors.hpp"
#include "stosim/rng.hpp"

namespace stosim::network {

using magnetics::DeviceParams;

void validate(const NetworkConfig& cfg) {
  const std::size_t n = cfg.size();
  if (n == 0) throw ConfigError("network.oscillators", "at least one oscillator required");
  for (std::size_t j = 0; j < n; ++j) {
    try {
      magnetics::validate(cfg.oscillators[j]);
    } catch (const ConfigError& e) {
      throw ConfigError("oscillators[" + std::to_string(j) + "]." + e.field(),
                        std::string(e.what()).substr(e.field().size() + 2));
    }
  }
  if (cfg.i_dc.size() != n) throw ConfigError("network.i_dc", "one bias current per oscillator");
  for (double i : cfg.i_dc) {
    if (!std::isfinite(i)) throw ConfigError("network.i_dc", "must be finite");
  }
  if (!(cfg.g_m >= 0.0) || !std::isfinite(cfg.g_m)) throw ConfigError("network.g_m", "must be >= 0");
  if (!(cfg.hp_cutoff > 0.0) || !std::isfinite(cfg.hp_cutoff)) {
    throw ConfigError("network.hp_cutoff", "must be > 0");
  }
  for (const auto& tone : cfg.rf_tones) {
    if (!(tone.frequency > 0.0)) throw ConfigError("network.rf_tones.frequency", "must be > 0");
    if (!(tone.amplitude >= 0.0)) throw ConfigError("network.rf_tones.amplitude", "must be >= 0");
    if (tone.target >= n) throw ConfigError("network.rf_tones.target", "index out of range");
  }
  if (!cfg.stream_ids.empty() && cfg.stream_ids.size() != n) {
    throw ConfigError("network.stream_ids", "one stream id per oscillator");
  }
  if (!cfg.initial.empty() && cfg.initial.size() != n) {
    throw ConfigError("network.initial", "one initial magnetization per oscillator");
  }
  for (const auto& m : cfg.initial) {
    if (!is_finite(m) || norm(m) == 0.0) throw ConfigError("network.initial", "must be nonzero");
  }
}

Vec3 default_initial(std::size_t index) {
  return normalized(Vec3{1.0, 0.05 + 0.02 * static_cast<double>(index), 0.05});
}

double highpass_step(double x, HighPassState& state, double f_c, double dt) {
  const double a = 1.0 / (1.0 + constants::two_pi * f_c * dt);
  const double y = a * (state.prev_output + x - state.prev_input);
  state.prev_input = x;
  state.prev_output = y;
  return y;
}

std::vector<double> coupling_currents(std::span<const double> v_filtered, double g_m,
                                      Topology topology) {
  std::vector<double> out(v_filtered.size(), 0.0);
  if (topology == Topology::none || g_m == 0.0) return out;
  const double total = std::accumulate(v_filtered.begin(), v_filtered.end(), 0.0);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = g_m * (total - v_filtered[j]);
  return out;
}

std::vector<double> rf_current(double t, std::span<const RfTone> tones, std::size_t n) {
  std::vector<double> out(n, 0.0);
  for (const auto& tone : tones) {
    out[tone.target] += tone.amplitude * std::sin(constants::two_pi * tone.frequency * t + tone.phase);
  }
  return out;
}

CouplingPath::CouplingPath(std::size_t n, double g_m, Topology topology, double hp_cutoff, double dt)
    : g_m_(g_m), topology_(topology), hp_cutoff_(hp_cutoff), dt_(dt), filters_(n), filtered_(n) {}

std::vector<double> CouplingPath::advance(std::span<const double> v) {
  for (std::size_t j = 0; j < filters_.size(); ++j) {
    filtered_[j] = highpass_step(v[j], filters_[j], hp_cutoff_, dt_);
  }
  return coupling_currents(filtered_, g_m_, topology_);
}

TraceSet simulate_network(const NetworkConfig& cfg, const sde::StepperConfig& stepper,
                          const SimulationOptions& opts) {
  validate(cfg);
  for (const auto& p : cfg.oscillators) sde::validate(stepper, p);
  if (opts.sample_stride < 1) throw ConfigError("sample_stride", "must be >= 1");
  if (!(opts.duration >= stepper.dt)) throw ConfigError("duration", "must be >= dt");

  const std::size_t n_osc = cfg.size();
  const double dt = stepper.dt;
  const std::size_t samples = sde::sample_count(opts.duration, dt, opts.sample_stride);
  const std::size_t steps = (samples - 1) * opts.sample_stride;

  std::vector<Vec3> m(n_osc);
  std::vector<sde::ThermalNoiseSpec> noise;
  std::vector<RngStream> rngs;
  rngs.reserve(n_osc);
  for (std::size_t j = 0; j < n_osc; ++j) {
    const DeviceParams& p = cfg.oscillators[j];
    m[j] = normalized(cfg.initial.empty() ? default_initial(j) : cfg.initial[j]);
    const std::uint64_t stream = cfg.stream_ids.empty() ? j : cfg.stream_ids[j];
    noise.push_back(sde::make_noise_spec(p, dt, stream, p.temperature > 0.0));
    rngs.emplace_back(cfg.master_seed, stream);
  }

  TraceSet trace;
  trace.sample_rate = 1.0 / (dt * static_cast<double>(opts.sample_stride));
  trace.oscillators.resize(n_osc);
  for (auto& ch : trace.oscillators) ch.reserve(samples);

  CouplingPath coupling(n_osc, cfg.g_m, cfg.topology, cfg.hp_cutoff, dt);
  std::vector<double> i_couple(n_osc, 0.0);
  std::vector<double> i_total(n_osc);
  std::vector<double> v(n_osc);

  for (std::size_t n = 0;; ++n) {
    const double t = static_cast<double>(n) * dt;
    const std::vector<double> rf = rf_current(t, cfg.rf_tones, n_osc);
    const bool record = n % opts.sample_stride == 0;
    for (std::size_t j = 0; j < n_osc; ++j) {
      const double i_inj = rf[j] + i_couple[j];
      i_total[j] = cfg.i_dc[j] + rf[j] + i_couple[j];
      const double r = magnetics::mtj_resistance(m[j], cfg.oscillators[j]);
      v[j] = i_total[j] * r;
      if (record) {
        auto& ch = trace.oscillators[j];
        ch.mx.push_back(m[j].x);
        ch.my.push_back(m[j].y);
        ch.mz.push_back(m[j].z);
        ch.r.push_back(r);
        ch.v.push_back(v[j]);
        ch.i_inj.push_back(i_inj);
      }
    }
    if (n == steps) break;

    std::vector<double> i_next = coupling.advance(v);
    const double t1 = static_cast<double>(n + 1) * dt;
    const std::vector<double> rf1 = rf_current(t1, cfg.rf_tones, n_osc);
    for (std::size_t j = 0; j < n_osc; ++j) {
      const DeviceParams& p = cfg.oscillators[j];
      const double beta0 = magnetics::spin_torque_prefactor(i_total[j], p);
      // The coupling current is held over the step; the RF drive is sampled at both ends.
      const double beta1 = magnetics::spin_torque_prefactor(cfg.i_dc[j] + rf1[j] + i_couple[j], p);
      try {
        if (stepper.scheme == sde::Scheme::heun) {
          m[j] = sde::step_heun(m[j], cfg.h_ext, beta0, beta1, p, noise[j], stepper, rngs[j]);
        } else {
          const std::vector<double> rf_mid = rf_current(t + 0.5 * dt, cfg.rf_tones, n_osc);
          const double beta_mid =
              magnetics::spin_torque_prefactor(cfg.i_dc[j] + rf_mid[j] + i_couple[j], p);
          m[j] = sde::step_rk4(m[j], cfg.h_ext, beta0, beta_mid, beta1, p, stepper);
        }
      } catch (const StepRejected& e) {
        throw StepRejected(std::string(e.what()) + " in oscillator " + std::to_string(j) +
                           " at step " + std::to_string(n));
      }
    }
    i_couple = std::move(i_next);
  }
  return trace;
}

}  // namespace stosim::network
