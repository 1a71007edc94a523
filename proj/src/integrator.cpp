#include "stosim/integrator.hpp"

#include <cmath>
#include <string>

#include "stosim/constants.hpp"
#include "stosim/errors.hpp"

namespace stosim::sde {

using magnetics::DeviceParams;

void validate(const StepperConfig& cfg, const DeviceParams& p) {
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw ConfigError("stepper.dt", "must be > 0");
  if (cfg.scheme == Scheme::rk4 && p.temperature != 0.0) {
    throw ConfigError("stepper.scheme", "rk4 is deterministic and requires temperature = 0");
  }
}

double thermal_sigma(const DeviceParams& p, double dt) {
  return std::sqrt(2.0 * p.alpha * constants::boltzmann * p.temperature /
                   (p.gamma * p.ms * p.volume * dt));
}

ThermalNoiseSpec make_noise_spec(const DeviceParams& p, double dt, std::uint64_t stream_id,
                                 bool enabled) {
  return {enabled, enabled ? thermal_sigma(p, dt) : 0.0, stream_id};
}

namespace {

Vec3 rhs(const Vec3& m, const Vec3& h_ext, const Vec3& h_th, double beta, const DeviceParams& p) {
  return magnetics::llgs_rhs(m, magnetics::effective_field(m, p, h_ext) + h_th, beta, p);
}

Vec3 finish(const Vec3& m, const StepperConfig& cfg, const char* scheme) {
  if (!is_finite(m) || (cfg.renormalize && norm(m) == 0.0)) {
    throw StepRejected(std::string(scheme) + " step produced a non-finite state");
  }
  return cfg.renormalize ? normalized(m) : m;
}

}  // namespace

Vec3 step_heun(const Vec3& m, const Vec3& h_ext, double beta_start, double beta_end,
               const DeviceParams& p, const ThermalNoiseSpec& noise, const StepperConfig& cfg,
               RngStream& rng) {
  Vec3 h_th{};
  if (noise.enabled && noise.sigma_per_component > 0.0) {
    h_th = rng.gaussian3() * noise.sigma_per_component;
  }
  const double dt = cfg.dt;
  const Vec3 f0 = rhs(m, h_ext, h_th, beta_start, p);
  const Vec3 predicted = m + f0 * dt;
  if (!is_finite(predicted)) throw StepRejected("heun predictor produced a non-finite state");
  const Vec3 f1 = rhs(predicted, h_ext, h_th, beta_end, p);
  return finish(m + (f0 + f1) * (0.5 * dt), cfg, "heun");
}

Vec3 step_rk4(const Vec3& m, const Vec3& h_ext, double beta_start, double beta_mid,
              double beta_end, const DeviceParams& p, const StepperConfig& cfg) {
  const double dt = cfg.dt;
  const Vec3 zero{};
  const Vec3 k1 = rhs(m, h_ext, zero, beta_start, p);
  const Vec3 k2 = rhs(m + k1 * (0.5 * dt), h_ext, zero, beta_mid, p);
  const Vec3 k3 = rhs(m + k2 * (0.5 * dt), h_ext, zero, beta_mid, p);
  const Vec3 k4 = rhs(m + k3 * dt, h_ext, zero, beta_end, p);
  return finish(m + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (dt / 6.0), cfg, "rk4");
}

std::size_t sample_count(double duration, double dt, std::size_t stride) {
  const double ratio = duration / (dt * static_cast<double>(stride));
  // Absorb rounding when duration is an exact multiple of dt * stride.
  return static_cast<std::size_t>(std::floor(ratio * (1.0 + 1e-12))) + 1;
}

TraceSet run_trajectory(const Vec3& initial, const CurrentDrive& drive, const DeviceParams& p,
                        const StepperConfig& cfg, const TrajectoryOptions& opts) {
  magnetics::validate(p);
  validate(cfg, p);
  if (opts.sample_stride < 1) throw ConfigError("sample_stride", "must be >= 1");
  if (!(opts.duration >= cfg.dt)) throw ConfigError("duration", "must be >= dt");

  const std::size_t samples = sample_count(opts.duration, cfg.dt, opts.sample_stride);
  const std::size_t steps = (samples - 1) * opts.sample_stride;
  const ThermalNoiseSpec noise = make_noise_spec(p, cfg.dt, opts.stream, p.temperature > 0.0);
  RngStream rng(opts.seed, noise.rng_stream_id);

  TraceSet trace;
  trace.sample_rate = 1.0 / (cfg.dt * static_cast<double>(opts.sample_stride));
  trace.oscillators.resize(1);
  OscillatorChannels& ch = trace.oscillators.front();
  ch.reserve(samples);

  Vec3 m = normalized(initial);
  for (std::size_t n = 0;; ++n) {
    const double t = static_cast<double>(n) * cfg.dt;
    const double i_inj = drive.ac(t);
    const double i_total = drive.dc + i_inj;
    if (n % opts.sample_stride == 0) {
      const double r = magnetics::mtj_resistance(m, p);
      ch.mx.push_back(m.x);
      ch.my.push_back(m.y);
      ch.mz.push_back(m.z);
      ch.r.push_back(r);
      ch.v.push_back(i_total * r);
      ch.i_inj.push_back(i_inj);
    }
    if (n == steps) break;

    const double beta0 = magnetics::spin_torque_prefactor(i_total, p);
    const double t1 = static_cast<double>(n + 1) * cfg.dt;
    const double beta1 = magnetics::spin_torque_prefactor(drive.dc + drive.ac(t1), p);
    try {
      if (cfg.scheme == Scheme::heun) {
        m = step_heun(m, opts.h_ext, beta0, beta1, p, noise, cfg, rng);
      } else {
        const double beta_mid =
            magnetics::spin_torque_prefactor(drive.dc + drive.ac(t + 0.5 * cfg.dt), p);
        m = step_rk4(m, opts.h_ext, beta0, beta_mid, beta1, p, cfg);
      }
    } catch (const StepRejected& e) {
      throw StepRejected(std::string(e.what()) + " at step " + std::to_string(n));
    }
  }
  return trace;
}

}  // namespace stosim::sde
