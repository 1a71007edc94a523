#pragma once

#include <cstdint>
#include <functional>

#include "stosim/magnetics.hpp"
#include "stosim/rng.hpp"
#include "stosim/trace.hpp"
#include "stosim/vec3.hpp"

namespace stosim::sde {

enum class Scheme { heun, rk4 };

struct StepperConfig {
  double dt = 1e-12;  // s
  Scheme scheme = Scheme::heun;
  bool renormalize = true;

  bool operator==(const StepperConfig&) const = default;
};

/// Throws ConfigError if dt is not positive or rk4 is paired with a finite
/// temperature.
void validate(const StepperConfig& cfg, const magnetics::DeviceParams& p);

/// Standard deviation of each Cartesian component of the Brown thermal field
/// held over one step: sqrt(2 alpha kB T / (gamma Ms V dt)).
double thermal_sigma(const magnetics::DeviceParams& p, double dt);

struct ThermalNoiseSpec {
  bool enabled = true;
  double sigma_per_component = 0.0;  // T
  std::uint64_t rng_stream_id = 0;
};

ThermalNoiseSpec make_noise_spec(const magnetics::DeviceParams& p, double dt,
                                 std::uint64_t stream_id, bool enabled = true);

/// Stochastic Heun step. One thermal-field sample is drawn and shared by the
/// predictor and corrector stages; the spin-torque prefactor is `beta_start`
/// at the start of the step and `beta_end` at its end. No random numbers are
/// consumed when the noise is disabled or sigma is zero.
Vec3 step_heun(const Vec3& m, const Vec3& h_ext, double beta_start, double beta_end,
               const magnetics::DeviceParams& p, const ThermalNoiseSpec& noise,
               const StepperConfig& cfg, RngStream& rng);

/// Classical fourth-order Runge-Kutta step on the deterministic RHS.
Vec3 step_rk4(const Vec3& m, const Vec3& h_ext, double beta_start, double beta_mid,
              double beta_end, const magnetics::DeviceParams& p, const StepperConfig& cfg);

/// Bias current plus an optional time-dependent injected part, in ampere.
struct CurrentDrive {
  double dc = 0.0;
  std::function<double(double)> injected;

  double ac(double t) const { return injected ? injected(t) : 0.0; }
};

struct TrajectoryOptions {
  double duration = 0.0;      // s
  std::size_t sample_stride = 1;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  Vec3 h_ext{};
};

/// Number of emitted samples: floor(duration / (dt * stride)) + 1.
std::size_t sample_count(double duration, double dt, std::size_t stride);

/// Integrates one oscillator and records (m, R, v = i R, i_inj) every
/// `sample_stride` steps. Thermal noise uses stream (seed, stream).
TraceSet run_trajectory(const Vec3& initial, const CurrentDrive& drive,
                        const magnetics::DeviceParams& p, const StepperConfig& cfg,
                        const TrajectoryOptions& opts);

}  // namespace stosim::sde
