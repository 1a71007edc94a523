#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "stosim/integrator.hpp"
#include "stosim/magnetics.hpp"
#include "stosim/trace.hpp"

namespace stosim::network {

enum class Topology { global, none };

struct RfTone {
  double amplitude = 0.0;  // A
  double frequency = 0.0;  // Hz
  double phase = 0.0;      // rad
  std::size_t target = 0;

  bool operator==(const RfTone&) const = default;
};

/// N oscillators coupled all-to-all through a behavioral loop: each voltage is
/// high-pass filtered (series capacitor), scaled by g_m (V-I stage) and
/// injected as current into every other oscillator.
struct NetworkConfig {
  std::vector<magnetics::DeviceParams> oscillators;
  std::vector<double> i_dc;  // A, one per oscillator
  double g_m = 0.0;          // S
  Topology topology = Topology::global;
  double hp_cutoff = 9.0e6;  // Hz
  std::vector<RfTone> rf_tones;
  std::uint64_t master_seed = 0;
  /// Initial magnetization per oscillator; empty selects default_initial().
  std::vector<Vec3> initial;
  /// Noise stream per oscillator; empty selects stream j for oscillator j.
  std::vector<std::uint64_t> stream_ids;
  Vec3 h_ext{};

  std::size_t size() const { return oscillators.size(); }
};

void validate(const NetworkConfig& cfg);

/// Slightly tilted from the easy axis and perturbed by oscillator index so
/// that identical devices do not start in lockstep.
Vec3 default_initial(std::size_t index);

struct HighPassState {
  double prev_input = 0.0;
  double prev_output = 0.0;
};

/// y[n] = a (y[n-1] + x[n] - x[n-1]) with a = 1 / (1 + 2 pi f_c dt).
double highpass_step(double x, HighPassState& state, double f_c, double dt);

/// i_j = g_m * sum_{i != j} v_i for the global topology, zeros otherwise.
std::vector<double> coupling_currents(std::span<const double> v_filtered, double g_m,
                                      Topology topology);

/// Sum of A sin(2 pi f t + phi) over the tones targeting each oscillator.
std::vector<double> rf_current(double t, std::span<const RfTone> tones, std::size_t n);

/// Feedback path with an explicit one-step delay: voltages observed at step n
/// produce the currents injected during step n + 1.
class CouplingPath {
 public:
  CouplingPath(std::size_t n, double g_m, Topology topology, double hp_cutoff, double dt);

  /// Filters `v` (one voltage per oscillator at the current step) and returns
  /// the coupling currents for the next step.
  std::vector<double> advance(std::span<const double> v);

 private:
  double g_m_;
  Topology topology_;
  double hp_cutoff_;
  double dt_;
  std::vector<HighPassState> filters_;
  std::vector<double> filtered_;
};

struct SimulationOptions {
  double duration = 0.0;  // s
  std::size_t sample_stride = 1;
};

/// Co-integrates all oscillators on a shared clock. Oscillator j draws
/// thermal noise from stream (master_seed, stream_ids[j]).
TraceSet simulate_network(const NetworkConfig& cfg, const sde::StepperConfig& stepper,
                          const SimulationOptions& opts);

}  // namespace stosim::network
