#pragma once

#include <cstddef>
#include <vector>

namespace stosim {

/// Sampled channels of one oscillator. `i_inj` is the injected AC current
/// (RF plus coupling), `v` the MTJ voltage for the total current.
struct OscillatorChannels {
  std::vector<double> mx, my, mz;
  std::vector<double> r;      // ohm
  std::vector<double> v;      // volt
  std::vector<double> i_inj;  // ampere

  void reserve(std::size_t n);
  std::size_t size() const { return v.size(); }
};

/// Multichannel uniformly sampled record; all channels have equal length.
struct TraceSet {
  double sample_rate = 0.0;  // Hz
  double t0 = 0.0;           // s
  std::vector<OscillatorChannels> oscillators;

  std::size_t size() const { return oscillators.empty() ? 0 : oscillators.front().size(); }
  double time(std::size_t k) const { return t0 + static_cast<double>(k) / sample_rate; }

  /// Copy of the samples from index `first` onwards; t0 is advanced accordingly.
  TraceSet tail(std::size_t first) const;
};

}  // namespace stosim
