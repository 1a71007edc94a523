#include "stosim/trace.hpp"

#include <algorithm>

namespace stosim {

void OscillatorChannels::reserve(std::size_t n) {
  for (auto* c : {&mx, &my, &mz, &r, &v, &i_inj}) c->reserve(n);
}

TraceSet TraceSet::tail(std::size_t first) const {
  TraceSet out;
  out.sample_rate = sample_rate;
  first = std::min(first, size());
  out.t0 = time(first);
  out.oscillators.reserve(oscillators.size());
  auto cut = [first](const std::vector<double>& c) {
    return std::vector<double>(c.begin() + static_cast<std::ptrdiff_t>(first), c.end());
  };
  for (const auto& o : oscillators) {
    out.oscillators.push_back({cut(o.mx), cut(o.my), cut(o.mz), cut(o.r), cut(o.v), cut(o.i_inj)});
  }
  return out;
}

}  // namespace stosim
