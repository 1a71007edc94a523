#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "stosim/constants.hpp"
#include "stosim/vec3.hpp"

namespace test {

inline stosim::Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  stosim::Vec3 v{g(rng), g(rng), g(rng)};
  return stosim::normalized(v);
}

inline std::vector<double> tone(std::size_t n, double fs, double f, double amplitude,
                                double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = amplitude * std::sin(stosim::constants::two_pi * f * static_cast<double>(k) / fs + phase);
  }
  return x;
}

inline void add(std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
}

}  // namespace test
