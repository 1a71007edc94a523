#pragma once

#include <numbers>

namespace stosim::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// CODATA 2018 exact values.
inline constexpr double hbar = 1.054571817e-34;           // J s
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double boltzmann = 1.380649e-23;         // J / K

}  // namespace stosim::constants
