#pragma once

#include "stosim/vec3.hpp"

namespace stosim::magnetics {

/// Material and geometry constants of one macrospin MTJ oscillator (SI units,
/// fields in tesla).
///
/// The anisotropy and demagnetization constants act as diagonal tensors on m:
/// the defaults describe an in-plane free layer with an easy axis along x and a
/// reduced easy-plane penalty along z, driven by a perpendicular polarizer.
struct DeviceParams {
  double alpha = 0.01;
  double gamma = 1.76e11;  // rad s^-1 T^-1
  double ms = 8.0e5;       // A / m
  double volume = 1.6e-20;  // m^3
  double epsilon = 0.3;
  Vec3 k1{5.0e-4, 0.0, 0.0};  // T per unit m
  Vec3 k2{0.0, 0.0, -0.05};   // T per unit m
  Vec3 m_p{0.0, 0.0, 1.0};
  double r_p = 400.0;   // ohm
  double r_ap = 800.0;  // ohm
  double temperature = 300.0;  // K

  double r_av() const { return 0.5 * (r_p + r_ap); }
  double tmr() const { return (r_ap - r_p) / r_p; }

  bool operator==(const DeviceParams&) const = default;
};

/// Throws ConfigError naming the first violated invariant.
void validate(const DeviceParams& p);

/// H_eff = h_ext + K1 m + K2 m (tensors diagonal).
Vec3 effective_field(const Vec3& m, const DeviceParams& p, const Vec3& h_ext = {});

/// Slonczewski prefactor hbar I / (2 e Ms V), in tesla.
double spin_torque_prefactor(double i_bias, const DeviceParams& p);

/// Explicit Landau-Lifshitz form of the LLGS equation.
///
/// The implicit form is dm/dt = T + alpha m x dm/dt with
/// T = -gamma m x H + gamma beta eps m x (m_p x m); eliminating dm/dt gives
/// dm/dt = (T + alpha m x T) / (1 + alpha^2). The damping sign is the
/// dissipative one for gamma > 0.
/// The result is perpendicular to m for any m, unit or not.
Vec3 llgs_rhs(const Vec3& m, const Vec3& h_eff, double beta, const DeviceParams& p);

/// Resistance-linear angular model: R = R_av - (dR/2) m.m_p.
double mtj_resistance(const Vec3& m, const DeviceParams& p);

}  // namespace stosim::magnetics
