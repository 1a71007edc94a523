#include "stosim/magnetics.hpp"

#include <cmath>

#include "stosim/constants.hpp"
#include "stosim/errors.hpp"

namespace stosim::magnetics {

void validate(const DeviceParams& p) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!(p.alpha > 0.0 && finite(p.alpha))) throw ConfigError("alpha", "must be > 0");
  if (!(p.gamma > 0.0 && finite(p.gamma))) throw ConfigError("gamma", "must be > 0");
  if (!(p.ms > 0.0 && finite(p.ms))) throw ConfigError("ms", "must be > 0");
  if (!(p.volume > 0.0 && finite(p.volume))) throw ConfigError("volume", "must be > 0");
  if (!finite(p.epsilon)) throw ConfigError("epsilon", "must be finite");
  if (!is_finite(p.k1)) throw ConfigError("k1", "must be finite");
  if (!is_finite(p.k2)) throw ConfigError("k2", "must be finite");
  if (!is_finite(p.m_p) || std::abs(norm(p.m_p) - 1.0) > 1e-12) {
    throw ConfigError("m_p", "must be a unit vector");
  }
  if (!(p.r_p > 0.0 && finite(p.r_p))) throw ConfigError("r_p", "must be > 0");
  if (!(p.r_ap > p.r_p && finite(p.r_ap))) throw ConfigError("r_ap", "must exceed r_p");
  if (!(p.temperature >= 0.0 && finite(p.temperature))) {
    throw ConfigError("temperature", "must be >= 0");
  }
}

Vec3 effective_field(const Vec3& m, const DeviceParams& p, const Vec3& h_ext) {
  return h_ext + hadamard(p.k1, m) + hadamard(p.k2, m);
}

double spin_torque_prefactor(double i_bias, const DeviceParams& p) {
  return constants::hbar * i_bias / (2.0 * constants::elementary_charge * p.ms * p.volume);
}

Vec3 llgs_rhs(const Vec3& m, const Vec3& h_eff, double beta, const DeviceParams& p) {
  const Vec3 precession = -p.gamma * cross(m, h_eff);
  const Vec3 torque = p.gamma * beta * p.epsilon * cross(m, cross(p.m_p, m));
  const Vec3 t = precession + torque;
  return (t + p.alpha * cross(m, t)) * (1.0 / (1.0 + p.alpha * p.alpha));
}

double mtj_resistance(const Vec3& m, const DeviceParams& p) {
  return p.r_av() - 0.5 * (p.r_ap - p.r_p) * dot(m, p.m_p);
}

}  // namespace stosim::magnetics
