#include <doctest.h>

#include <cmath>
#include <complex>

#include "stosim/constants.hpp"
#include "stosim/errors.hpp"
#include "stosim/network.hpp"

using namespace stosim;
using namespace stosim::network;

namespace {

NetworkConfig three(double g_m, double temperature = 300.0) {
  NetworkConfig cfg;
  magnetics::DeviceParams p;
  p.temperature = temperature;
  cfg.oscillators.assign(3, p);
  cfg.i_dc.assign(3, 25.4e-3);
  cfg.g_m = g_m;
  cfg.master_seed = 17;
  return cfg;
}

bool channels_equal(const OscillatorChannels& a, const OscillatorChannels& b) {
  return a.mx == b.mx && a.my == b.my && a.mz == b.mz && a.r == b.r && a.v == b.v &&
         a.i_inj == b.i_inj;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
  return worst;
}

}  // namespace

TEST_CASE("highpass step") {
  const double fc = 9e6, dt = 1e-12;
  const double a = 1.0 / (1.0 + constants::two_pi * fc * dt);
  HighPassState s;
  CHECK(highpass_step(1.0, s, fc, dt) == a);

  HighPassState dc;
  double y = 0.0;
  for (int k = 0; k < 2000000; ++k) y = highpass_step(0.7, dc, fc, dt);
  CHECK(std::abs(y) < 1e-6);

  const double f = 100.0 * fc;
  const double w = constants::two_pi * f * dt;
  const std::complex<double> z = std::exp(std::complex<double>(0.0, -w));
  const double expected = std::abs(a * (1.0 - z) / (1.0 - a * z));
  HighPassState sine;
  const std::size_t n = 400000;
  const std::size_t period = static_cast<std::size_t>(std::ceil(1.0 / (f * dt)));
  double peak = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double out = highpass_step(std::sin(w * static_cast<double>(k)), sine, fc, dt);
    if (k + 2 * period >= n) peak = std::max(peak, std::abs(out));
  }
  CHECK(std::abs(20.0 * std::log10(peak / expected)) < 0.01);
  CHECK(std::abs(20.0 * std::log10(peak)) < 0.01);
}

TEST_CASE("coupling currents") {
  const std::vector<double> v3{1e-3, 2e-3, 3e-3};
  const auto i3 = coupling_currents(v3, 1e-3, Topology::global);
  CHECK(i3[0] == doctest::Approx(5e-6).epsilon(1e-12));
  CHECK(i3[1] == doctest::Approx(4e-6).epsilon(1e-12));
  CHECK(i3[2] == doctest::Approx(3e-6).epsilon(1e-12));
  const std::vector<double> v2{0.3, -0.2};
  const auto i2 = coupling_currents(v2, 2e-3, Topology::global);
  CHECK(i2[0] == doctest::Approx(2e-3 * -0.2));
  CHECK(i2[1] == doctest::Approx(2e-3 * 0.3));
  for (double x : coupling_currents(v3, 0.0, Topology::global)) CHECK(x == 0.0);
  for (double x : coupling_currents(v3, 1e-3, Topology::none)) CHECK(x == 0.0);
}

TEST_CASE("rf current") {
  CHECK(rf_current(1e-9, {}, 2) == std::vector<double>{0.0, 0.0});
  const std::vector<RfTone> tones{{1e-3, 300e6, 0.0, 1}};
  CHECK(rf_current(0.0, tones, 2) == std::vector<double>{0.0, 0.0});
  const auto quarter = rf_current(1.0 / (4.0 * 300e6), tones, 2);
  CHECK(quarter[0] == 0.0);
  CHECK(quarter[1] == doctest::Approx(1e-3).epsilon(1e-12));
}

TEST_CASE("network validation") {
  auto cfg = three(1e-4);
  CHECK_NOTHROW(validate(cfg));
  cfg.g_m = -1;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = three(1e-4);
  cfg.rf_tones = {{1e-3, 1e8, 0, 3}};
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = three(1e-4);
  cfg.i_dc.pop_back();
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = three(1e-4);
  cfg.hp_cutoff = 0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("coupling path has a one-step delay") {
  const double g_m = 1e-3, fc = 9e6, dt = 1e-12;
  CouplingPath path(2, g_m, Topology::global, fc, dt);
  const std::vector<double> zero{0.0, 0.0}, impulse{1.0, 0.0};
  auto first = path.advance(zero);
  CHECK(first == std::vector<double>{0.0, 0.0});
  auto after = path.advance(impulse);
  CHECK(after[0] == 0.0);
  CHECK(after[1] == doctest::Approx(g_m / (1.0 + constants::two_pi * fc * dt)));

  auto cfg = three(1e-3, 0.0);
  const auto tr = simulate_network(cfg, {}, {1e-11, 1});
  for (const auto& o : tr.oscillators) CHECK(o.i_inj[0] == 0.0);
  CHECK(tr.oscillators[0].i_inj[1] != 0.0);
}

TEST_CASE("single oscillator network equals run_trajectory") {
  NetworkConfig cfg;
  magnetics::DeviceParams p;
  cfg.oscillators = {p};
  cfg.i_dc = {25.4e-3};
  cfg.master_seed = 23;
  cfg.g_m = 1e-3;
  const Vec3 m0 = default_initial(0);
  sde::StepperConfig stepper;
  const auto net = simulate_network(cfg, stepper, {20e-9, 5});
  sde::TrajectoryOptions opts;
  opts.duration = 20e-9;
  opts.sample_stride = 5;
  opts.seed = 23;
  const auto single = sde::run_trajectory(m0, {25.4e-3, {}}, p, stepper, opts);
  CHECK(net.sample_rate == single.sample_rate);
  CHECK(channels_equal(net.oscillators[0], single.oscillators[0]));
}

TEST_CASE("uncoupled network equals independent trajectories") {
  auto cfg = three(0.0);
  sde::StepperConfig stepper;
  const auto net = simulate_network(cfg, stepper, {10e-9, 4});
  for (std::size_t j = 0; j < 3; ++j) {
    sde::TrajectoryOptions opts;
    opts.duration = 10e-9;
    opts.sample_stride = 4;
    opts.seed = cfg.master_seed;
    opts.stream = j;
    const auto single = sde::run_trajectory(default_initial(j), {25.4e-3, {}}, cfg.oscillators[j],
                                            stepper, opts);
    CHECK(channels_equal(net.oscillators[j], single.oscillators[0]));
  }
  auto none = three(1e-3);
  none.topology = Topology::none;
  const auto net_none = simulate_network(none, stepper, {10e-9, 4});
  for (std::size_t j = 0; j < 3; ++j) CHECK(channels_equal(net.oscillators[j], net_none.oscillators[j]));
}

TEST_CASE("large high-pass cutoff suppresses coupling") {
  auto cfg = three(5e-4, 0.0);
  sde::StepperConfig stepper;
  const auto normal = simulate_network(cfg, stepper, {5e-9, 1});
  cfg.hp_cutoff = 1e16;
  const auto blocked = simulate_network(cfg, stepper, {5e-9, 1});
  double normal_peak = 0.0, blocked_peak = 0.0;
  for (std::size_t k = 0; k < normal.size(); ++k) {
    normal_peak = std::max(normal_peak, std::abs(normal.oscillators[1].i_inj[k]));
    blocked_peak = std::max(blocked_peak, std::abs(blocked.oscillators[1].i_inj[k]));
  }
  CHECK(blocked_peak < 1e-3 * normal_peak);
}

TEST_CASE("permutation equivariance") {
  auto cfg = three(5e-4);
  cfg.initial = {default_initial(0), default_initial(1), default_initial(2)};
  cfg.stream_ids = {0, 1, 2};
  const std::size_t perm[3] = {2, 0, 1};
  auto permuted = cfg;
  for (std::size_t j = 0; j < 3; ++j) {
    permuted.initial[j] = cfg.initial[perm[j]];
    permuted.stream_ids[j] = cfg.stream_ids[perm[j]];
  }
  sde::StepperConfig stepper;
  const auto a = simulate_network(cfg, stepper, {3e-9, 10});
  const auto b = simulate_network(permuted, stepper, {3e-9, 10});
  for (std::size_t j = 0; j < 3; ++j) {
    const auto& src = a.oscillators[perm[j]];
    const auto& dst = b.oscillators[j];
    CHECK(max_diff(src.mx, dst.mx) < 1e-9);
    CHECK(max_diff(src.mz, dst.mz) < 1e-9);
    CHECK(max_diff(src.v, dst.v) < 1e-9);
  }
}

TEST_CASE("network reproducibility and divergence") {
  auto cfg = three(5e-4);
  sde::StepperConfig stepper;
  const auto a = simulate_network(cfg, stepper, {2e-9, 3});
  const auto b = simulate_network(cfg, stepper, {2e-9, 3});
  for (std::size_t j = 0; j < 3; ++j) CHECK(channels_equal(a.oscillators[j], b.oscillators[j]));

  auto unstable = three(2e-3, 0.0);
  CHECK_THROWS_AS(simulate_network(unstable, stepper, {200e-9, 10}), StepRejected);
}
