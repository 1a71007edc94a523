#include <doctest.h>

#include <cmath>
#include <random>

#include "stosim/constants.hpp"
#include "stosim/errors.hpp"
#include "stosim/integrator.hpp"
#include "stosim/spectral.hpp"
#include "support.hpp"

using namespace stosim;
using magnetics::DeviceParams;

namespace {

DeviceParams quiet() {
  DeviceParams p;
  p.temperature = 0.0;
  return p;
}

DeviceParams larmor_device() {
  DeviceParams p = quiet();
  p.alpha = 1e-300;  // validate() requires alpha > 0
  p.k1 = {};
  p.k2 = {};
  return p;
}

Vec3 rk4_orbit(const Vec3& m0, double dt, std::size_t steps, const DeviceParams& p, const Vec3& h) {
  sde::StepperConfig cfg;
  cfg.dt = dt;
  cfg.scheme = sde::Scheme::rk4;
  Vec3 m = m0;
  for (std::size_t k = 0; k < steps; ++k) m = sde::step_rk4(m, h, 0.0, 0.0, 0.0, p, cfg);
  return m;
}

}  // namespace

TEST_CASE("thermal sigma") {
  DeviceParams p;
  p.alpha = 0.01;
  p.temperature = 300;
  p.gamma = 1.76e11;
  p.ms = 8e5;
  p.volume = 5.04e-23;
  const double sigma = sde::thermal_sigma(p, 1e-12);
  const double hand =
      std::sqrt(2 * 0.01 * 1.380649e-23 * 300 / (1.76e11 * 8e5 * 5.04e-23 * 1e-12));
  CHECK(sigma == doctest::Approx(hand).epsilon(1e-14));
  CHECK(sigma == doctest::Approx(3.4e-3).epsilon(0.01));

  auto doubled = p;
  doubled.volume *= 2;
  CHECK(std::pow(sde::thermal_sigma(doubled, 1e-12), 2) ==
        doctest::Approx(0.5 * sigma * sigma).epsilon(1e-14));

  p.temperature = 0;
  CHECK(sde::thermal_sigma(p, 1e-12) == 0.0);
  CHECK(sde::make_noise_spec(p, 1e-12, 3).sigma_per_component == 0.0);
  p.temperature = 300;
  CHECK(sde::make_noise_spec(p, 1e-12, 3, false).sigma_per_component == 0.0);
}

TEST_CASE("stepper validation") {
  DeviceParams p;
  sde::StepperConfig cfg;
  cfg.dt = -1e-12;
  CHECK_THROWS_WITH_AS(sde::validate(cfg, p), doctest::Contains("stepper.dt"), ConfigError);
  cfg.dt = 1e-12;
  cfg.scheme = sde::Scheme::rk4;
  CHECK_THROWS_AS(sde::validate(cfg, p), ConfigError);
  p.temperature = 0;
  CHECK_NOTHROW(sde::validate(cfg, p));
}

TEST_CASE("heun step with zero noise is deterministic heun") {
  const DeviceParams p = quiet();
  sde::StepperConfig cfg;
  const auto noise = sde::make_noise_spec(p, cfg.dt, 0);
  RngStream rng(1, 0);
  std::mt19937_64 gen(2);
  for (int k = 0; k < 50; ++k) {
    const Vec3 m = test::random_unit(gen);
    const Vec3 h{0.01, 0.0, 0.02};
    const double b0 = 4e-3, b1 = 5e-3;
    auto f = [&](const Vec3& x, double b) {
      return magnetics::llgs_rhs(x, magnetics::effective_field(x, p, h), b, p);
    };
    const Vec3 pred = m + cfg.dt * f(m, b0);
    const Vec3 ref = normalized(m + 0.5 * cfg.dt * (f(m, b0) + f(pred, b1)));
    const Vec3 got = sde::step_heun(m, h, b0, b1, p, noise, cfg, rng);
    CHECK(norm(got - ref) < 1e-15);
  }
}

TEST_CASE("heun step renormalizes and is reproducible") {
  DeviceParams p;
  p.volume = 5.04e-23;
  sde::StepperConfig cfg;
  const auto noise = sde::make_noise_spec(p, cfg.dt, 4);
  RngStream a(9, 4), b(9, 4);
  std::mt19937_64 gen(5);
  Vec3 ma = test::random_unit(gen), mb = ma;
  for (int k = 0; k < 1000; ++k) {
    ma = sde::step_heun(ma, {}, 1e-3, 1e-3, p, noise, cfg, a);
    mb = sde::step_heun(mb, {}, 1e-3, 1e-3, p, noise, cfg, b);
    REQUIRE(std::abs(norm(ma) - 1.0) < 1e-12);
  }
  CHECK(ma == mb);
}

TEST_CASE("heun rejects non-finite states") {
  DeviceParams p = quiet();
  sde::StepperConfig cfg;
  RngStream rng(0, 0);
  const auto noise = sde::make_noise_spec(p, cfg.dt, 0);
  CHECK_THROWS_AS(sde::step_heun({1, 0, 0}, {NAN, 0, 0}, 0, 0, p, noise, cfg, rng), StepRejected);
}

TEST_CASE("rk4 fixed point and Larmor return") {
  DeviceParams p = quiet();
  p.k1 = {0.05, 0, 0};
  p.k2 = {};
  CHECK(rk4_orbit({1, 0, 0}, 1e-12, 100, p, {0.01, 0, 0}) == Vec3{1, 0, 0});

  const DeviceParams q = larmor_device();
  const double h = 0.1;
  const double period = constants::two_pi / (q.gamma * h);
  CHECK(period == doctest::Approx(0.357e-9).epsilon(1e-3));
  const Vec3 m0 = normalized(Vec3{1, 0.2, 0.3});
  const Vec3 m1 = rk4_orbit(m0, period / 1000.0, 1000, q, {0, 0, h});
  CHECK(norm(m1 - m0) < 1e-6);
}

TEST_CASE("rk4 converges at fourth order") {
  DeviceParams p = quiet();
  p.alpha = 0.05;
  const Vec3 h{0, 0, 0.1};
  const double period = constants::two_pi / (p.gamma * 0.1);
  const Vec3 m0 = normalized(Vec3{1, 0.1, 0.4});
  const std::size_t n = 64;
  const Vec3 coarse = rk4_orbit(m0, period / n, n, p, h);
  const Vec3 fine = rk4_orbit(m0, period / (2 * n), 2 * n, p, h);
  const Vec3 ref = rk4_orbit(m0, period / (8 * n), 8 * n, p, h);
  const double ratio = norm(coarse - ref) / norm(fine - ref);
  CHECK(ratio == doctest::Approx(16.0).epsilon(3.0 / 16.0));
}

TEST_CASE("trajectory sample count and fixed point") {
  DeviceParams p = quiet();
  sde::StepperConfig cfg;
  sde::TrajectoryOptions opts;
  opts.duration = 10 * cfg.dt;
  const auto tr = sde::run_trajectory({1, 0, 0}, {}, p, cfg, opts);
  CHECK(tr.size() == 11);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    CHECK(tr.oscillators[0].mx[k] == 1.0);
    CHECK(tr.oscillators[0].v[k] == 0.0);
  }
  CHECK(sde::sample_count(1e-9, 1e-12, 20) == 51);
  CHECK(sde::sample_count(1.005e-9, 1e-12, 20) == 51);
  CHECK_THROWS_AS(sde::run_trajectory({1, 0, 0}, {}, p, cfg, {0.5e-12, 1, 0, 0, {}}), ConfigError);
}

TEST_CASE("Larmor frequency from zero crossings") {
  const DeviceParams p = larmor_device();
  const double h = 0.1;
  sde::StepperConfig cfg;
  sde::TrajectoryOptions opts;
  opts.duration = 5e-9;
  opts.h_ext = {0, 0, h};
  const auto tr = sde::run_trajectory(normalized(Vec3{1, 0, 0.2}), {}, p, cfg, opts);
  const auto& mx = tr.oscillators[0].mx;
  std::vector<double> crossings;
  for (std::size_t k = 1; k < mx.size(); ++k) {
    if (mx[k - 1] < 0.0 && mx[k] >= 0.0) {
      const double frac = mx[k - 1] / (mx[k - 1] - mx[k]);
      crossings.push_back((static_cast<double>(k - 1) + frac) / tr.sample_rate);
    }
  }
  REQUIRE(crossings.size() > 5);
  const double period = (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
  CHECK(1.0 / period == doctest::Approx(p.gamma * h / constants::two_pi).epsilon(1e-3));
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double z = tr.oscillators[0].mz[k];
    REQUIRE(z == doctest::Approx(tr.oscillators[0].mz[0]).epsilon(1e-5));
  }
}

TEST_CASE("damping relaxes to the easy axis") {
  DeviceParams p = quiet();
  p.alpha = 0.1;
  p.k1 = {0.05, 0, 0};
  p.k2 = {};
  sde::StepperConfig cfg;
  sde::TrajectoryOptions opts;
  opts.duration = 12e-9;
  opts.sample_stride = 10;
  const Vec3 m0{std::cos(0.5), 0.0, std::sin(0.5)};
  const auto tr = sde::run_trajectory(m0, {}, p, cfg, opts);
  const auto& o = tr.oscillators[0];
  const std::size_t skip = tr.size() / 100;
  double prev = 10.0;
  bool monotone = true;
  for (std::size_t k = skip; k < tr.size(); ++k) {
    const double angle = std::acos(std::min(1.0, std::abs(o.mx[k])));
    if (angle > prev + 1e-12) monotone = false;
    prev = angle;
  }
  CHECK(monotone);
  const Vec3 last{o.mx.back(), o.my.back(), o.mz.back()};
  CHECK(std::min(norm(last - Vec3{1, 0, 0}), norm(last + Vec3{1, 0, 0})) < 1e-3);
}

TEST_CASE("norm preserved at every sample with thermal noise") {
  DeviceParams p;
  sde::StepperConfig cfg;
  sde::TrajectoryOptions opts;
  opts.duration = 20e-9;
  opts.seed = 4;
  sde::CurrentDrive drive{25.4e-3, {}};
  const auto tr = sde::run_trajectory({1, 0, 0}, drive, p, cfg, opts);
  const auto& o = tr.oscillators[0];
  double worst = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    worst = std::max(worst, std::abs(std::sqrt(o.mx[k] * o.mx[k] + o.my[k] * o.my[k] + o.mz[k] * o.mz[k]) - 1.0));
  }
  CHECK(worst < 1e-9);
  const auto again = sde::run_trajectory({1, 0, 0}, drive, p, cfg, opts);
  CHECK(again.oscillators[0].v == o.v);
  opts.stream = 1;
  const auto other = sde::run_trajectory({1, 0, 0}, drive, p, cfg, opts);
  CHECK(other.oscillators[0].v != o.v);
}

TEST_CASE("driven trajectory above threshold oscillates") {
  DeviceParams p = quiet();
  sde::StepperConfig cfg;
  sde::TrajectoryOptions opts;
  opts.duration = 1e-6;
  opts.sample_stride = 20;
  sde::CurrentDrive drive{25.4e-3, {}};
  const auto tr = sde::run_trajectory(normalized(Vec3{1, 0.05, 0.05}), drive, p, cfg, opts);
  const auto tail = tr.tail(tr.size() / 2);
  const auto& v = tail.oscillators[0].v;
  const auto s = spectral::welch_psd(v, tail.sample_rate, {v.size() / 2, 0.5});
  const auto c = spectral::find_carrier(s, 2.0 * s.resolution_bw, s.frequencies.back());
  CHECK(c.frequency > 1e8);
  // v is periodic: one period later the sample repeats closely
  const std::size_t lag = static_cast<std::size_t>(std::llround(tail.sample_rate / c.frequency * 10));
  double worst = 0.0, span = 0.0;
  for (std::size_t k = 0; k + lag < v.size(); ++k) {
    worst = std::max(worst, std::abs(v[k + lag] - v[k]));
    span = std::max(span, std::abs(v[k] - v[0]));
  }
  CHECK(worst < 0.2 * span);

  const DeviceParams noisy = DeviceParams{};
  sde::StepperConfig rk;
  rk.scheme = sde::Scheme::rk4;
  CHECK_THROWS_AS(sde::run_trajectory({1, 0, 0}, drive, noisy, rk, opts), ConfigError);
}
