#include <doctest.h>

#include <cmath>
#include <random>

#include "stosim/constants.hpp"
#include "stosim/errors.hpp"
#include "stosim/spectral.hpp"
#include "support.hpp"

using namespace stosim;
using namespace stosim::spectral;
using constants::pi;
using constants::two_pi;

namespace {

std::vector<double> white(std::size_t n, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> x(n);
  for (double& v : x) v = g(rng);
  return x;
}

Spectrum lorentzian(double f0, double fwhm, double rbw, std::size_t n, double height) {
  Spectrum s;
  s.resolution_bw = rbw;
  s.sample_rate = 2.0 * rbw * static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = rbw * static_cast<double>(k);
    const double u = (f - f0) / (0.5 * fwhm);
    s.frequencies.push_back(f);
    s.psd.push_back(height / (1.0 + u * u));
  }
  return s;
}

double mean_between(const PhaseNoiseCurve& c, double lo, double hi) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < c.offsets.size(); ++i) {
    if (c.offsets[i] >= lo && c.offsets[i] <= hi) {
      sum += std::pow(10.0, c.l_dbc_per_hz[i] / 10.0);
      ++n;
    }
  }
  return 10.0 * std::log10(sum / static_cast<double>(n));
}

}  // namespace

TEST_CASE("dB conversions") {
  CHECK(watt_to_dbm(1e-3) == doctest::Approx(0.0));
  CHECK(watt_to_dbm(1.0) == doctest::Approx(30.0));
  CHECK(dbm_to_watt(30.0) == doctest::Approx(1.0));
  CHECK(watt_to_dbm(0.0) == kFloorDb);
  CHECK(to_db(0.0) == kFloorDb);
}

TEST_CASE("welch psd") {
  SUBCASE("zero series") {
    const std::vector<double> z(4096, 0.0);
    const auto s = welch_psd(z, 1e9, {512, 0.5});
    for (double v : s.psd) CHECK(v == 0.0);
  }
  SUBCASE("white noise level and parseval") {
    const double fs = 1e9;
    const auto x = white(1 << 18, 1.0, 3);
    const auto s = welch_psd(x, fs, {1024, 0.5});
    double mean = 0.0;
    for (std::size_t k = 1; k + 1 < s.size(); ++k) mean += s.psd[k];
    mean /= static_cast<double>(s.size() - 2);
    CHECK(mean == doctest::Approx(2.0 / fs).epsilon(0.05));
    CHECK(parseval_error(s, x) < 0.01);
    CHECK(s.frequencies.front() == 0.0);
    CHECK(s.frequencies.back() == doctest::Approx(fs / 2));
    CHECK(s.resolution_bw == doctest::Approx(fs / 1024));
    CHECK(s.n_segments == 511);
  }
  SUBCASE("tone power") {
    const double fs = 10e9, a = 0.8;
    const auto x = test::tone(1 << 16, fs, 900.3e6, a, 0.4);
    const auto s = welch_psd(x, fs, {1 << 13, 0.5});
    CHECK(band_power(s, 900.3e6, 20 * s.resolution_bw, 1.0).mean_square ==
          doctest::Approx(a * a / 2).epsilon(0.01));
    CHECK(parseval_error(s, x) < 0.01);
  }
  SUBCASE("errors") {
    const std::vector<double> x(100, 1.0);
    CHECK_THROWS_AS(welch_psd(x, 1e9, {200, 0.5}), AnalysisError);
    CHECK_THROWS_AS(welch_psd(x, 1e9, {50, 1.0}), AnalysisError);
  }
}

TEST_CASE("band power") {
  const double fs = 10e9;
  const auto x = test::tone(1 << 16, fs, 1e9, 1.0);
  const auto s = welch_psd(x, fs, {1 << 12, 0.5});
  const auto p50 = band_power(s, 1e9, 20 * s.resolution_bw, 50.0);
  CHECK(p50.watt == doctest::Approx(10e-3).epsilon(0.01));
  CHECK(p50.dbm == doctest::Approx(10.0).epsilon(0.005));
  const auto p100 = band_power(s, 1e9, 20 * s.resolution_bw, 100.0);
  CHECK(p50.dbm - p100.dbm == doctest::Approx(10.0 * std::log10(2.0)).epsilon(1e-12));
  const std::vector<double> z(4096, 0.0);
  const auto zs = welch_psd(z, fs, {1024, 0.5});
  CHECK(band_power(zs, 1e9, 1e8, 50.0).dbm == kFloorDb);
  CHECK_THROWS_AS(band_power(s, 6e9, 1e8, 50.0), AnalysisError);
  CHECK_THROWS_AS(band_power(s, 1e9, 0.5 * s.resolution_bw, 50.0), AnalysisError);
}

TEST_CASE("find carrier") {
  const double fs = 10e9;
  auto x = test::tone(1 << 16, fs, 900e6, 1.0);
  test::add(x, test::tone(1 << 16, fs, 600e6, 0.1));
  const auto s = welch_psd(x, fs, {1 << 13, 0.5});
  const auto c = find_carrier(s, 1e6, 5e9);
  CHECK(std::abs(c.frequency - 900e6) <= s.resolution_bw);
  CHECK(c.mean_square == doctest::Approx(0.5).epsilon(0.01));
  const auto masked = find_carrier(s, 500e6, 700e6);
  CHECK(std::abs(masked.frequency - 600e6) <= s.resolution_bw);
  CHECK_THROWS_AS(find_carrier(s, 7e9, 8e9), AnalysisError);

  const double rbw = s.resolution_bw;
  for (double frac : {0.1, 0.25, 0.4}) {
    const double f = 700.0 * rbw + frac * rbw;
    const auto y = test::tone(1 << 16, fs, f, 1.0);
    const auto sy = welch_psd(y, fs, {1 << 13, 0.5});
    CHECK(std::abs(find_carrier(sy, 1e6, 5e9).frequency - f) < 0.1 * rbw);
  }
}

TEST_CASE("linewidth") {
  const auto s = lorentzian(200.0037e6, 1.0133e6, 10e3, 40001, 1e-12);
  const auto lw = linewidth(s, 200e6);
  CHECK(lw.fitted);
  CHECK(lw.fwhm == doctest::Approx(1.0133e6).epsilon(0.02));
  CHECK_FALSE(lw.resolution_limited);

  auto scaled = s;
  for (double& v : scaled.psd) v *= 10.0;
  CHECK(linewidth(scaled, 200e6).fwhm == doctest::Approx(lw.fwhm).epsilon(1e-9));

  const double fs = 1e9;
  const auto x = test::tone(4096, fs, 256 * fs / 4096, 1.0);
  const auto ts = welch_psd(x, fs, {4096, 0.5});
  const auto narrow = linewidth(ts, 256 * fs / 4096);
  CHECK(narrow.fwhm <= 2 * ts.resolution_bw);
  CHECK(narrow.resolution_limited);

  CHECK_THROWS_AS(linewidth(s, 0.0), AnalysisError);
}

TEST_CASE("instantaneous phase") {
  const double fs = 20e9, f0 = 1e9;
  const std::size_t n = 20000;
  SUBCASE("tone at f0") {
    const double phi0 = 0.7;
    const auto x = test::tone(n, fs, f0, 0.3, phi0 + pi / 2);
    const auto ph = instantaneous_phase(x, fs, f0);
    CHECK(ph.phase.size() == n);
    CHECK(ph.valid_begin > 0);
    for (double v : ph.valid()) REQUIRE(std::abs(v - phi0) < 1e-3);
  }
  SUBCASE("frequency offset gives a ramp") {
    const double delta = 7e6;
    const auto x = test::tone(n, fs, f0 + delta, 1.0);
    const auto ph = instantaneous_phase(x, fs, f0);
    std::vector<double> t;
    for (std::size_t k = ph.valid_begin; k < ph.valid_end; ++k) t.push_back(static_cast<double>(k) / fs);
    CHECK(fit_line(t, ph.valid()).slope == doctest::Approx(two_pi * delta).epsilon(1e-3));
  }
  SUBCASE("amplitude modulation is rejected") {
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) / fs;
      x[k] = (1.0 + 0.3 * std::cos(two_pi * 20e6 * t)) * std::cos(two_pi * f0 * t + 0.2);
    }
    const auto ph = instantaneous_phase(x, fs, f0);
    for (double v : ph.valid()) REQUIRE(std::abs(v - 0.2) < 1e-3);
  }
  SUBCASE("errors") {
    const std::vector<double> x(n, 0.0);
    CHECK_THROWS_AS(instantaneous_phase(x, fs, 0.6 * fs), AnalysisError);
    CHECK_THROWS_AS(instantaneous_phase(std::vector<double>(100, 0.0), fs, f0), AnalysisError);
  }
}

TEST_CASE("phase noise") {
  const double fs = 1e9;
  SUBCASE("zero fluctuation at the floor") {
    const std::vector<double> z(4096, 0.0);
    for (double l : phase_noise(z, fs, {1024, 0.5}).l_dbc_per_hz) CHECK(l <= -300.0);
  }
  SUBCASE("white phase noise") {
    const double sigma = 1e-2;
    const auto x = white(1 << 18, sigma, 8);
    const auto c = phase_noise(x, fs, {2048, 0.5});
    const double expected = 10.0 * std::log10(sigma * sigma / fs);
    CHECK(std::abs(mean_between(c, 1e6, 4e8) - expected) < 1.0);
    for (std::size_t i = 1; i < c.offsets.size(); ++i) REQUIRE(c.offsets[i] > c.offsets[i - 1]);
  }
  SUBCASE("Wiener phase") {
    const double d = 1e5;  // rad^2/s
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g(0.0, std::sqrt(d / fs));
    std::vector<double> phi(1 << 20);
    double acc = 0.0;
    for (double& v : phi) v = acc += g(rng);
    const auto c = phase_noise(phi, fs, {1 << 14, 0.5});
    const double rbw = fs / (1 << 14);
    for (double lo = 20 * rbw; lo < fs / 40; lo *= 2) {
      const double hi = 1.5 * lo;
      const double mid = std::sqrt(lo * hi);
      const double expected = 10.0 * std::log10(d / (2.0 * pi * pi * mid * mid)) - 10.0 * std::log10(2.0);
      CHECK(std::abs(mean_between(c, lo, hi) - expected) < 2.0);
    }
    CHECK(phase_noise_slope(c, 20 * rbw, fs / 40) == doctest::Approx(-20.0).epsilon(0.05));
  }
}

TEST_CASE("line fit and curve lookup") {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{3, 5, 7, 9};
  const auto f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK_THROWS_AS(fit_line(std::vector<double>{1}, std::vector<double>{1}), AnalysisError);
  PhaseNoiseCurve c{{1e5, 1e6, 1e7}, {-60, -80, -100}};
  CHECK(phase_noise_at(c, 1e6) == doctest::Approx(-80.0));
  CHECK(phase_noise_at(c, std::sqrt(1e6 * 1e7)) == doctest::Approx(-90.0));
  CHECK(phase_noise_slope(c, 1e5, 1e7) == doctest::Approx(-20.0));
}
