#include "stosim/run.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>

#include <json.hpp>

#include "stosim/errors.hpp"
#include "stosim/experiments.hpp"
#include "stosim/integrator.hpp"
#include "stosim/mixer.hpp"
#include "stosim/network.hpp"

namespace stosim::io {

namespace fs = std::filesystem;
using ordered = nlohmann::ordered_json;

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string trace_csv(const TraceSet& trace) {
  const std::size_t n = trace.oscillators.size();
  static const char* names[] = {"mx", "my", "mz", "r", "v", "i_inj"};
  std::string out = "time_s";
  for (std::size_t j = 0; j < n; ++j) {
    for (const char* c : names) {
      out += ',';
      if (n > 1) out += "osc" + std::to_string(j) + "_";
      out += c;
    }
  }
  out += '\n';
  for (std::size_t k = 0; k < trace.size(); ++k) {
    out += format_number(trace.time(k));
    for (const auto& o : trace.oscillators) {
      for (const auto* c : {&o.mx, &o.my, &o.mz, &o.r, &o.v, &o.i_inj}) {
        out += ',';
        out += format_number((*c)[k]);
      }
    }
    out += '\n';
  }
  return out;
}

std::string spectrum_csv(const spectral::Spectrum& s) {
  std::string out = "freq_hz,psd_v2_per_hz\n";
  for (std::size_t k = 0; k < s.size(); ++k) {
    out += format_number(s.frequencies[k]);
    out += ',';
    out += format_number(s.psd[k]);
    out += '\n';
  }
  return out;
}

void write_atomic(const fs::path& path, std::string_view contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    f.flush();
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out += hex[digest[k] >> 4];
    out += hex[digest[k] & 0xf];
  }
  return out;
}

namespace {

ordered opt(const std::optional<double>& v) { return v ? ordered(*v) : ordered(nullptr); }

ordered metrics_json(const experiments::OscillatorMetrics& m) {
  return {{"f_osc_hz", m.f_osc},
          {"power_dbm", m.power_dbm},
          {"linewidth_hz", m.linewidth},
          {"linewidth_fitted", m.fitted},
          {"resolution_limited", m.resolution_limited},
          {"phase_noise_slope_db_per_decade", m.pn_slope},
          {"phase_noise_1mhz_dbc_per_hz", m.l_1mhz}};
}

ordered lock_json(const mixer::NetworkLock& lock) {
  ordered pairs = ordered::array();
  for (const auto& p : lock.pairs) {
    pairs.push_back({{"state", mixer::to_string(p.state)},
                     {"drift_rad_per_s", p.drift},
                     {"residual_std_rad", p.residual_std}});
  }
  return {{"state", mixer::to_string(lock.state)}, {"f_osc_hz", lock.f_osc}, {"pairs", pairs}};
}

ordered report_json(const mixer::MixerReport& r) {
  return {{"f_osc_hz", r.f_osc},
          {"f_rf_hz", r.f_rf},
          {"p_in_dbm", r.p_in},
          {"sideband", mixer::to_string(r.sideband)},
          {"p_sideband_low_dbm", opt(r.p_sideband_low)},
          {"p_sideband_high_dbm", opt(r.p_sideband_high)},
          {"p_third_dbm", opt(r.p_third)},
          {"conversion_gain_db", opt(r.conversion_gain)},
          {"p1db_in_dbm", opt(r.p1db_in)},
          {"iip3_dbm", opt(r.iip3)},
          {"oip3_dbm", opt(r.oip3)},
          {"lock", mixer::to_string(r.lock)}};
}

std::string csv_opt(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

/// Collects artifacts for one run directory.
class Writer {
 public:
  explicit Writer(fs::path dir) : dir_(std::move(dir)) {}
  void put(const std::string& name, std::string_view contents) {
    write_atomic(dir_ / name, contents);
    names_.push_back(name);
  }
  void json(const std::string& name, const ordered& doc) { put(name, doc.dump(2) + "\n"); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

std::function<double(double)> injected_current(const std::vector<network::RfTone>& tones) {
  if (tones.empty()) return {};
  return [tones](double t) { return network::rf_current(t, tones, 1)[0]; };
}

template <class F>
ordered analysis_or_error(F&& f) {
  try {
    return f();
  } catch (const AnalysisError& e) {
    return {{"analysis_error", e.what()}};
  }
}

void run_trajectory_experiment(const ExperimentConfig& cfg, Writer& w) {
  const auto net = build_network(cfg);
  const auto& p = net.oscillators[0];
  sde::CurrentDrive drive;
  drive.dc = net.i_dc[0];
  std::vector<network::RfTone> tones;
  for (const auto& t : net.rf_tones) {
    if (t.target == 0) tones.push_back(t);
  }
  drive.injected = injected_current(tones);
  sde::TrajectoryOptions opts;
  opts.duration = cfg.run.duration;
  opts.sample_stride = cfg.run.sample_stride;
  opts.seed = cfg.master_seed;
  opts.h_ext = net.h_ext;
  const Vec3 initial = net.initial.empty() ? network::default_initial(0) : net.initial[0];
  const auto trace = sde::run_trajectory(initial, drive, p, cfg.stepper, opts);
  w.put("trace.csv", trace_csv(trace));
  const auto tail = experiments::settled(trace, cfg.analysis);
  w.put("spectrum.csv", spectrum_csv(experiments::voltage_spectrum(tail, 0, cfg.analysis)));
  w.json("metrics.json", analysis_or_error([&] {
           return metrics_json(experiments::analyse_oscillator(tail, 0, p.r_av(), cfg.analysis));
         }));
}

void run_network_experiment(const ExperimentConfig& cfg, Writer& w) {
  const auto net = build_network(cfg);
  network::SimulationOptions so{cfg.run.duration, cfg.run.sample_stride};
  const auto trace = network::simulate_network(net, cfg.stepper, so);
  w.put("trace.csv", trace_csv(trace));
  const auto tail = experiments::settled(trace, cfg.analysis);
  ordered oscs = ordered::array();
  for (std::size_t j = 0; j < net.size(); ++j) {
    w.put("spectrum_osc" + std::to_string(j) + ".csv",
          spectrum_csv(experiments::voltage_spectrum(tail, j, cfg.analysis)));
    oscs.push_back(analysis_or_error([&] {
      return metrics_json(
          experiments::analyse_oscillator(tail, j, net.oscillators[j].r_av(), cfg.analysis));
    }));
  }
  ordered doc;
  doc["oscillators"] = oscs;
  doc["lock"] = analysis_or_error(
      [&] { return lock_json(mixer::network_lock(tail, cfg.analysis.f_min, cfg.analysis.f_max)); });
  w.json("metrics.json", doc);
}

void run_psd_compare(const ExperimentConfig& cfg, Writer& w, std::size_t threads) {
  const auto net = build_network(cfg);
  network::SimulationOptions so{cfg.run.duration, cfg.run.sample_stride};
  const auto seeds = seed_list(cfg.master_seed, cfg.compare.seed_pairs);
  const auto r = experiments::psd_compare(net, cfg.stepper, so, cfg.analysis, seeds, threads);
  w.put("spectrum_coupled.csv", spectrum_csv(r.spectrum_coupled));
  w.put("spectrum_uncoupled.csv", spectrum_csv(r.spectrum_uncoupled));
  ordered runs = ordered::array();
  for (const auto& run : r.runs) {
    ordered c = ordered::array(), u = ordered::array();
    for (const auto& m : run.coupled) c.push_back(metrics_json(m));
    for (const auto& m : run.uncoupled) u.push_back(metrics_json(m));
    runs.push_back({{"seed", run.seed}, {"coupled", c}, {"uncoupled", u}});
  }
  ordered doc;
  doc["median_linewidth_coupled_hz"] = r.median_linewidth_coupled;
  doc["median_linewidth_uncoupled_hz"] = r.median_linewidth_uncoupled;
  doc["median_power_coupled_dbm"] = r.median_power_coupled;
  doc["median_power_uncoupled_dbm"] = r.median_power_uncoupled;
  doc["linewidth_reduced"] = r.narrower;
  doc["power_increased"] = r.stronger;
  doc["runs"] = runs;
  w.json("metrics.json", doc);
}

void run_sweep(const ExperimentConfig& cfg, Writer& w, std::size_t threads) {
  const auto net = build_network(cfg);
  const auto& s = cfg.sweep;
  mixer::SweepSpec spec{s.p_in_grid, s.f_rf, s.settle_time, s.measure_time,
                        seed_list(cfg.master_seed, s.seed_count)};
  mixer::MixerSweepOptions opts;
  opts.tap = s.tap;
  opts.sample_stride = cfg.run.sample_stride;
  opts.f_min = cfg.analysis.f_min;
  opts.f_max = cfg.analysis.f_max;
  opts.sideband = s.sideband;
  opts.measure.band = s.band;
  opts.measure.floor_margin_db = s.floor_margin_db;
  opts.threads = threads;
  const auto r = mixer::run_mixer_sweep(net, spec, cfg.stepper, opts);

  ordered reports = ordered::array();
  for (const auto& p : r.points) reports.push_back(report_json(p));
  w.json("reports.json", reports);

  std::string csv =
      "p_in_dbm,p_sideband_low_dbm,p_sideband_high_dbm,p_third_dbm,conversion_gain_db,"
      "fund_ideal_dbm,third_ideal_dbm\n";
  for (const auto& p : r.points) {
    csv += format_number(p.p_in) + "," + csv_opt(p.p_sideband_low) + "," +
           csv_opt(p.p_sideband_high) + "," + csv_opt(p.p_third) + "," +
           csv_opt(p.conversion_gain) + ",";
    if (r.intercept) {
      csv += format_number(p.p_in + r.intercept->fund_offset) + "," +
             format_number(3.0 * p.p_in + r.intercept->third_offset);
    } else {
      csv += ",";
    }
    csv += '\n';
  }
  w.put("sweep.csv", csv);
  for (std::size_t k = 0; k < r.spectra.size(); ++k) {
    w.put("spectrum_point" + std::to_string(k) + ".csv", spectrum_csv(r.spectra[k]));
  }

  ordered doc;
  doc["p1db_in_dbm"] = opt(r.p1db_in);
  doc["p1db_error"] = r.p1db_error.empty() ? ordered(nullptr) : ordered(r.p1db_error);
  if (r.intercept) {
    const auto& i = *r.intercept;
    doc["iip3_dbm"] = i.iip3;
    doc["oip3_dbm"] = i.oip3;
    doc["fund_slope_db_per_db"] = i.fund_slope;
    doc["third_slope_db_per_db"] = i.third_slope;
    doc["fund_points"] = i.n_fund;
    doc["third_points"] = i.n_third;
  } else {
    doc["iip3_dbm"] = nullptr;
    doc["oip3_dbm"] = nullptr;
  }
  doc["intercept_error"] = r.intercept_error.empty() ? ordered(nullptr) : ordered(r.intercept_error);
  w.json("metrics.json", doc);

  if (cfg.experiment == Experiment::p1db && !r.p1db_error.empty()) throw AnalysisError(r.p1db_error);
  if (cfg.experiment == Experiment::iip3 && !r.intercept) {
    if (r.intercept_error.rfind("non-cubic", 0) == 0) throw NonCubicRegimeError(r.intercept_error);
    throw AnalysisError(r.intercept_error);
  }
}

void run_volume_lock(const ExperimentConfig& cfg, Writer& w, std::size_t threads) {
  const auto net = build_network(cfg);
  mixer::VolumeStudyOptions opts;
  opts.duration = cfg.run.duration;
  opts.settle_fraction = cfg.analysis.settle_fraction;
  opts.sample_stride = cfg.run.sample_stride;
  opts.f_min = cfg.analysis.f_min;
  opts.f_max = cfg.analysis.f_max;
  opts.scale_with_volume = cfg.volume_lock.scale_with_volume;
  opts.threads = threads;
  const auto verdicts = mixer::volume_lock_study(net, cfg.volume_lock.volumes, cfg.stepper, opts);

  std::string csv = "volume_m3,state,f_osc_hz,max_abs_drift_rad_per_s,max_residual_std_rad\n";
  ordered list = ordered::array();
  for (const auto& v : verdicts) {
    double drift = 0.0, resid = 0.0;
    for (const auto& p : v.lock.pairs) {
      drift = std::max(drift, std::abs(p.drift));
      resid = std::max(resid, p.residual_std);
    }
    csv += format_number(v.volume) + "," + mixer::to_string(v.lock.state) + "," +
           format_number(v.lock.f_osc) + "," + format_number(drift) + "," + format_number(resid) +
           "\n";
    auto entry = lock_json(v.lock);
    entry["volume_m3"] = v.volume;
    list.push_back(entry);
  }
  w.put("volumes.csv", csv);
  ordered doc;
  doc["verdicts"] = list;
  doc["transition_volume_m3"] = opt(mixer::transition_volume(verdicts));
  w.json("metrics.json", doc);
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& cfg, std::size_t threads) {
  validate(cfg);
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  Writer w(dir);
  // The output location is not part of the experiment, so re-runs into
  // different directories produce identical records.
  auto recorded = ordered::parse(emit_config(cfg));
  recorded.erase("output_dir");
  const std::string config_text = recorded.dump(2) + "\n";
  w.put("config.json", config_text);

  switch (cfg.experiment) {
    case Experiment::trajectory: run_trajectory_experiment(cfg, w); break;
    case Experiment::network: run_network_experiment(cfg, w); break;
    case Experiment::psd_compare: run_psd_compare(cfg, w, threads); break;
    case Experiment::mixer_sweep:
    case Experiment::p1db:
    case Experiment::iip3: run_sweep(cfg, w, threads); break;
    case Experiment::volume_lock: run_volume_lock(cfg, w, threads); break;
  }

  RunManifest m;
  m.config_hash = sha256_hex(config_text);
  m.seed = cfg.master_seed;
  m.artifacts = w.names();
  m.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ordered doc;
  doc["config_hash"] = m.config_hash;
  doc["seed"] = m.seed;
  doc["artifacts"] = m.artifacts;
  doc["software_version"] = m.software_version;
  doc["wall_time_s"] = m.wall_time_s;
  write_atomic(dir / "manifest.json", doc.dump(2) + "\n");
  return m;
}

}  // namespace stosim::io
