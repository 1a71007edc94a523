#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "stosim/config.hpp"
#include "stosim/errors.hpp"
#include "stosim/run.hpp"

namespace {

using stosim::io::Experiment;

enum Exit { ok = 0, config_error = 1, simulation_error = 2, analysis_error = 3 };

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::size_t threads = 1;
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw stosim::ConfigError("--config", "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

bool mixer_family(Experiment e) {
  return e == Experiment::mixer_sweep || e == Experiment::p1db || e == Experiment::iip3;
}

/// Checks the verb against the config's experiment. The three sweep verbs
/// share one config and select the experiment themselves.
void apply_verb(const std::string& verb, stosim::io::ExperimentConfig& cfg) {
  auto require = [&](Experiment e) {
    if (cfg.experiment != e) {
      throw stosim::ConfigError("experiment", std::string("verb '") + verb + "' requires \"" +
                                                  stosim::io::to_string(e) + "\"");
    }
  };
  if (verb == "simulate") {
    if (cfg.experiment != Experiment::trajectory && cfg.experiment != Experiment::network) {
      throw stosim::ConfigError("experiment", "verb 'simulate' requires \"trajectory\" or \"network\"");
    }
  } else if (verb == "psd-compare") {
    require(Experiment::psd_compare);
  } else if (verb == "volume-lock") {
    require(Experiment::volume_lock);
  } else if (verb == "mixer-sweep" || verb == "p1db" || verb == "iip3") {
    const Experiment e = verb == "mixer-sweep" ? Experiment::mixer_sweep
                         : verb == "p1db"      ? Experiment::p1db
                                               : Experiment::iip3;
    if (!mixer_family(cfg.experiment)) require(e);
    cfg.experiment = e;
  }
}

int run(const std::string& verb, const Flags& flags) {
  try {
    auto cfg = stosim::io::parse_config(read_file(flags.config));
    if (flags.seed) cfg.master_seed = *flags.seed;
    if (flags.out) cfg.output_dir = *flags.out;
    apply_verb(verb, cfg);
    stosim::io::validate(cfg);
    if (verb == "validate") {
      std::cout << "ok: " << stosim::io::to_string(cfg.experiment) << "\n";
      return ok;
    }
    const auto manifest = stosim::io::run_experiment(cfg, flags.threads);
    std::cout << cfg.output_dir << ": " << manifest.artifacts.size() << " artifacts, config "
              << manifest.config_hash.substr(0, 12) << "\n";
    return ok;
  } catch (const stosim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const stosim::SimulationError& e) {
    std::cerr << "simulation error: " << e.what() << "\n";
    return simulation_error;
  } catch (const stosim::AnalysisError& e) {
    std::cerr << "analysis error: " << e.what() << "\n";
    return analysis_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return simulation_error;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spin-torque oscillator simulation lab"};
  app.require_subcommand(1);
  Flags flags;
  std::uint64_t seed = 0;
  std::string out;

  const std::pair<const char*, const char*> verbs[] = {
      {"simulate", "Integrate one oscillator or a network and write traces and spectra"},
      {"psd-compare", "Coupled versus uncoupled spectra, linewidth and power"},
      {"mixer-sweep", "RF input power sweep with sideband and third-order products"},
      {"p1db", "Input-referred 1 dB compression point from a sweep"},
      {"iip3", "Third-order intercept from a sweep"},
      {"volume-lock", "Lock verdicts across free-layer volumes"},
      {"validate", "Check a config without running it"}};
  for (const auto& [name, help] : verbs) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override master_seed");
    sub->add_option("--out", out, "Override output_dir");
    sub->add_option("--threads", flags.threads, "Worker threads (0 = all cores)")->capture_default_str();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : config_error;
  }

  const auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) flags.seed = seed;
  if (sub->count("--out")) flags.out = out;
  return run(sub->get_name(), flags);
}
