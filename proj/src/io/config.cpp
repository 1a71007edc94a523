#include "stosim/config.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

#include "stosim/errors.hpp"

namespace stosim::io {

using json = nlohmann::json;
using ordered = nlohmann::ordered_json;

const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::trajectory: return "trajectory";
    case Experiment::network: return "network";
    case Experiment::psd_compare: return "psd_compare";
    case Experiment::mixer_sweep: return "mixer_sweep";
    case Experiment::p1db: return "p1db";
    case Experiment::iip3: return "iip3";
    case Experiment::volume_lock: return "volume_lock";
  }
  return "unknown";
}

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path, "must be finite");
  return d;
}

std::uint64_t as_unsigned(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) throw ConfigError(path, "must be >= 0");
  throw ConfigError(path, "expected a non-negative integer");
}

Vec3 as_vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(path, "expected an array of 3 numbers");
  return {as_double(v[0], path + "[0]"), as_double(v[1], path + "[1]"), as_double(v[2], path + "[2]")};
}

std::vector<double> as_doubles(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    out.push_back(as_double(v[k], path + "[" + std::to_string(k) + "]"));
  }
  return out;
}

/// Field access on one JSON object that remembers which keys were consumed.
class Object {
 public:
  Object(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "(root)" : path_, "expected an object");
  }

  const json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string path(const char* key) const { return join(path_, key); }

  void number(const char* key, double& out) {
    if (auto* v = find(key)) out = as_double(*v, path(key));
  }
  void number(const char* key, std::optional<double>& out) {
    if (auto* v = find(key)) out = as_double(*v, path(key));
  }
  void count(const char* key, std::size_t& out) {
    if (auto* v = find(key)) out = static_cast<std::size_t>(as_unsigned(*v, path(key)));
  }
  void seed(const char* key, std::uint64_t& out) {
    if (auto* v = find(key)) out = as_unsigned(*v, path(key));
  }
  void vec(const char* key, Vec3& out) {
    if (auto* v = find(key)) out = as_vec3(*v, path(key));
  }
  void vec(const char* key, std::optional<Vec3>& out) {
    if (auto* v = find(key)) out = as_vec3(*v, path(key));
  }
  void numbers(const char* key, std::vector<double>& out) {
    if (auto* v = find(key)) out = as_doubles(*v, path(key));
  }
  void flag(const char* key, bool& out) {
    if (auto* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(path(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void text(const char* key, std::string& out) {
    if (auto* v = find(key)) {
      if (!v->is_string()) throw ConfigError(path(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  template <class E, std::size_t N>
  void choice(const char* key, E& out, const std::pair<const char*, E> (&options)[N]) {
    const json* v = find(key);
    if (!v) return;
    if (v->is_string()) {
      for (const auto& [name, value] : options) {
        if (v->get<std::string>() == name) {
          out = value;
          return;
        }
      }
    }
    std::string allowed;
    for (const auto& [name, value] : options) allowed += std::string(allowed.empty() ? "" : ", ") + name;
    throw ConfigError(path(key), "expected one of: " + allowed);
  }

  /// Rejects keys that were never looked up.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(join(path_, it.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const std::pair<const char*, Experiment> kExperiments[] = {
    {"trajectory", Experiment::trajectory}, {"network", Experiment::network},
    {"psd_compare", Experiment::psd_compare}, {"mixer_sweep", Experiment::mixer_sweep},
    {"p1db", Experiment::p1db}, {"iip3", Experiment::iip3},
    {"volume_lock", Experiment::volume_lock}};
const std::pair<const char*, network::Topology> kTopologies[] = {
    {"global", network::Topology::global}, {"none", network::Topology::none}};
const std::pair<const char*, sde::Scheme> kSchemes[] = {{"heun", sde::Scheme::heun},
                                                         {"rk4", sde::Scheme::rk4}};
const std::pair<const char*, mixer::Sideband> kSidebands[] = {{"lower", mixer::Sideband::lower},
                                                               {"upper", mixer::Sideband::upper}};

void read_device(Object& o, magnetics::DeviceParams& p) {
  o.number("alpha", p.alpha);
  o.number("gamma", p.gamma);
  o.number("ms", p.ms);
  o.number("volume", p.volume);
  o.number("epsilon", p.epsilon);
  o.vec("k1", p.k1);
  o.vec("k2", p.k2);
  o.vec("m_p", p.m_p);
  o.number("r_p", p.r_p);
  o.number("r_ap", p.r_ap);
  o.number("temperature", p.temperature);
}

void read_override(Object& o, OscillatorOverride& p) {
  o.number("alpha", p.alpha);
  o.number("gamma", p.gamma);
  o.number("ms", p.ms);
  o.number("volume", p.volume);
  o.number("epsilon", p.epsilon);
  o.vec("k1", p.k1);
  o.vec("k2", p.k2);
  o.vec("m_p", p.m_p);
  o.number("r_p", p.r_p);
  o.number("r_ap", p.r_ap);
  o.number("temperature", p.temperature);
  o.number("i_dc", p.i_dc);
  o.vec("initial", p.initial);
}

void read_network(Object& o, NetworkSettings& n) {
  o.count("count", n.count);
  o.number("i_dc", n.i_dc);
  o.number("g_m", n.g_m);
  o.choice("topology", n.topology, kTopologies);
  o.number("hp_cutoff", n.hp_cutoff);
  o.vec("h_ext", n.h_ext);
  if (const json* tones = o.find("rf_tones")) {
    if (!tones->is_array()) throw ConfigError(o.path("rf_tones"), "expected an array");
    for (std::size_t k = 0; k < tones->size(); ++k) {
      Object t((*tones)[k], o.path("rf_tones") + "[" + std::to_string(k) + "]");
      network::RfTone tone;
      t.number("amplitude", tone.amplitude);
      t.number("frequency", tone.frequency);
      t.number("phase", tone.phase);
      t.count("target", tone.target);
      t.finish();
      n.rf_tones.push_back(tone);
    }
  }
  if (const json* oscs = o.find("oscillators")) {
    if (!oscs->is_array()) throw ConfigError(o.path("oscillators"), "expected an array");
    for (std::size_t k = 0; k < oscs->size(); ++k) {
      Object t((*oscs)[k], o.path("oscillators") + "[" + std::to_string(k) + "]");
      OscillatorOverride ov;
      read_override(t, ov);
      t.finish();
      n.oscillators.push_back(ov);
    }
  }
}

template <class F>
void section(Object& root, const char* key, F&& fill) {
  if (const json* v = root.find(key)) {
    Object o(*v, key);
    fill(o);
    o.finish();
  }
}

ordered vec_json(const Vec3& v) { return ordered::array({v.x, v.y, v.z}); }

ordered device_json(const magnetics::DeviceParams& p) {
  ordered d;
  d["alpha"] = p.alpha;
  d["gamma"] = p.gamma;
  d["ms"] = p.ms;
  d["volume"] = p.volume;
  d["epsilon"] = p.epsilon;
  d["k1"] = vec_json(p.k1);
  d["k2"] = vec_json(p.k2);
  d["m_p"] = vec_json(p.m_p);
  d["r_p"] = p.r_p;
  d["r_ap"] = p.r_ap;
  d["temperature"] = p.temperature;
  return d;
}

ordered override_json(const OscillatorOverride& p) {
  ordered d = ordered::object();
  auto put = [&](const char* key, const auto& v) {
    if (!v) return;
    if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, Vec3>) {
      d[key] = vec_json(*v);
    } else {
      d[key] = *v;
    }
  };
  put("alpha", p.alpha);
  put("gamma", p.gamma);
  put("ms", p.ms);
  put("volume", p.volume);
  put("epsilon", p.epsilon);
  put("k1", p.k1);
  put("k2", p.k2);
  put("m_p", p.m_p);
  put("r_p", p.r_p);
  put("r_ap", p.r_ap);
  put("temperature", p.temperature);
  put("i_dc", p.i_dc);
  put("initial", p.initial);
  return d;
}

magnetics::DeviceParams apply(magnetics::DeviceParams p, const OscillatorOverride& o) {
  auto set = [](auto& field, const auto& v) {
    if (v) field = *v;
  };
  set(p.alpha, o.alpha);
  set(p.gamma, o.gamma);
  set(p.ms, o.ms);
  set(p.volume, o.volume);
  set(p.epsilon, o.epsilon);
  set(p.k1, o.k1);
  set(p.k2, o.k2);
  set(p.m_p, o.m_p);
  set(p.r_p, o.r_p);
  set(p.r_ap, o.r_ap);
  set(p.temperature, o.temperature);
  return p;
}

bool uses_sweep(Experiment e) {
  return e == Experiment::mixer_sweep || e == Experiment::p1db || e == Experiment::iip3;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("(syntax)", e.what());
  }
  ExperimentConfig cfg;
  Object root(doc, "");
  const json* version = root.find("schema_version");
  if (!version) throw ConfigError("schema_version", "required");
  if (!version->is_number_integer() || version->get<std::int64_t>() != kSchemaVersion) {
    throw ConfigError("schema_version", "unsupported; expected " + std::to_string(kSchemaVersion));
  }
  cfg.schema_version = kSchemaVersion;
  if (!root.find("experiment")) throw ConfigError("experiment", "required");
  root.choice("experiment", cfg.experiment, kExperiments);
  root.seed("master_seed", cfg.master_seed);
  root.text("output_dir", cfg.output_dir);
  section(root, "device", [&](Object& o) { read_device(o, cfg.device); });
  section(root, "network", [&](Object& o) { read_network(o, cfg.network); });
  section(root, "stepper", [&](Object& o) {
    o.number("dt", cfg.stepper.dt);
    o.choice("scheme", cfg.stepper.scheme, kSchemes);
    o.flag("renormalize", cfg.stepper.renormalize);
  });
  section(root, "run", [&](Object& o) {
    o.number("duration", cfg.run.duration);
    o.count("sample_stride", cfg.run.sample_stride);
  });
  section(root, "analysis", [&](Object& o) {
    o.number("settle_fraction", cfg.analysis.settle_fraction);
    o.number("f_min", cfg.analysis.f_min);
    o.number("f_max", cfg.analysis.f_max);
    o.count("welch_segments", cfg.analysis.welch_segments);
    o.number("pn_lo", cfg.analysis.pn_lo);
    o.number("pn_hi", cfg.analysis.pn_hi);
  });
  section(root, "sweep", [&](Object& o) {
    o.numbers("p_in_grid", cfg.sweep.p_in_grid);
    o.number("f_rf", cfg.sweep.f_rf);
    o.number("settle_time", cfg.sweep.settle_time);
    o.number("measure_time", cfg.sweep.measure_time);
    o.count("seed_count", cfg.sweep.seed_count);
    o.choice("sideband", cfg.sweep.sideband, kSidebands);
    o.count("tap", cfg.sweep.tap);
    o.number("band", cfg.sweep.band);
    o.number("floor_margin_db", cfg.sweep.floor_margin_db);
  });
  section(root, "compare", [&](Object& o) { o.count("seed_pairs", cfg.compare.seed_pairs); });
  section(root, "volume_lock", [&](Object& o) {
    o.numbers("volumes", cfg.volume_lock.volumes);
    o.flag("scale_with_volume", cfg.volume_lock.scale_with_volume);
  });
  root.finish();
  validate(cfg);
  return cfg;
}

std::string emit_config(const ExperimentConfig& cfg) {
  ordered d;
  d["schema_version"] = cfg.schema_version;
  d["experiment"] = to_string(cfg.experiment);
  d["master_seed"] = cfg.master_seed;
  d["output_dir"] = cfg.output_dir;
  d["device"] = device_json(cfg.device);

  ordered n;
  n["count"] = cfg.network.count;
  n["i_dc"] = cfg.network.i_dc;
  n["g_m"] = cfg.network.g_m;
  n["topology"] = cfg.network.topology == network::Topology::global ? "global" : "none";
  n["hp_cutoff"] = cfg.network.hp_cutoff;
  n["h_ext"] = vec_json(cfg.network.h_ext);
  n["rf_tones"] = ordered::array();
  for (const auto& t : cfg.network.rf_tones) {
    ordered tone;
    tone["amplitude"] = t.amplitude;
    tone["frequency"] = t.frequency;
    tone["phase"] = t.phase;
    tone["target"] = t.target;
    n["rf_tones"].push_back(tone);
  }
  n["oscillators"] = ordered::array();
  for (const auto& o : cfg.network.oscillators) n["oscillators"].push_back(override_json(o));
  d["network"] = n;

  d["stepper"] = {{"dt", cfg.stepper.dt},
                  {"scheme", cfg.stepper.scheme == sde::Scheme::heun ? "heun" : "rk4"},
                  {"renormalize", cfg.stepper.renormalize}};
  d["run"] = {{"duration", cfg.run.duration}, {"sample_stride", cfg.run.sample_stride}};
  d["analysis"] = {{"settle_fraction", cfg.analysis.settle_fraction},
                   {"f_min", cfg.analysis.f_min},
                   {"f_max", cfg.analysis.f_max},
                   {"welch_segments", cfg.analysis.welch_segments},
                   {"pn_lo", cfg.analysis.pn_lo},
                   {"pn_hi", cfg.analysis.pn_hi}};
  d["sweep"] = {{"p_in_grid", cfg.sweep.p_in_grid},
                {"f_rf", cfg.sweep.f_rf},
                {"settle_time", cfg.sweep.settle_time},
                {"measure_time", cfg.sweep.measure_time},
                {"seed_count", cfg.sweep.seed_count},
                {"sideband", mixer::to_string(cfg.sweep.sideband)},
                {"tap", cfg.sweep.tap},
                {"band", cfg.sweep.band},
                {"floor_margin_db", cfg.sweep.floor_margin_db}};
  d["compare"] = {{"seed_pairs", cfg.compare.seed_pairs}};
  d["volume_lock"] = {{"volumes", cfg.volume_lock.volumes},
                      {"scale_with_volume", cfg.volume_lock.scale_with_volume}};
  return d.dump(2) + "\n";
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.schema_version != kSchemaVersion) throw ConfigError("schema_version", "unsupported");
  if (cfg.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  try {
    magnetics::validate(cfg.device);
  } catch (const ConfigError& e) {
    throw ConfigError("device." + e.field(), std::string(e.what()).substr(e.field().size() + 2));
  }
  const auto& n = cfg.network;
  if (n.count < 1) throw ConfigError("network.count", "must be >= 1");
  if (!n.oscillators.empty() && n.oscillators.size() != n.count) {
    throw ConfigError("network.oscillators", "must be empty or list one entry per oscillator");
  }
  try {
    network::validate(build_network(cfg));
  } catch (const ConfigError& e) {
    const std::string& f = e.field();
    const std::string what = std::string(e.what()).substr(f.size() + 2);
    throw ConfigError(f.rfind("network.", 0) == 0 ? f : "network." + f, what);
  }
  for (const auto& p : build_network(cfg).oscillators) sde::validate(cfg.stepper, p);
  if (cfg.run.sample_stride < 1) throw ConfigError("run.sample_stride", "must be >= 1");
  if (!(cfg.run.duration >= cfg.stepper.dt)) throw ConfigError("run.duration", "must be >= stepper.dt");
  experiments::validate(cfg.analysis);

  if (uses_sweep(cfg.experiment)) {
    const auto& s = cfg.sweep;
    mixer::SweepSpec spec{s.p_in_grid, s.f_rf, s.settle_time, s.measure_time,
                          seed_list(cfg.master_seed, s.seed_count)};
    if (s.seed_count < 1) throw ConfigError("sweep.seed_count", "must be >= 1");
    mixer::validate(spec);
    if (s.tap >= n.count) throw ConfigError("sweep.tap", "index out of range");
    if (!(s.band >= 0.0)) throw ConfigError("sweep.band", "must be >= 0");
  }
  if (cfg.experiment == Experiment::psd_compare && cfg.compare.seed_pairs < 1) {
    throw ConfigError("compare.seed_pairs", "must be >= 1");
  }
  if (cfg.experiment == Experiment::volume_lock) {
    if (cfg.volume_lock.volumes.size() < 2) {
      throw ConfigError("volume_lock.volumes", "at least two volumes required");
    }
    for (double v : cfg.volume_lock.volumes) {
      if (!(v > 0.0)) throw ConfigError("volume_lock.volumes", "must be > 0");
    }
  }
}

network::NetworkConfig build_network(const ExperimentConfig& cfg) {
  network::NetworkConfig out;
  const auto& n = cfg.network;
  bool any_initial = false;
  for (std::size_t j = 0; j < n.count; ++j) {
    const OscillatorOverride* ov = n.oscillators.empty() ? nullptr : &n.oscillators[j];
    out.oscillators.push_back(ov ? apply(cfg.device, *ov) : cfg.device);
    out.i_dc.push_back(ov && ov->i_dc ? *ov->i_dc : n.i_dc);
    if (ov && ov->initial) any_initial = true;
  }
  if (any_initial) {
    for (std::size_t j = 0; j < n.count; ++j) {
      const auto& ov = n.oscillators[j];
      out.initial.push_back(ov.initial ? normalized(*ov.initial) : network::default_initial(j));
    }
  }
  out.g_m = n.g_m;
  out.topology = n.topology;
  out.hp_cutoff = n.hp_cutoff;
  out.rf_tones = n.rf_tones;
  out.master_seed = cfg.master_seed;
  out.h_ext = n.h_ext;
  return out;
}

std::vector<std::uint64_t> seed_list(std::uint64_t master_seed, std::size_t count) {
  std::vector<std::uint64_t> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(master_seed + k);
  return out;
}

}  // namespace stosim::io
