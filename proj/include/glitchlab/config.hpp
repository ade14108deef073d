#pragma once

// Run configuration for the command-line tool. JSON with explicit keys;
// unknown keys are rejected. Every field has a default, so "{}" is valid.

#include <nlohmann/json.hpp>

#include <initializer_list>

#include "glitchlab/model_io.hpp"
#include "glitchlab/report.hpp"
#include "glitchlab/synth.hpp"

namespace glitchlab {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ScenarioConfig {
  ModelConfig model = reference_config();
  std::size_t n_glitch = 102;  // floor(0.2 * 512)
  double corruption_scale = 8.0;
};

/// Key layers as written in a config: unset means the interior band
/// (every layer but the first and last), or an explicit list, or the
/// proportional downstream band.
struct KeyLayerSpec {
  enum class Kind : std::uint8_t { interior, explicit_list, downstream_band } kind = Kind::interior;
  std::vector<std::size_t> layers;

  KeyLayerSet resolve(std::size_t n_layers) const {
    switch (kind) {
      case Kind::explicit_list: return KeyLayerSet::explicit_layers(layers, n_layers);
      case Kind::downstream_band: return KeyLayerSet::downstream_band(n_layers);
      case Kind::interior: break;
    }
    return KeyLayerSet::explicit_layers(synthetic_key_layers(n_layers), n_layers);
  }
};

struct DetectionSettings {
  double gamma = kDefaultGamma;
  std::size_t pca_dim = kDefaultPcaDim;
  std::vector<Site> sites{std::begin(kAllSites), std::end(kAllSites)};
  KeyLayerSpec key_layers;
  SvmParams svm;
  bool post_validate = true;
};

enum class GlitchSource : std::uint8_t { detect, exhaustive };

struct RepairSettings {
  double gamma = kDefaultGamma;
  double threshold_m = kDefaultThresholdM;
  double up_quota = kDefaultUpQuota;
  AdjustmentCoefficients coefficients;
  std::optional<double> alpha;  // overrides the derived factor
  std::optional<double> beta;
  GlitchSource glitch_source = GlitchSource::detect;
};

struct DiagnosticsSettings {
  double bin_width = kDefaultBinWidth;
  Site scatter_site = Site::mlp_gate;
};

struct RunConfig {
  std::uint64_t seed = 7;
  std::size_t workers = 0;
  std::string out_dir = "glitchlab-out";
  std::size_t echo_budget = kDefaultEchoBudget;
  ScenarioConfig scenario;
  std::optional<std::string> model_path;
  std::optional<std::string> trace_path;
  std::optional<std::string> verdicts_path;
  DetectionSettings detection;
  RepairSettings repair;
  DiagnosticsSettings diagnostics;
  std::vector<SweepCell> sweep_grid = default_sweep_grid();

  void validate() const {
    try {
      scenario.model.validate();
      if (echo_budget == 0) throw std::invalid_argument("echo_budget must be positive");
      if (!(scenario.corruption_scale > 0)) throw std::invalid_argument("corruption_scale must be positive");
      if (!(detection.gamma > 0 && detection.gamma <= 1)) throw std::invalid_argument("detection.gamma must lie in (0, 1]");
      if (detection.pca_dim == 0) throw std::invalid_argument("detection.pca_dim must be positive");
      if (detection.sites.empty()) throw std::invalid_argument("detection.sites must be non-empty");
      detection.svm.validate();
      if (!(repair.gamma > 0 && repair.gamma <= 1)) throw std::invalid_argument("repair.gamma must lie in (0, 1]");
      if (!(repair.up_quota > 0 && repair.up_quota <= 1)) throw std::invalid_argument("repair.up_quota must lie in (0, 1]");
      if (repair.alpha && !(*repair.alpha > 0)) throw std::invalid_argument("repair.alpha must be positive");
      if (!(diagnostics.bin_width > 0 && diagnostics.bin_width <= 1))
        throw std::invalid_argument("diagnostics.bin_width must lie in (0, 1]");
      if (diagnostics.scatter_site == Site::attn_pattern)
        throw std::invalid_argument("diagnostics.scatter_site must be an MLP site");
      if (sweep_grid.empty()) throw std::invalid_argument("sweep.grid must be non-empty");
      if (detection.key_layers.kind == KeyLayerSpec::Kind::explicit_list && detection.key_layers.layers.empty())
        throw std::invalid_argument("detection.key_layers must be non-empty");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace config_detail {

inline void only_keys(const nlohmann::json& j, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw ConfigError(std::string(where) + ": unknown key '" + k + "'");
}

template <typename T>
void take(const nlohmann::json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

template <typename T>
void take_optional(const nlohmann::json& j, const char* key, std::optional<T>& dst) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    dst.reset();
    return;
  }
  T v{};
  take(j, key, v);
  dst = v;
}

}  // namespace config_detail

inline KeyLayerSpec parse_key_layers(std::string_view text) {
  KeyLayerSpec spec;
  if (text == "interior") return spec;
  if (text == "downstream_band") {
    spec.kind = KeyLayerSpec::Kind::downstream_band;
    return spec;
  }
  spec.kind = KeyLayerSpec::Kind::explicit_list;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    const std::string item(text.substr(start, end - start));
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || item.front() == '-')
      throw ConfigError("key layers: expected 'interior', 'downstream_band' or a comma list, got '" +
                        std::string(text) + "'");
    spec.layers.push_back(v);
    start = end + 1;
  }
  return spec;
}

inline ojson key_layers_to_json(const KeyLayerSpec& k) {
  switch (k.kind) {
    case KeyLayerSpec::Kind::explicit_list: return ojson(k.layers);
    case KeyLayerSpec::Kind::downstream_band: return "downstream_band";
    case KeyLayerSpec::Kind::interior: break;
  }
  return "interior";
}

inline RunConfig parse_run_config(const nlohmann::json& j) {
  using namespace config_detail;
  RunConfig c;
  only_keys(j, "config", {"seed", "workers", "out_dir", "echo_budget", "scenario", "model_path", "trace_path",
                          "verdicts_path", "detection", "repair", "diagnostics", "sweep"});
  take(j, "seed", c.seed);
  take(j, "workers", c.workers);
  take(j, "out_dir", c.out_dir);
  take(j, "echo_budget", c.echo_budget);
  take_optional(j, "model_path", c.model_path);
  take_optional(j, "trace_path", c.trace_path);
  take_optional(j, "verdicts_path", c.verdicts_path);

  if (j.contains("scenario")) {
    const auto& s = j.at("scenario");
    only_keys(s, "scenario", {"n_layers", "n_heads", "d_model", "d_mlp", "vocab_size", "max_positions",
                              "activation", "n_glitch", "corruption_scale"});
    auto& m = c.scenario.model;
    take(s, "n_layers", m.n_layers);
    take(s, "n_heads", m.n_heads);
    take(s, "d_model", m.d_model);
    take(s, "d_mlp", m.d_mlp);
    take(s, "vocab_size", m.vocab_size);
    take(s, "max_positions", m.max_positions);
    if (s.contains("activation")) {
      try {
        m.activation = parse_activation(s.at("activation").get<std::string>());
      } catch (const std::exception& e) {
        throw ConfigError(std::string("scenario.activation: ") + e.what());
      }
    }
    take(s, "n_glitch", c.scenario.n_glitch);
    take(s, "corruption_scale", c.scenario.corruption_scale);
  }

  if (j.contains("detection")) {
    const auto& d = j.at("detection");
    only_keys(d, "detection", {"gamma", "pca_dim", "sites", "key_layers", "svm", "post_validate"});
    take(d, "gamma", c.detection.gamma);
    take(d, "pca_dim", c.detection.pca_dim);
    take(d, "post_validate", c.detection.post_validate);
    if (d.contains("sites")) {
      try {
        c.detection.sites = sites_from_json(d.at("sites"));
      } catch (const std::exception& e) {
        throw ConfigError(std::string("detection.sites: ") + e.what());
      }
    }
    if (d.contains("key_layers")) {
      const auto& k = d.at("key_layers");
      if (k.is_null()) {
        c.detection.key_layers = {};
      } else if (k.is_string()) {
        c.detection.key_layers = parse_key_layers(k.get<std::string>());
        if (c.detection.key_layers.kind == KeyLayerSpec::Kind::explicit_list)
          throw ConfigError("detection.key_layers: use a JSON array for explicit layers");
      } else if (k.is_array()) {
        c.detection.key_layers.kind = KeyLayerSpec::Kind::explicit_list;
        take(d, "key_layers", c.detection.key_layers.layers);
      } else {
        throw ConfigError("detection.key_layers: expected null, a string, or an array");
      }
    }
    if (d.contains("svm")) {
      const auto& s = d.at("svm");
      only_keys(s, "detection.svm", {"C", "degree", "kernel_scale", "kernel_offset", "tolerance", "max_iters",
                                     "glitch_weight"});
      auto& p = c.detection.svm;
      take(s, "C", p.C);
      take(s, "degree", p.degree);
      take_optional(s, "kernel_scale", p.kernel_scale);
      take(s, "kernel_offset", p.kernel_offset);
      take(s, "tolerance", p.tolerance);
      take(s, "max_iters", p.max_iters);
      take(s, "glitch_weight", p.glitch_weight);
    }
  }

  if (j.contains("repair")) {
    const auto& r = j.at("repair");
    only_keys(r, "repair", {"gamma", "threshold_m", "up_quota", "k1", "b1", "k2", "b2", "alpha", "beta",
                            "glitch_source"});
    take(r, "gamma", c.repair.gamma);
    take(r, "threshold_m", c.repair.threshold_m);
    take(r, "up_quota", c.repair.up_quota);
    take(r, "k1", c.repair.coefficients.k1);
    take(r, "b1", c.repair.coefficients.b1);
    take(r, "k2", c.repair.coefficients.k2);
    take(r, "b2", c.repair.coefficients.b2);
    take_optional(r, "alpha", c.repair.alpha);
    take_optional(r, "beta", c.repair.beta);
    if (r.contains("glitch_source")) {
      std::string s;
      take(r, "glitch_source", s);
      if (s == "detect") c.repair.glitch_source = GlitchSource::detect;
      else if (s == "exhaustive") c.repair.glitch_source = GlitchSource::exhaustive;
      else throw ConfigError("repair.glitch_source must be 'detect' or 'exhaustive'");
    }
  }

  if (j.contains("diagnostics")) {
    const auto& d = j.at("diagnostics");
    only_keys(d, "diagnostics", {"bin_width", "scatter_site"});
    take(d, "bin_width", c.diagnostics.bin_width);
    if (d.contains("scatter_site")) {
      try {
        c.diagnostics.scatter_site = parse_site(d.at("scatter_site").get<std::string>());
      } catch (const std::exception& e) {
        throw ConfigError(std::string("diagnostics.scatter_site: ") + e.what());
      }
    }
  }

  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    only_keys(s, "sweep", {"grid"});
    if (s.contains("grid")) {
      c.sweep_grid.clear();
      for (const auto& cell : s.at("grid")) {
        only_keys(cell, "sweep.grid[]", {"sites", "C", "degree"});
        SweepCell sc;
        try {
          sc.sites = sites_from_json(cell.at("sites"));
          sc.C = cell.at("C").get<double>();
          sc.degree = cell.at("degree").get<int>();
        } catch (const std::exception& e) {
          throw ConfigError(std::string("sweep.grid: ") + e.what());
        }
        c.sweep_grid.push_back(std::move(sc));
      }
    }
  }
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  nlohmann::json j;
  {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open config '" + path + "'");
    try {
      j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
  }
  return parse_run_config(j);
}

/// Fully resolved configuration echoed into every report.
inline ojson to_json(const RunConfig& c) {
  ojson j;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["out_dir"] = c.out_dir;
  j["echo_budget"] = c.echo_budget;
  ojson s = config_to_json(c.scenario.model);
  s.erase("rng_seed");
  s["n_glitch"] = c.scenario.n_glitch;
  s["corruption_scale"] = c.scenario.corruption_scale;
  j["scenario"] = s;
  j["model_path"] = c.model_path ? ojson(*c.model_path) : ojson(nullptr);
  j["trace_path"] = c.trace_path ? ojson(*c.trace_path) : ojson(nullptr);
  j["verdicts_path"] = c.verdicts_path ? ojson(*c.verdicts_path) : ojson(nullptr);
  ojson d;
  d["gamma"] = c.detection.gamma;
  d["pca_dim"] = c.detection.pca_dim;
  d["sites"] = sites_to_json(c.detection.sites);
  d["key_layers"] = key_layers_to_json(c.detection.key_layers);
  d["svm"] = to_json(c.detection.svm);
  d["post_validate"] = c.detection.post_validate;
  j["detection"] = d;
  ojson r;
  r["gamma"] = c.repair.gamma;
  r["threshold_m"] = c.repair.threshold_m;
  r["up_quota"] = c.repair.up_quota;
  r["k1"] = c.repair.coefficients.k1;
  r["b1"] = c.repair.coefficients.b1;
  r["k2"] = c.repair.coefficients.k2;
  r["b2"] = c.repair.coefficients.b2;
  r["alpha"] = c.repair.alpha ? ojson(*c.repair.alpha) : ojson(nullptr);
  r["beta"] = c.repair.beta ? ojson(*c.repair.beta) : ojson(nullptr);
  r["glitch_source"] = c.repair.glitch_source == GlitchSource::detect ? "detect" : "exhaustive";
  j["repair"] = r;
  ojson g;
  g["bin_width"] = c.diagnostics.bin_width;
  g["scatter_site"] = std::string(to_string(c.diagnostics.scatter_site));
  j["diagnostics"] = g;
  ojson grid = ojson::array();
  for (const auto& cell : c.sweep_grid) {
    ojson cj;
    cj["sites"] = sites_to_json(cell.sites);
    cj["C"] = cell.C;
    cj["degree"] = cell.degree;
    grid.push_back(cj);
  }
  j["sweep"] = ojson{{"grid", grid}};
  return j;
}

}  // namespace glitchlab
