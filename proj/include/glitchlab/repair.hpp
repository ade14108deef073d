#pragma once

// Activation repair: profile the gated MLP activation Z~ = act(Z1) * Z2 of
// normal tokens at the key layers, derive promotion (beta) and suppression
// (alpha) factors from the glitch/normal gap, and patch Z~ while decoding.

#include "glitchlab/features.hpp"

namespace glitchlab {

inline constexpr double kDefaultThresholdM = 1.0;
inline constexpr double kDefaultUpQuota = 0.99;
inline constexpr double kRuleBasedAlpha = 4.0;
inline constexpr double kRuleBasedBeta = 1.5;
inline constexpr double kAlphaMax = 16.0;
inline constexpr double kBetaMax = 8.0;
inline constexpr double kRatioEpsilon = 1e-6;

struct LayerProfile {
  std::size_t layer = 0;
  std::vector<std::size_t> up;    // Neun-up: Act > m for >= up_quota of the sample
  std::vector<std::size_t> down;  // Neun-down: Act <= m for every sampled token
  Eigen::VectorXd normal_mean;    // per neuron
};

struct NeuronProfile {
  std::vector<LayerProfile> layers;
  double m = kDefaultThresholdM;
  double up_quota = kDefaultUpQuota;
  std::vector<TokenId> sample_ids;  // N'

  bool degenerate() const {
    return std::all_of(layers.begin(), layers.end(), [](const auto& l) { return l.up.empty() && l.down.empty(); });
  }
};

inline constexpr Site kMlpSites[] = {Site::mlp_gate, Site::mlp_data};

/// Z~ per key layer, read from a trace that holds both MLP sites.
inline std::vector<Eigen::VectorXd> gated_activations(const ActivationTrace& t, std::span<const std::size_t> layers) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(layers.size());
  for (std::size_t l : layers) {
    const auto gate = t.segment(l, Site::mlp_gate);
    const auto data = t.segment(l, Site::mlp_data);
    Eigen::VectorXd z(static_cast<Eigen::Index>(gate.size()));
    for (std::size_t i = 0; i < gate.size(); ++i)
      z[static_cast<Eigen::Index>(i)] = static_cast<double>(gate[i]) * static_cast<double>(data[i]);
    out.push_back(std::move(z));
  }
  return out;
}

/// Neuron sets from an activation table: acts[token][layer] is Z~.
inline NeuronProfile profile_from_activations(const std::vector<std::vector<Eigen::VectorXd>>& acts,
                                              std::span<const std::size_t> layers, double m,
                                              double up_quota = kDefaultUpQuota) {
  if (acts.empty()) throw std::invalid_argument("profile: no normal activations");
  if (!(up_quota > 0.0 && up_quota <= 1.0)) throw std::invalid_argument("profile: up_quota must lie in (0, 1]");
  NeuronProfile p;
  p.m = m;
  p.up_quota = up_quota;
  const double n = static_cast<double>(acts.size());
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const Eigen::Index width = acts.front().at(li).size();
    LayerProfile lp;
    lp.layer = layers[li];
    lp.normal_mean = Eigen::VectorXd::Zero(width);
    for (Eigen::Index i = 0; i < width; ++i) {
      std::size_t above = 0;
      for (const auto& a : acts) {
        if (a.at(li).size() != width) throw std::invalid_argument("profile: ragged activation table");
        const double v = a[li][i];
        above += v > m;
        lp.normal_mean[i] += v;
      }
      lp.normal_mean[i] /= n;
      if (static_cast<double>(above) >= up_quota * n) lp.up.push_back(static_cast<std::size_t>(i));
      else if (above == 0) lp.down.push_back(static_cast<std::size_t>(i));
    }
    p.layers.push_back(std::move(lp));
  }
  return p;
}

/// Samples N' from `normal` at rate gamma and profiles it.
inline NeuronProfile profile_normal(const TransformerModel& model, std::span<const TokenId> normal, double gamma,
                                    double m, const KeyLayerSet& key_layers, std::uint64_t rng_seed,
                                    double up_quota = kDefaultUpQuota, std::size_t workers = 0) {
  if (normal.size() < 10) throw std::invalid_argument("profile_normal: need at least 10 normal tokens");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("profile_normal: gamma must lie in (0, 1]");
  key_layers.validate(model.config.n_layers);
  std::vector<TokenId> pool(normal.begin(), normal.end());
  std::sort(pool.begin(), pool.end());
  const auto k = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(pool.size()) - 1e-9));
  Rng rng(rng_seed);
  const std::vector<TokenId> sample = sample_without_replacement(pool, std::max<std::size_t>(k, 1), rng);
  const auto traces = extract_all(model, sample, key_layers, kMlpSites, workers);
  std::vector<std::vector<Eigen::VectorXd>> acts;
  for (const auto& t : traces) acts.push_back(gated_activations(t, key_layers.layers));
  NeuronProfile p = profile_from_activations(acts, key_layers.layers, m, up_quota);
  p.sample_ids = sample;
  return p;
}

struct AdjustmentCoefficients {
  double k1 = 1.0, b1 = 0.0;  // beta = k1 * delta_up + b1
  double k2 = 1.0, b2 = 0.0;  // alpha = k2 * delta_down + b2
};

struct AdjustmentFactors {
  double beta = 0.0;
  double alpha = 1.0;
  double delta_up = 0.0;
  double delta_down = 1.0;
  AdjustmentCoefficients coefficients;
};

/// Gaps pooled over every (key layer, neuron) pair of each set.
/// glitch_acts[token][layer] is Z~ in the same layer order as the profile.
inline AdjustmentFactors compute_adjustments(const NeuronProfile& profile,
                                             const std::vector<std::vector<Eigen::VectorXd>>& glitch_acts,
                                             const AdjustmentCoefficients& coef = {}) {
  if (glitch_acts.empty()) throw std::invalid_argument("compute_adjustments: empty glitch sample");
  if (profile.degenerate()) throw DegenerateDataError("compute_adjustments: both neuron sets are empty");
  AdjustmentFactors f;
  f.coefficients = coef;
  const double n = static_cast<double>(glitch_acts.size());
  double up_sum = 0, down_sum = 0;
  std::size_t up_count = 0, down_count = 0;
  for (std::size_t li = 0; li < profile.layers.size(); ++li) {
    const LayerProfile& lp = profile.layers[li];
    Eigen::VectorXd gmean = Eigen::VectorXd::Zero(lp.normal_mean.size());
    for (const auto& g : glitch_acts) {
      if (g.at(li).size() != gmean.size()) throw std::invalid_argument("compute_adjustments: width mismatch");
      gmean += g[li];
    }
    gmean /= n;
    for (std::size_t i : lp.up) up_sum += lp.normal_mean[static_cast<Eigen::Index>(i)] - gmean[static_cast<Eigen::Index>(i)];
    for (std::size_t i : lp.down)
      down_sum += gmean[static_cast<Eigen::Index>(i)] / std::max(lp.normal_mean[static_cast<Eigen::Index>(i)], kRatioEpsilon);
    up_count += lp.up.size();
    down_count += lp.down.size();
  }
  if (up_count > 0) {
    f.delta_up = up_sum / static_cast<double>(up_count);
    f.beta = std::clamp(coef.k1 * f.delta_up + coef.b1, 0.0, kBetaMax);
  }
  if (down_count > 0) {
    f.delta_down = down_sum / static_cast<double>(down_count);
    f.alpha = std::clamp(coef.k2 * f.delta_down + coef.b2, 1.0, kAlphaMax);
  }
  return f;
}

inline AdjustmentFactors rule_based_factors() {
  AdjustmentFactors f;
  f.alpha = kRuleBasedAlpha;
  f.beta = kRuleBasedBeta;
  return f;
}

/// The patch applied to Z~ at every key layer: +beta on Neun-up, /alpha on Neun-down.
inline MlpPatch make_patch(const NeuronProfile& profile, const AdjustmentFactors& f) {
  if (!(f.alpha > 0)) throw std::invalid_argument("repair: alpha must be positive");
  return [&profile, beta = f.beta, alpha = f.alpha](std::size_t layer, std::span<double> z) {
    for (const auto& lp : profile.layers) {
      if (lp.layer != layer) continue;
      for (std::size_t i : lp.up) z[i] += beta;
      for (std::size_t i : lp.down) z[i] /= alpha;
    }
  };
}

struct RepairRecord {
  TokenId token = 0;
  std::vector<TokenId> before;
  std::vector<TokenId> after;
  bool repaired = false;
};

inline RepairRecord repair_forward(const TransformerModel& model, TokenId token, const NeuronProfile& profile,
                                   const AdjustmentFactors& f, std::size_t echo_budget = kDefaultEchoBudget) {
  const MlpPatch patch = make_patch(profile, f);
  const std::vector<TokenId> prompt = build_repetition_prompt(token, model.tokens.prompt);
  RepairRecord r;
  r.token = token;
  r.before = greedy_decode(model, prompt, echo_budget);
  r.after = greedy_decode(model, prompt, echo_budget, &patch);
  r.repaired = echo_contains(r.after, token);
  return r;
}

struct RepairReport {
  std::string method;  // "adaptive" or "rule_based"
  AdjustmentFactors factors;
  std::vector<RepairRecord> records;
  std::size_t repaired_tokens = 0;
  std::size_t total_glitch = 0;
  std::optional<double> repair_rate;  // empty when G is empty
};

inline RepairReport repair_all(const TransformerModel& model, std::span<const TokenId> glitch_set,
                               const NeuronProfile& profile, const AdjustmentFactors& f,
                               std::size_t workers = 0, std::size_t echo_budget = kDefaultEchoBudget) {
  RepairReport r;
  r.factors = f;
  r.total_glitch = glitch_set.size();
  r.records.resize(glitch_set.size());
  parallel_for(glitch_set.size(), workers,
               [&](std::size_t i) { r.records[i] = repair_forward(model, glitch_set[i], profile, f, echo_budget); });
  for (const auto& rec : r.records) r.repaired_tokens += rec.repaired;
  if (r.total_glitch > 0)
    r.repair_rate = static_cast<double>(r.repaired_tokens) / static_cast<double>(r.total_glitch);
  return r;
}

/// Z~ for a gamma-rate sample of G (at least one token), in profile layer order.
inline std::vector<std::vector<Eigen::VectorXd>> sample_glitch_activations(
    const TransformerModel& model, std::span<const TokenId> glitch_set, double gamma, const KeyLayerSet& key_layers,
    std::uint64_t rng_seed, std::size_t workers = 0, std::vector<TokenId>* sampled = nullptr) {
  if (glitch_set.empty()) throw std::invalid_argument("glitch sample: empty glitch set");
  std::vector<TokenId> pool(glitch_set.begin(), glitch_set.end());
  std::sort(pool.begin(), pool.end());
  const auto k = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(pool.size()) - 1e-9));
  Rng rng(rng_seed);
  const std::vector<TokenId> sample = sample_without_replacement(pool, std::clamp<std::size_t>(k, 1, pool.size()), rng);
  const auto traces = extract_all(model, sample, key_layers, kMlpSites, workers);
  std::vector<std::vector<Eigen::VectorXd>> acts;
  for (const auto& t : traces) acts.push_back(gated_activations(t, key_layers.layers));
  if (sampled) *sampled = sample;
  return acts;
}

}  // namespace glitchlab
