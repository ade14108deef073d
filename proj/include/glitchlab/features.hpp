#pragma once

// Activation traces: per-token feature vectors gathered at the last prompt
// position, laid out layer-major and then in site order
// (attn_pattern, mlp_gate, mlp_data).

#include <cmath>

#include "glitchlab/oracle.hpp"

namespace glitchlab {

struct KeyLayerSet {
  enum class Rule : std::uint8_t { explicit_list, downstream_band };

  std::vector<std::size_t> layers;  // sorted, unique
  Rule rule = Rule::explicit_list;

  static KeyLayerSet explicit_layers(std::vector<std::size_t> layers, std::size_t n_layers) {
    std::sort(layers.begin(), layers.end());
    layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
    KeyLayerSet k{std::move(layers), Rule::explicit_list};
    k.validate(n_layers);
    return k;
  }

  /// Proportional version of the 19..28-of-32 band used on Llama-2-7b: starts
  /// in the downstream half and stops short of the output layers.
  static KeyLayerSet downstream_band(std::size_t n_layers) {
    if (n_layers == 0) throw std::invalid_argument("downstream_band: no layers");
    const auto at = [&](double frac) {
      return static_cast<std::size_t>(std::lround(frac * static_cast<double>(n_layers)));
    };
    std::size_t first = std::min(at(19.0 / 32.0), n_layers - 1);
    std::size_t last = std::clamp(at(28.0 / 32.0), first, n_layers - 1);
    KeyLayerSet k;
    k.rule = Rule::downstream_band;
    for (std::size_t l = first; l <= last; ++l) k.layers.push_back(l);
    return k;
  }

  void validate(std::size_t n_layers) const {
    if (layers.empty()) throw std::invalid_argument("key layers: empty set");
    for (std::size_t l : layers)
      if (l >= n_layers) throw std::invalid_argument("key layers: index out of range");
  }

  friend bool operator==(const KeyLayerSet&, const KeyLayerSet&) = default;
};

struct SiteSlot {
  std::size_t layer;
  Site site;
  std::size_t offset;
  std::size_t length;
  friend bool operator==(const SiteSlot&, const SiteSlot&) = default;
};

struct SiteLayout {
  std::vector<SiteSlot> slots;

  std::size_t width() const { return slots.empty() ? 0 : slots.back().offset + slots.back().length; }

  const SiteSlot* find(std::size_t layer, Site site) const {
    for (const auto& s : slots)
      if (s.layer == layer && s.site == site) return &s;
    return nullptr;
  }

  std::vector<Site> sites() const {
    std::vector<Site> out;
    for (const auto& s : slots) out.push_back(s.site);
    return canonical_sites(std::move(out));
  }

  std::vector<std::size_t> layers() const {
    std::vector<std::size_t> out;
    for (const auto& s : slots) out.push_back(s.layer);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Offsets are contiguous and start at 0.
  void validate() const {
    std::size_t expect = 0;
    for (const auto& s : slots) {
      if (s.offset != expect) throw std::invalid_argument("site layout: offsets must partition [0, width)");
      expect += s.length;
    }
  }

  friend bool operator==(const SiteLayout&, const SiteLayout&) = default;
};

inline std::size_t site_length(Site site, const ModelConfig& cfg, std::size_t prompt_len) {
  return site == Site::attn_pattern ? prompt_len * cfg.n_heads : cfg.d_gate();
}

inline SiteLayout make_layout(const KeyLayerSet& key_layers, std::span<const Site> sites,
                              const ModelConfig& cfg, std::size_t prompt_len) {
  key_layers.validate(cfg.n_layers);
  if (sites.empty()) throw std::invalid_argument("feature sites: empty set");
  const std::vector<Site> ordered = canonical_sites({sites.begin(), sites.end()});
  SiteLayout layout;
  std::size_t offset = 0;
  for (std::size_t l : key_layers.layers)
    for (Site s : ordered) {
      const std::size_t len = site_length(s, cfg, prompt_len);
      layout.slots.push_back({l, s, offset, len});
      offset += len;
    }
  return layout;
}

struct ActivationTrace {
  TokenId token = 0;
  std::optional<Label> label;
  SiteLayout layout;
  std::vector<float> values;

  std::span<const float> segment(std::size_t layer, Site site) const {
    const SiteSlot* s = layout.find(layer, site);
    if (!s) throw std::invalid_argument("trace: missing site " + std::string(to_string(site)) +
                                        " at layer " + std::to_string(layer));
    return std::span<const float>(values).subspan(s->offset, s->length);
  }

  friend bool operator==(const ActivationTrace&, const ActivationTrace&) = default;
};

inline ActivationTrace extract_features(const TransformerModel& model, TokenId token,
                                        const KeyLayerSet& key_layers, std::span<const Site> sites) {
  const std::vector<TokenId> prompt = build_repetition_prompt(token, model.tokens.prompt);
  ActivationTrace trace;
  trace.token = token;
  trace.layout = make_layout(key_layers, sites, model.config, prompt.size());
  std::vector<HookPoint> hooks;
  for (const auto& s : trace.layout.slots) hooks.push_back({s.layer, s.site});
  const std::vector<HookCapture> caps = capture_last(model, prompt, hooks);
  trace.values.resize(trace.layout.width());
  for (const auto& slot : trace.layout.slots) {
    auto it = std::find_if(caps.begin(), caps.end(), [&](const HookCapture& c) {
      return c.layer == slot.layer && c.site == slot.site;
    });
    if (it == caps.end() || it->values.size() != slot.length)
      throw std::logic_error("extract_features: capture does not match layout");
    std::transform(it->values.begin(), it->values.end(), trace.values.begin() + static_cast<std::ptrdiff_t>(slot.offset),
                   [](double v) { return static_cast<float>(v); });
  }
  return trace;
}

inline std::vector<ActivationTrace> extract_all(const TransformerModel& model,
                                                std::span<const TokenId> tokens,
                                                const KeyLayerSet& key_layers,
                                                std::span<const Site> sites, std::size_t workers = 0) {
  std::vector<ActivationTrace> out(tokens.size());
  parallel_for(tokens.size(), workers, [&](std::size_t i) {
    out[i] = extract_features(model, tokens[i], key_layers, sites);
  });
  return out;
}

/// Restricts a trace to a subset of its sites (same layers), re-packing offsets.
inline ActivationTrace select_sites(const ActivationTrace& trace, std::span<const Site> sites) {
  const std::vector<Site> wanted = canonical_sites({sites.begin(), sites.end()});
  if (wanted.empty()) throw std::invalid_argument("select_sites: empty site set");
  ActivationTrace out;
  out.token = trace.token;
  out.label = trace.label;
  std::size_t offset = 0;
  for (const auto& s : trace.layout.slots) {
    if (std::find(wanted.begin(), wanted.end(), s.site) == wanted.end()) continue;
    out.layout.slots.push_back({s.layer, s.site, offset, s.length});
    out.values.insert(out.values.end(), trace.values.begin() + static_cast<std::ptrdiff_t>(s.offset),
                      trace.values.begin() + static_cast<std::ptrdiff_t>(s.offset + s.length));
    offset += s.length;
  }
  for (Site w : wanted)
    if (std::none_of(out.layout.slots.begin(), out.layout.slots.end(),
                     [&](const SiteSlot& s) { return s.site == w; }))
      throw std::invalid_argument("select_sites: trace lacks site " + std::string(to_string(w)));
  return out;
}

struct FeatureMatrix {
  Eigen::MatrixXd data;          // rows = tokens
  std::vector<TokenId> tokens;   // row -> token id
  SiteLayout layout;

  std::size_t rows() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(data.cols()); }
};

inline FeatureMatrix assemble_matrix(std::span<const ActivationTrace> traces) {
  if (traces.empty()) throw std::invalid_argument("assemble_matrix: no traces");
  FeatureMatrix fm;
  fm.layout = traces.front().layout;
  const auto width = static_cast<Eigen::Index>(fm.layout.width());
  fm.data.resize(static_cast<Eigen::Index>(traces.size()), width);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& t = traces[i];
    if (!(t.layout == fm.layout) || t.values.size() != fm.layout.width())
      throw std::invalid_argument("assemble_matrix: heterogeneous trace layouts");
    for (Eigen::Index j = 0; j < width; ++j)
      fm.data(static_cast<Eigen::Index>(i), j) = static_cast<double>(t.values[static_cast<std::size_t>(j)]);
    fm.tokens.push_back(t.token);
  }
  return fm;
}

inline Eigen::VectorXd to_vector(const ActivationTrace& t) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(t.values.size()));
  for (std::size_t i = 0; i < t.values.size(); ++i) v[static_cast<Eigen::Index>(i)] = t.values[i];
  return v;
}

}  // namespace glitchlab
