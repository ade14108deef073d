#pragma once

// Glitch-vs-normal distribution diagnostics: attention-value histograms,
// 2-D PCA scatter of MLP status, per-layer Wasserstein-1 profile.

#include <cstdio>
#include <ostream>

#include "glitchlab/features.hpp"
#include "glitchlab/pca.hpp"

namespace glitchlab {

inline constexpr double kDefaultBinWidth = 0.02;

/// Exact W1 between two empirical distributions: the integral of
/// |F_a(t) - F_b(t)| over the merged support.
inline double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein_1d: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  for (double v : sa)
    if (!std::isfinite(v)) throw NumericError("wasserstein_1d: non-finite sample");
  for (double v : sb)
    if (!std::isfinite(v)) throw NumericError("wasserstein_1d: non-finite sample");
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double prev = std::min(sa.front(), sb.front());
  double total = 0;
  while (i < sa.size() || j < sb.size()) {
    const double next = (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j])) ? sa[i] : sb[j];
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - prev);
    while (i < sa.size() && sa[i] == next) ++i;
    while (j < sb.size() && sb[j] == next) ++j;
    prev = next;
  }
  return total;
}

enum class Population : std::uint8_t { glitch, normal };

inline std::string_view to_string(Population p) { return p == Population::glitch ? "glitch" : "normal"; }

struct Histogram {
  std::vector<double> bin_edges;
  std::vector<std::size_t> counts;
  Population population = Population::normal;
};

/// Bins on [0, 1]; the last bin is closed on the right.
inline Histogram make_histogram(std::span<const double> values, double bin_width, Population pop) {
  if (!(bin_width > 0 && bin_width <= 1)) throw std::invalid_argument("histogram: bin_width must lie in (0, 1]");
  const auto bins = static_cast<std::size_t>(std::ceil(1.0 / bin_width - 1e-9));
  Histogram h;
  h.population = pop;
  for (std::size_t i = 0; i <= bins; ++i) h.bin_edges.push_back(std::min(1.0, static_cast<double>(i) * bin_width));
  h.counts.assign(bins, 0);
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("histogram: value outside [0, 1]");
    const auto b = std::min(bins - 1, static_cast<std::size_t>(v / bin_width));
    ++h.counts[b];
  }
  return h;
}

/// Every value of `site` across all layers of all traces.
inline std::vector<double> pooled_values(std::span<const ActivationTrace> traces, Site site) {
  std::vector<double> out;
  for (const auto& t : traces) {
    bool found = false;
    for (const auto& s : t.layout.slots) {
      if (s.site != site) continue;
      found = true;
      for (std::size_t k = 0; k < s.length; ++k) out.push_back(t.values[s.offset + k]);
    }
    if (!found) throw std::invalid_argument("diagnostics: trace lacks site " + std::string(to_string(site)));
  }
  return out;
}

struct AttentionHistograms {
  Histogram glitch, normal;
  double wasserstein = 0;  // between the underlying pooled samples
};

inline AttentionHistograms attention_histograms(std::span<const ActivationTrace> glitch,
                                                std::span<const ActivationTrace> normal,
                                                double bin_width = kDefaultBinWidth) {
  const auto g = pooled_values(glitch, Site::attn_pattern);
  const auto n = pooled_values(normal, Site::attn_pattern);
  return {make_histogram(g, bin_width, Population::glitch), make_histogram(n, bin_width, Population::normal),
          wasserstein_1d(g, n)};
}

struct ScatterPoint {
  TokenId token;
  Population population;
  double x, y;
};

inline std::vector<ScatterPoint> mlp_scatter(std::span<const ActivationTrace> glitch,
                                             std::span<const ActivationTrace> normal, Site site) {
  if (site == Site::attn_pattern) throw std::invalid_argument("mlp_scatter: site must be mlp_gate or mlp_data");
  if (glitch.size() + normal.size() < 3) throw std::invalid_argument("mlp_scatter: need at least 3 points");
  std::vector<ActivationTrace> pooled;
  const Site one[] = {site};
  for (const auto& t : glitch) pooled.push_back(select_sites(t, one));
  for (const auto& t : normal) pooled.push_back(select_sites(t, one));
  const FeatureMatrix fm = assemble_matrix(pooled);
  if (fm.cols() < 2) throw std::invalid_argument("mlp_scatter: need at least 2 feature columns");
  const Eigen::MatrixXd xy = pca_transform(pca_fit(fm.data, 2), fm.data);
  std::vector<ScatterPoint> out;
  for (std::size_t i = 0; i < pooled.size(); ++i)
    out.push_back({pooled[i].token, i < glitch.size() ? Population::glitch : Population::normal,
                   xy(static_cast<Eigen::Index>(i), 0), xy(static_cast<Eigen::Index>(i), 1)});
  return out;
}

/// Mean Euclidean distance to the population centroid.
inline double cluster_spread(std::span<const ScatterPoint> pts, Population pop) {
  double cx = 0, cy = 0;
  std::size_t n = 0;
  for (const auto& p : pts)
    if (p.population == pop) cx += p.x, cy += p.y, ++n;
  if (n == 0) throw std::invalid_argument("cluster_spread: empty population");
  cx /= static_cast<double>(n);
  cy /= static_cast<double>(n);
  double sum = 0;
  for (const auto& p : pts)
    if (p.population == pop) sum += std::hypot(p.x - cx, p.y - cy);
  return sum / static_cast<double>(n);
}

struct LayerDistance {
  std::size_t layer;
  Site site;
  double distance;
};

struct LayerDistanceProfile {
  std::size_t n_layers = 0;
  std::vector<LayerDistance> entries;  // layer-major, site order
  std::vector<std::size_t> suggested;  // suggested key layers

  /// Mean over sites of the per-site distance.
  std::vector<double> per_layer() const {
    std::vector<double> sum(n_layers, 0.0);
    std::vector<std::size_t> cnt(n_layers, 0);
    for (const auto& e : entries) sum[e.layer] += e.distance, ++cnt[e.layer];
    for (std::size_t l = 0; l < n_layers; ++l) sum[l] = cnt[l] ? sum[l] / static_cast<double>(cnt[l]) : 0.0;
    return sum;
  }
};

/// Linear-interpolation percentile, q in [0, 1].
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("percentile: empty input");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Layers whose pooled distance exceeds the 70th percentile, skipping the
/// layers nearest the output (3, or a quarter of the depth for shallow
/// models). Falls back to the strongest eligible layer.
inline std::vector<std::size_t> suggest_key_layers(std::span<const double> per_layer) {
  const std::size_t n = per_layer.size();
  if (n == 0) return {};
  const std::size_t tail = std::min<std::size_t>(3, n / 4);
  const std::size_t eligible = n - tail;
  const double cut = percentile({per_layer.begin(), per_layer.end()}, 0.7);
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < eligible; ++l)
    if (per_layer[l] > cut) out.push_back(l);
  if (out.empty() && eligible > 0) {
    std::size_t best = 0;
    for (std::size_t l = 1; l < eligible; ++l)
      if (per_layer[l] > per_layer[best]) best = l;
    if (per_layer[best] > 0) out.push_back(best);
  }
  return out;
}

inline LayerDistanceProfile layer_profile_from_traces(std::span<const ActivationTrace> glitch,
                                                      std::span<const ActivationTrace> normal,
                                                      std::size_t n_layers) {
  if (glitch.empty() || normal.empty()) throw std::invalid_argument("layer_profile: sets must be non-empty");
  LayerDistanceProfile p;
  p.n_layers = n_layers;
  for (const auto& slot : glitch.front().layout.slots) {
    std::vector<double> g, nv;
    for (const auto& t : glitch)
      for (float v : t.segment(slot.layer, slot.site)) g.push_back(v);
    for (const auto& t : normal)
      for (float v : t.segment(slot.layer, slot.site)) nv.push_back(v);
    p.entries.push_back({slot.layer, slot.site, wasserstein_1d(g, nv)});
  }
  p.suggested = suggest_key_layers(p.per_layer());
  return p;
}

/// W1 per (layer, site) over every layer of the model.
inline LayerDistanceProfile layer_profile(const TransformerModel& model, std::span<const TokenId> glitch_set,
                                          std::span<const TokenId> normal_set, std::size_t workers = 0) {
  if (glitch_set.empty() || normal_set.empty()) throw std::invalid_argument("layer_profile: sets must be non-empty");
  std::vector<std::size_t> all(model.config.n_layers);
  for (std::size_t l = 0; l < all.size(); ++l) all[l] = l;
  const KeyLayerSet layers = KeyLayerSet::explicit_layers(all, model.config.n_layers);
  const auto g = extract_all(model, glitch_set, layers, kAllSites, workers);
  const auto n = extract_all(model, normal_set, layers, kAllSites, workers);
  return layer_profile_from_traces(g, n, model.config.n_layers);
}

// ---------------------------------------------------------------------------
// CSV output

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline void write_histogram_csv(std::ostream& os, const AttentionHistograms& h) {
  os << "population,bin_lo,bin_hi,count\n";
  for (const Histogram* hist : {&h.glitch, &h.normal})
    for (std::size_t i = 0; i < hist->counts.size(); ++i)
      os << to_string(hist->population) << ',' << format_real(hist->bin_edges[i]) << ','
         << format_real(hist->bin_edges[i + 1]) << ',' << hist->counts[i] << '\n';
}

inline void write_scatter_csv(std::ostream& os, std::span<const ScatterPoint> pts) {
  os << "token,population,x,y\n";
  for (const auto& p : pts)
    os << p.token << ',' << to_string(p.population) << ',' << format_real(p.x) << ',' << format_real(p.y) << '\n';
}

inline void write_layer_profile_csv(std::ostream& os, const LayerDistanceProfile& p) {
  os << "layer,site,wasserstein1,suggested\n";
  for (const auto& e : p.entries) {
    const bool s = std::find(p.suggested.begin(), p.suggested.end(), e.layer) != p.suggested.end();
    os << e.layer << ',' << to_string(e.site) << ',' << format_real(e.distance) << ',' << (s ? 1 : 0) << '\n';
  }
}

}  // namespace glitchlab
