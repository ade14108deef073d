#pragma once

// Sample -> label -> reduce -> train -> scan -> validate, plus the exhaustive
// and rule-based baselines and the feature/SVM sweep.

#include <cctype>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <unordered_map>
#include <unordered_set>

#include "glitchlab/features.hpp"
#include "glitchlab/pca.hpp"
#include "glitchlab/svm.hpp"

namespace glitchlab {

inline constexpr double kDefaultGamma = 0.1;

struct DetectionConfig {
  double gamma = kDefaultGamma;
  std::size_t pca_dim = kDefaultPcaDim;
  KeyLayerSet key_layers;
  std::vector<Site> sites{std::begin(kAllSites), std::end(kAllSites)};
  SvmParams svm;
  std::uint64_t rng_seed = 0;
  bool post_validate = true;
  std::size_t workers = 0;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("detect: gamma must lie in (0, 1]");
    if (pca_dim == 0) throw std::invalid_argument("detect: pca_dim must be positive");
    if (sites.empty()) throw std::invalid_argument("detect: feature sites must be non-empty");
    if (key_layers.layers.empty()) throw std::invalid_argument("detect: key layers must be non-empty");
    svm.validate();
  }

  /// Soft range checks; returned as warnings rather than errors.
  std::vector<std::string> advisories() const {
    std::vector<std::string> w;
    if (gamma < 0.1 || gamma > 0.3) w.push_back("gamma outside the recommended band [0.1, 0.3]");
    if (pca_dim < 50 || pca_dim > 200) w.push_back("pca_dim outside the recommended band [50, 200]");
    return w;
  }
};

/// What detection needs from the outside world. `oracle` may be empty
/// (trace-only mode), in which case sampled tokens take `stored_label`.
struct DetectionSource {
  std::vector<TokenId> vocabulary;                              // sorted, unique
  std::function<ActivationTrace(TokenId)> features;             // thread-safe
  std::function<Label(TokenId)> oracle;                         // thread-safe, may be empty
  std::function<std::optional<Label>(TokenId)> stored_label;    // may be empty
};

inline DetectionSource model_source(const TransformerModel& model, const KeyLayerSet& key_layers,
                                    std::vector<Site> sites, std::size_t echo_budget = kDefaultEchoBudget) {
  DetectionSource s;
  s.vocabulary.resize(model.config.vocab_size);
  for (std::size_t i = 0; i < s.vocabulary.size(); ++i) s.vocabulary[i] = static_cast<TokenId>(i);
  s.features = [&model, key_layers, sites = std::move(sites)](TokenId t) {
    return extract_features(model, t, key_layers, sites);
  };
  s.oracle = [&model, echo_budget](TokenId t) { return classify_token(model, t, echo_budget).label; };
  return s;
}

/// Precomputed traces and verdicts; features are narrowed to `sites`.
/// Used by the sweep so every cell sees the same oracle without re-decoding.
inline DetectionSource cached_source(std::span<const ActivationTrace> traces,
                                     std::span<const OracleVerdict> verdicts, std::vector<Site> sites) {
  auto by_token = std::make_shared<std::unordered_map<TokenId, const ActivationTrace*>>();
  for (const auto& t : traces) by_token->emplace(t.token, &t);
  auto labels = std::make_shared<std::unordered_map<TokenId, Label>>();
  for (const auto& v : verdicts) labels->emplace(v.token, v.label);
  DetectionSource s;
  for (const auto& t : traces) s.vocabulary.push_back(t.token);
  std::sort(s.vocabulary.begin(), s.vocabulary.end());
  s.features = [by_token, sites = std::move(sites)](TokenId t) { return select_sites(*by_token->at(t), sites); };
  s.oracle = [labels](TokenId t) { return labels->at(t); };
  return s;
}

/// Trace-file source: labels come from the file, no oracle.
inline DetectionSource trace_source(std::span<const ActivationTrace> traces, std::vector<Site> sites) {
  auto by_token = std::make_shared<std::unordered_map<TokenId, const ActivationTrace*>>();
  for (const auto& t : traces) by_token->emplace(t.token, &t);
  DetectionSource s;
  for (const auto& t : traces) s.vocabulary.push_back(t.token);
  std::sort(s.vocabulary.begin(), s.vocabulary.end());
  if (std::adjacent_find(s.vocabulary.begin(), s.vocabulary.end()) != s.vocabulary.end())
    throw std::invalid_argument("trace source: duplicate token records");
  s.features = [by_token, sites = std::move(sites)](TokenId t) { return select_sites(*by_token->at(t), sites); };
  s.stored_label = [by_token](TokenId t) { return by_token->at(t)->label; };
  return s;
}

struct Metrics {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 1.0;  // vacuous 1 when nothing is predicted
  double recall = 1.0;     // vacuous 1 when nothing is to be found
  double f1 = 1.0;
};

/// TP = |predicted ∩ truth|. Both inputs sorted.
inline Metrics compute_metrics(std::span<const TokenId> predicted, std::span<const TokenId> truth) {
  Metrics m;
  std::vector<TokenId> inter;
  std::set_intersection(predicted.begin(), predicted.end(), truth.begin(), truth.end(), std::back_inserter(inter));
  m.tp = inter.size();
  m.fp = predicted.size() - m.tp;
  m.fn = truth.size() - m.tp;
  if (!predicted.empty()) m.precision = static_cast<double>(m.tp) / static_cast<double>(predicted.size());
  if (!truth.empty()) m.recall = static_cast<double>(m.tp) / static_cast<double>(truth.size());
  m.f1 = (m.precision + m.recall) > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

struct DetectionReport {
  std::string method;  // "sampled_svm", "exhaustive", "rule_based"
  std::size_t vocab_size = 0;
  std::vector<TokenId> glitch_set;       // G, sorted
  std::vector<TokenId> normal_set;       // N, sorted
  std::vector<TokenId> sampled;          // S in draw order
  std::vector<TokenId> predicted_glitch; // classifier positives among unsampled, sorted
  std::size_t oracle_calls = 0;
  std::size_t pca_dim_requested = 0;
  std::size_t pca_dim_used = 0;
  std::size_t feature_width = 0;
  bool validated = false;
  bool fallback = false;  // single-class sample: exhaustive scan used instead
  std::optional<Metrics> metrics;             // G vs ground truth
  std::optional<Metrics> unvalidated_metrics; // S-glitches ∪ classifier positives vs ground truth
  std::optional<PcaModel> pca;
  std::optional<SvmModel> svm;
  std::vector<std::string> warnings;
  std::map<std::string, double> timings;  // seconds per phase
};

namespace detect_detail {

class PhaseClock {
 public:
  explicit PhaseClock(std::map<std::string, double>& sink) : sink_(sink) {}
  void lap(const std::string& phase) {
    const auto now = std::chrono::steady_clock::now();
    sink_[phase] += std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }

 private:
  std::map<std::string, double>& sink_;
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline std::size_t sample_size(double gamma, std::size_t n) {
  const double k = std::ceil(gamma * static_cast<double>(n) - 1e-9);
  return std::min(n, static_cast<std::size_t>(std::max(0.0, k)));
}

inline void finish_partition(DetectionReport& r, const std::vector<TokenId>& vocab) {
  std::sort(r.glitch_set.begin(), r.glitch_set.end());
  std::set_difference(vocab.begin(), vocab.end(), r.glitch_set.begin(), r.glitch_set.end(),
                      std::back_inserter(r.normal_set));
}

}  // namespace detect_detail

inline DetectionReport detect(const DetectionSource& src, const DetectionConfig& cfg,
                              std::optional<std::span<const TokenId>> ground_truth = std::nullopt) {
  using detect_detail::PhaseClock;
  cfg.validate();
  if (src.vocabulary.empty()) throw std::invalid_argument("detect: empty vocabulary");
  if (!std::is_sorted(src.vocabulary.begin(), src.vocabulary.end()))
    throw std::invalid_argument("detect: vocabulary must be sorted");
  if (!src.features) throw std::invalid_argument("detect: feature source missing");
  if (!src.oracle && !src.stored_label) throw std::invalid_argument("detect: need an oracle or stored labels");

  DetectionReport r;
  r.method = "sampled_svm";
  r.vocab_size = src.vocabulary.size();
  r.pca_dim_requested = cfg.pca_dim;
  r.warnings = cfg.advisories();
  r.validated = cfg.post_validate && static_cast<bool>(src.oracle);
  if (cfg.post_validate && !src.oracle) r.warnings.push_back("no oracle: post-validation skipped, precision is not guaranteed");
  PhaseClock clock(r.timings);

  // Sample.
  Rng rng(cfg.rng_seed);
  const std::size_t k = detect_detail::sample_size(cfg.gamma, src.vocabulary.size());
  r.sampled = sample_without_replacement(src.vocabulary, k, rng);
  clock.lap("sample");

  // Label the sample.
  std::vector<Label> labels(k);
  if (src.oracle) {
    parallel_for(k, cfg.workers, [&](std::size_t i) { labels[i] = src.oracle(r.sampled[i]); });
    r.oracle_calls += k;
  } else {
    for (std::size_t i = 0; i < k; ++i) {
      const auto l = src.stored_label(r.sampled[i]);
      if (!l) throw std::invalid_argument("detect: sampled token " + std::to_string(r.sampled[i]) + " has no label");
      labels[i] = *l;
    }
  }
  std::vector<TokenId> sample_glitch;
  for (std::size_t i = 0; i < k; ++i)
    if (labels[i] == Label::Glitch) sample_glitch.push_back(r.sampled[i]);
  r.glitch_set = sample_glitch;
  clock.lap("label");

  std::vector<TokenId> unsampled;
  {
    std::vector<TokenId> s_sorted = r.sampled;
    std::sort(s_sorted.begin(), s_sorted.end());
    std::set_difference(src.vocabulary.begin(), src.vocabulary.end(), s_sorted.begin(), s_sorted.end(),
                        std::back_inserter(unsampled));
  }

  const bool single_class = sample_glitch.empty() || sample_glitch.size() == k;
  if (single_class) {
    if (!src.oracle) throw DegenerateDataError("detect: single-class sample and no oracle for the fallback scan");
    r.fallback = true;
    r.warnings.push_back("single-class sample: fell back to exhaustive oracle scan");
    std::vector<Label> rest(unsampled.size());
    parallel_for(unsampled.size(), cfg.workers, [&](std::size_t i) { rest[i] = src.oracle(unsampled[i]); });
    r.oracle_calls += unsampled.size();
    for (std::size_t i = 0; i < unsampled.size(); ++i)
      if (rest[i] == Label::Glitch) r.glitch_set.push_back(unsampled[i]);
    r.validated = true;
    clock.lap("fallback_scan");
  } else {
    // Reduce and train.
    std::vector<ActivationTrace> traces(k);
    parallel_for(k, cfg.workers, [&](std::size_t i) { traces[i] = src.features(r.sampled[i]); });
    const FeatureMatrix fm = assemble_matrix(traces);
    r.feature_width = fm.cols();
    clock.lap("features");
    r.pca_dim_used = std::min({cfg.pca_dim, fm.rows() - 1, fm.cols()});
    if (r.pca_dim_used < cfg.pca_dim)
      r.warnings.push_back("pca_dim reduced to " + std::to_string(r.pca_dim_used) + " (sample rows - 1 or feature width)");
    r.pca = pca_fit(fm.data, r.pca_dim_used);
    const Eigen::MatrixXd reduced = pca_transform(*r.pca, fm.data);
    r.svm = svm_train(reduced, labels, cfg.svm);
    if (!r.svm->converged) r.warnings.push_back("svm: iteration cap reached before convergence");
    clock.lap("fit");

    // Scan.
    std::vector<char> positive(unsampled.size(), 0);
    parallel_for(unsampled.size(), cfg.workers, [&](std::size_t i) {
      const ActivationTrace t = src.features(unsampled[i]);
      if (!(t.layout == fm.layout)) throw std::invalid_argument("detect: trace layout differs from the sample");
      positive[i] = svm_predict(*r.svm, pca_transform(*r.pca, to_vector(t))).label == Label::Glitch;
    });
    for (std::size_t i = 0; i < unsampled.size(); ++i)
      if (positive[i]) r.predicted_glitch.push_back(unsampled[i]);
    clock.lap("scan");

    // Validate.
    if (r.validated) {
      std::vector<Label> confirm(r.predicted_glitch.size());
      parallel_for(confirm.size(), cfg.workers, [&](std::size_t i) { confirm[i] = src.oracle(r.predicted_glitch[i]); });
      r.oracle_calls += confirm.size();
      for (std::size_t i = 0; i < confirm.size(); ++i)
        if (confirm[i] == Label::Glitch) r.glitch_set.push_back(r.predicted_glitch[i]);
    } else {
      r.glitch_set.insert(r.glitch_set.end(), r.predicted_glitch.begin(), r.predicted_glitch.end());
    }
    clock.lap("validate");
  }

  detect_detail::finish_partition(r, src.vocabulary);
  if (ground_truth) {
    r.metrics = compute_metrics(r.glitch_set, *ground_truth);
    std::vector<TokenId> raw = sample_glitch;
    raw.insert(raw.end(), r.predicted_glitch.begin(), r.predicted_glitch.end());
    if (r.fallback) raw = r.glitch_set;
    std::sort(raw.begin(), raw.end());
    r.unvalidated_metrics = compute_metrics(raw, *ground_truth);
  }
  return r;
}

/// Every token through the oracle.
inline DetectionReport exhaustive_scan(const TransformerModel& model, std::size_t workers = 0,
                                       std::size_t echo_budget = kDefaultEchoBudget,
                                       std::vector<OracleVerdict>* verdicts_out = nullptr) {
  DetectionReport r;
  r.method = "exhaustive";
  r.vocab_size = model.config.vocab_size;
  r.validated = true;
  detect_detail::PhaseClock clock(r.timings);
  std::vector<TokenId> vocab(model.config.vocab_size);
  for (std::size_t i = 0; i < vocab.size(); ++i) vocab[i] = static_cast<TokenId>(i);
  std::vector<OracleVerdict> verdicts = classify_tokens(model, vocab, workers, echo_budget);
  r.oracle_calls = vocab.size();
  r.glitch_set = glitch_ids(verdicts);
  detect_detail::finish_partition(r, vocab);
  r.metrics = compute_metrics(r.glitch_set, r.glitch_set);
  if (verdicts_out) *verdicts_out = std::move(verdicts);
  clock.lap("scan");
  return r;
}

/// Common English function words (lower case). Not any particular toolkit's list.
inline const std::vector<std::string>& default_stopwords() {
  static const std::vector<std::string> words = {
      "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as", "at",
      "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could",
      "did", "do", "does", "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has",
      "have", "having", "he", "her", "here", "hers", "him", "his", "how", "i", "if", "in", "into", "is", "it",
      "its", "just", "me", "more", "most", "my", "no", "nor", "not", "now", "of", "off", "on", "once", "only",
      "or", "other", "our", "ours", "out", "over", "own", "same", "she", "should", "so", "some", "such",
      "than", "that", "the", "their", "them", "then", "there", "these", "they", "this", "those", "through",
      "to", "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
      "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours"};
  return words;
}

/// Sample half the vocabulary, drop stopwords, call the rest glitches.
inline DetectionReport rule_based_baseline(std::size_t vocab_size, std::span<const std::string> display,
                                           std::span<const std::string> stopwords, std::uint64_t rng_seed,
                                           std::optional<std::span<const TokenId>> ground_truth = std::nullopt) {
  if (display.size() != vocab_size) throw std::invalid_argument("rule_based_baseline: display strings required");
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  };
  std::unordered_set<std::string> stop;
  for (const auto& w : stopwords) stop.insert(lower(w));

  DetectionReport r;
  r.method = "rule_based";
  r.vocab_size = vocab_size;
  std::vector<TokenId> vocab(vocab_size);
  for (std::size_t i = 0; i < vocab.size(); ++i) vocab[i] = static_cast<TokenId>(i);
  Rng rng(rng_seed);
  r.sampled = sample_without_replacement(vocab, vocab_size / 2, rng);
  for (TokenId t : r.sampled)
    if (!stop.contains(lower(display[t]))) r.glitch_set.push_back(t);
  detect_detail::finish_partition(r, vocab);
  r.predicted_glitch = r.glitch_set;
  if (ground_truth) r.metrics = compute_metrics(r.glitch_set, *ground_truth);
  return r;
}

// ---------------------------------------------------------------------------
// Sweep over feature-site combinations and SVM settings.

struct SweepCell {
  std::vector<Site> sites;
  double C = 1.0;
  int degree = 3;
};

struct SweepRow {
  SweepCell cell;
  Metrics validated;
  Metrics unvalidated;
  std::size_t oracle_calls = 0;
  std::size_t pca_dim_used = 0;
  bool fallback = false;
};

/// All non-empty site subsets in a fixed order: singles, pairs, all three.
inline std::vector<std::vector<Site>> site_combinations() {
  using S = Site;
  return {{S::attn_pattern}, {S::mlp_gate}, {S::mlp_data},
          {S::attn_pattern, S::mlp_gate}, {S::attn_pattern, S::mlp_data}, {S::mlp_gate, S::mlp_data},
          {S::attn_pattern, S::mlp_gate, S::mlp_data}};
}

/// The (C, degree) settings of the published study crossed with every site subset.
inline std::vector<SweepCell> default_sweep_grid() {
  const std::pair<double, int> svm_settings[] = {{0.1, 2}, {0.5, 2}, {0.5, 3}, {1.0, 3}};
  std::vector<SweepCell> grid;
  for (const auto& [c, deg] : svm_settings)
    for (auto& sites : site_combinations()) grid.push_back({sites, c, deg});
  return grid;
}

/// One detection per cell over cached all-site traces and oracle verdicts.
inline std::vector<SweepRow> sweep(std::span<const ActivationTrace> traces, std::span<const OracleVerdict> verdicts,
                                   const DetectionConfig& base, std::span<const SweepCell> grid) {
  if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
  const std::vector<TokenId> truth = glitch_ids(verdicts);
  std::vector<SweepRow> rows;
  for (const auto& cell : grid) {
    DetectionConfig cfg = base;
    cfg.sites = canonical_sites(cell.sites);
    cfg.svm.C = cell.C;
    cfg.svm.degree = cell.degree;
    const DetectionSource src = cached_source(traces, verdicts, cfg.sites);
    const DetectionReport r = detect(src, cfg, std::span<const TokenId>(truth));
    rows.push_back({{cfg.sites, cell.C, cell.degree}, *r.metrics, *r.unvalidated_metrics, r.oracle_calls,
                    r.pca_dim_used, r.fallback});
  }
  return rows;
}

}  // namespace glitchlab
