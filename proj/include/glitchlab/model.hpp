#pragma once

// Minimal decoder-only transformer with per-layer hook points.
//
// Residual stream update per layer (no normalisation layers):
//   x += Attention(x)        A = softmax(Q K^T / sqrt(d_head)), causal
//   x += MLP(x)              Z = x U;  Z1, Z2 = first/second half of Z
//                            gated = act(Z1) * Z2;  out = gated W
//
// Every position is computed with vector-matrix products against a
// per-layer key/value cache, so a prefix is evaluated identically whether it
// is part of a longer prompt or extended token by token during decoding.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glitchlab/common.hpp"

namespace glitchlab {

enum class Activation : std::uint8_t { sigmoid, silu, gelu };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::silu: return "silu";
    case Activation::gelu: return "gelu";
  }
  return "?";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "silu") return Activation::silu;
  if (s == "gelu") return Activation::gelu;
  throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::silu: return x / (1.0 + std::exp(-x));
    case Activation::gelu: return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
  }
  return x;
}

struct ModelConfig {
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t d_model = 64;
  std::size_t d_mlp = 128;
  std::size_t vocab_size = 512;
  std::size_t max_positions = 32;
  Activation activation = Activation::sigmoid;
  std::uint64_t rng_seed = 0;

  std::size_t d_head() const { return d_model / n_heads; }
  std::size_t d_gate() const { return d_mlp / 2; }

  void validate() const {
    if (n_layers == 0 || n_heads == 0 || d_model == 0 || d_mlp == 0 || max_positions == 0)
      throw std::invalid_argument("model config: all dimensions must be positive");
    if (d_model % n_heads != 0)
      throw std::invalid_argument("model config: d_model must be divisible by n_heads");
    if (d_mlp % 2 != 0) throw std::invalid_argument("model config: d_mlp must be even");
    if (vocab_size < 2) throw std::invalid_argument("model config: vocab_size must be >= 2");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Marks the quoted-token position inside a prompt template.
inline constexpr TokenId kSlot = std::numeric_limits<TokenId>::max();

struct PromptTemplate {
  std::vector<TokenId> items;  // exactly one kSlot entry

  std::size_t slot() const {
    std::optional<std::size_t> pos;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i] != kSlot) continue;
      if (pos) throw std::invalid_argument("prompt template has more than one slot");
      pos = i;
    }
    if (!pos) throw std::invalid_argument("prompt template has no slot");
    return *pos;
  }
  std::size_t size() const { return items.size(); }

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

/// Token-level metadata that travels with a model: display strings are
/// optional (tokens are opaque ids), the template drives the repetition task.
struct TokenMetadata {
  std::vector<std::string> display;
  std::optional<TokenId> eos;
  PromptTemplate prompt;

  friend bool operator==(const TokenMetadata&, const TokenMetadata&) = default;
};

struct LayerWeights {
  Eigen::MatrixXd wq, wk, wv, wo;  // d_model x d_model, applied as x * W
  Eigen::MatrixXd up;              // d_model x d_mlp   (U)
  Eigen::MatrixXd down;            // d_mlp/2 x d_model (W)
};

struct TransformerModel {
  ModelConfig config;
  Eigen::MatrixXd token_embedding;     // vocab x d_model
  Eigen::MatrixXd position_embedding;  // max_positions x d_model
  std::vector<LayerWeights> layers;
  Eigen::MatrixXd unembedding;         // d_model x vocab
  std::optional<std::vector<TokenId>> planted_glitch_set;  // sorted
  TokenMetadata tokens;

  void validate() const {
    config.validate();
    const auto d = static_cast<Eigen::Index>(config.d_model);
    const auto v = static_cast<Eigen::Index>(config.vocab_size);
    auto check = [](const Eigen::MatrixXd& m, Eigen::Index r, Eigen::Index c, const char* name) {
      if (m.rows() != r || m.cols() != c)
        throw std::invalid_argument(std::string("model: bad shape for ") + name);
      if (!m.allFinite()) throw NumericError(std::string("model: non-finite weights in ") + name);
    };
    check(token_embedding, v, d, "token_embedding");
    check(position_embedding, static_cast<Eigen::Index>(config.max_positions), d,
          "position_embedding");
    check(unembedding, d, v, "unembedding");
    if (layers.size() != config.n_layers) throw std::invalid_argument("model: layer count mismatch");
    const auto dm = static_cast<Eigen::Index>(config.d_mlp);
    for (const auto& l : layers) {
      check(l.wq, d, d, "wq");
      check(l.wk, d, d, "wk");
      check(l.wv, d, d, "wv");
      check(l.wo, d, d, "wo");
      check(l.up, d, dm, "up");
      check(l.down, dm / 2, d, "down");
    }
    if (planted_glitch_set) {
      for (TokenId t : *planted_glitch_set)
        if (t >= config.vocab_size) throw std::invalid_argument("model: planted id out of range");
      if (!std::is_sorted(planted_glitch_set->begin(), planted_glitch_set->end()))
        throw std::invalid_argument("model: planted set must be sorted");
    }
    if (tokens.eos && *tokens.eos >= config.vocab_size)
      throw std::invalid_argument("model: eos id out of range");
    if (!tokens.display.empty() && tokens.display.size() != config.vocab_size)
      throw std::invalid_argument("model: display string count must equal vocab_size");
  }
};

// ---------------------------------------------------------------------------
// Primitive blocks

/// Numerically stable softmax over `scores` in place.
inline void softmax_inplace(std::span<double> scores) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericError("softmax: non-finite score");
    mx = std::max(mx, s);
  }
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - mx);
    sum += s;
  }
  for (double& s : scores) s /= sum;
}

/// A = softmax(Q K^T / sqrt(d)) with d = Q.cols(). Masked (future) entries
/// are exactly zero.
inline Eigen::MatrixXd attention_scores(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k,
                                        bool causal) {
  if (q.rows() != k.rows() || q.cols() != k.cols())
    throw std::invalid_argument("attention_scores: Q and K must have the same shape");
  if (!q.allFinite() || !k.allFinite()) throw NumericError("attention_scores: non-finite input");
  const Eigen::Index n = q.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> row;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index visible = causal ? i + 1 : n;
    row.assign(static_cast<std::size_t>(visible), 0.0);
    for (Eigen::Index j = 0; j < visible; ++j) row[j] = q.row(i).dot(k.row(j)) * scale;
    softmax_inplace(row);
    for (Eigen::Index j = 0; j < visible; ++j) a(i, j) = row[j];
  }
  return a;
}

/// Called with the gated product act(Z1)*Z2 of one layer at one position,
/// before the down projection. May edit values in place.
using MlpPatch = std::function<void(std::size_t layer, std::span<double> gated)>;

struct MlpRow {
  Eigen::VectorXd output, gate, data;
};

inline MlpRow mlp_row(const Eigen::VectorXd& y, const Eigen::MatrixXd& up,
                      const Eigen::MatrixXd& down, Activation act,
                      const std::function<void(std::span<double>)>& patch = {}) {
  if (up.cols() % 2 != 0) throw std::invalid_argument("mlp: d_mlp must be even");
  if (y.size() != up.rows() || down.rows() != up.cols() / 2)
    throw std::invalid_argument("mlp: inconsistent shapes");
  const Eigen::Index half = up.cols() / 2;
  const Eigen::VectorXd z = up.transpose() * y;
  MlpRow r;
  r.gate.resize(half);
  r.data = z.tail(half);
  Eigen::VectorXd gated(half);
  for (Eigen::Index i = 0; i < half; ++i) {
    r.gate[i] = activate(act, z[i]);
    gated[i] = r.gate[i] * r.data[i];
  }
  if (patch) patch(std::span<double>(gated.data(), static_cast<std::size_t>(half)));
  r.output = down.transpose() * gated;
  return r;
}

struct MlpBlockResult {
  Eigen::MatrixXd output, gate, data;
};

/// Row-wise gated MLP over Y (n x d_model).
inline MlpBlockResult mlp_block(const Eigen::MatrixXd& y, const Eigen::MatrixXd& up,
                                const Eigen::MatrixXd& down, Activation act) {
  if (up.cols() % 2 != 0) throw std::invalid_argument("mlp_block: d_mlp must be even");
  if (y.cols() != up.rows() || down.rows() != up.cols() / 2)
    throw std::invalid_argument("mlp_block: inconsistent shapes");
  MlpBlockResult out{Eigen::MatrixXd(y.rows(), down.cols()),
                     Eigen::MatrixXd(y.rows(), up.cols() / 2),
                     Eigen::MatrixXd(y.rows(), up.cols() / 2)};
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    MlpRow r = mlp_row(y.row(i).transpose(), up, down, act);
    out.output.row(i) = r.output.transpose();
    out.gate.row(i) = r.gate.transpose();
    out.data.row(i) = r.data.transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hooks

struct HookPoint {
  std::size_t layer;
  Site site;
  friend auto operator<=>(const HookPoint&, const HookPoint&) = default;
};

struct HookCapture {
  std::size_t layer;
  Site site;
  std::vector<double> values;
};

/// Options for one position step.
struct StepHooks {
  std::span<const HookPoint> capture;        // sites to record at this position
  std::vector<HookCapture>* captured = nullptr;
  const MlpPatch* patch = nullptr;           // applied to every layer at this position
};

/// Incremental evaluator holding the per-layer key/value cache of one
/// sequence. Cheap to create; never mutates the model.
class DecodeState {
 public:
  explicit DecodeState(const TransformerModel& model)
      : model_(&model),
        keys_(model.config.n_layers),
        values_(model.config.n_layers) {
    const auto p = static_cast<Eigen::Index>(model.config.max_positions);
    const auto d = static_cast<Eigen::Index>(model.config.d_model);
    for (std::size_t l = 0; l < model.config.n_layers; ++l) {
      keys_[l].resize(p, d);
      values_[l].resize(p, d);
    }
  }

  std::size_t length() const { return length_; }

  /// Appends one token and evaluates its position through every layer.
  void push(TokenId token, const StepHooks& hooks = {}) {
    const auto& cfg = model_->config;
    if (token >= cfg.vocab_size) throw std::invalid_argument("token id out of range");
    if (length_ >= cfg.max_positions)
      throw std::invalid_argument("sequence exceeds max_positions");
    const auto pos = static_cast<Eigen::Index>(length_);
    const auto dh = static_cast<Eigen::Index>(cfg.d_head());
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Eigen::VectorXd x = model_->token_embedding.row(token).transpose() +
                        model_->position_embedding.row(pos).transpose();
    std::vector<double> probs(length_ + 1);

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
      const LayerWeights& w = model_->layers[l];
      const Eigen::VectorXd q = w.wq.transpose() * x;
      keys_[l].row(pos) = (w.wk.transpose() * x).transpose();
      values_[l].row(pos) = (w.wv.transpose() * x).transpose();

      const bool want_attn = wants(hooks, l, Site::attn_pattern);
      std::vector<double> pattern;
      if (want_attn) pattern.reserve(cfg.n_heads * (length_ + 1));

      Eigen::VectorXd mixed = Eigen::VectorXd::Zero(x.size());
      for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        const auto off = static_cast<Eigen::Index>(h) * dh;
        for (Eigen::Index j = 0; j <= pos; ++j)
          probs[j] = q.segment(off, dh).dot(keys_[l].row(j).segment(off, dh)) * scale;
        softmax_inplace(probs);
        for (Eigen::Index j = 0; j <= pos; ++j)
          mixed.segment(off, dh) += probs[j] * values_[l].row(j).segment(off, dh).transpose();
        if (want_attn) pattern.insert(pattern.end(), probs.begin(), probs.end());
      }
      x += w.wo.transpose() * mixed;
      if (want_attn) hooks.captured->push_back({l, Site::attn_pattern, std::move(pattern)});

      std::function<void(std::span<double>)> patch;
      if (hooks.patch && *hooks.patch)
        patch = [&](std::span<double> g) { (*hooks.patch)(l, g); };
      MlpRow r = mlp_row(x, w.up, w.down, cfg.activation, patch);
      x += r.output;
      if (wants(hooks, l, Site::mlp_gate))
        hooks.captured->push_back({l, Site::mlp_gate, {r.gate.begin(), r.gate.end()}});
      if (wants(hooks, l, Site::mlp_data))
        hooks.captured->push_back({l, Site::mlp_data, {r.data.begin(), r.data.end()}});
    }
    residual_ = std::move(x);
    ++length_;
  }

  /// Next-token logits at the most recently pushed position.
  Eigen::VectorXd logits() const {
    if (length_ == 0) throw std::logic_error("logits requested on an empty sequence");
    Eigen::VectorXd out = model_->unembedding.transpose() * residual_;
    if (!out.allFinite()) throw NumericError("non-finite logits");
    return out;
  }

 private:
  static bool wants(const StepHooks& hooks, std::size_t layer, Site site) {
    if (!hooks.captured) return false;
    return std::find(hooks.capture.begin(), hooks.capture.end(), HookPoint{layer, site}) !=
           hooks.capture.end();
  }

  const TransformerModel* model_;
  std::vector<Eigen::MatrixXd> keys_, values_;
  Eigen::VectorXd residual_;
  std::size_t length_ = 0;
};

struct ForwardResult {
  Eigen::MatrixXd logits;  // n x vocab
  std::vector<HookCapture> captures;
};

inline std::vector<HookPoint> normalize_hooks(std::span<const HookPoint> sites,
                                              const ModelConfig& cfg) {
  std::vector<HookPoint> out(sites.begin(), sites.end());
  for (const auto& h : out)
    if (h.layer >= cfg.n_layers) throw std::invalid_argument("hook layer out of range");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Full forward pass. Captures are recorded at the last position and
/// returned ordered by (layer, site).
inline ForwardResult forward(const TransformerModel& model, std::span<const TokenId> tokens,
                             std::span<const HookPoint> capture_sites = {}) {
  if (tokens.empty()) throw std::invalid_argument("forward: empty token sequence");
  const std::vector<HookPoint> hooks = normalize_hooks(capture_sites, model.config);
  ForwardResult out;
  out.logits.resize(static_cast<Eigen::Index>(tokens.size()),
                    static_cast<Eigen::Index>(model.config.vocab_size));
  DecodeState state(model);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    StepHooks step;
    if (i + 1 == tokens.size()) {
      step.capture = hooks;
      step.captured = &out.captures;
    }
    state.push(tokens[i], step);
    out.logits.row(static_cast<Eigen::Index>(i)) = state.logits().transpose();
  }
  return out;
}

/// Captures only (no logits), the cheap path used for feature extraction.
inline std::vector<HookCapture> capture_last(const TransformerModel& model,
                                             std::span<const TokenId> tokens,
                                             std::span<const HookPoint> capture_sites) {
  if (tokens.empty()) throw std::invalid_argument("capture_last: empty token sequence");
  const std::vector<HookPoint> hooks = normalize_hooks(capture_sites, model.config);
  std::vector<HookCapture> captured;
  DecodeState state(model);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    StepHooks step;
    if (i + 1 == tokens.size()) {
      step.capture = hooks;
      step.captured = &captured;
    }
    state.push(tokens[i], step);
  }
  return captured;
}

/// Lowest index among the maxima.
inline TokenId argmax_token(const Eigen::VectorXd& logits) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return static_cast<TokenId>(best);
}

/// Temperature-0 decoding. Returns only the emitted tokens; an emitted EOS is
/// kept and ends generation. When `patch` is set it is applied at every
/// position from the last prompt token onward.
inline std::vector<TokenId> greedy_decode(const TransformerModel& model,
                                          std::span<const TokenId> prompt,
                                          std::size_t max_new_tokens,
                                          const MlpPatch* patch = nullptr) {
  if (prompt.empty()) throw std::invalid_argument("greedy_decode: empty prompt");
  if (max_new_tokens == 0) throw std::invalid_argument("greedy_decode: max_new_tokens must be >= 1");
  DecodeState state(model);
  for (std::size_t i = 0; i < prompt.size(); ++i) {
    StepHooks step;
    if (i + 1 == prompt.size()) step.patch = patch;
    state.push(prompt[i], step);
  }
  std::vector<TokenId> emitted;
  emitted.reserve(max_new_tokens);
  for (std::size_t n = 0; n < max_new_tokens; ++n) {
    const TokenId next = argmax_token(state.logits());
    emitted.push_back(next);
    if (model.tokens.eos && next == *model.tokens.eos) break;
    if (n + 1 == max_new_tokens) break;
    StepHooks step;
    step.patch = patch;
    state.push(next, step);
  }
  return emitted;
}

}  // namespace glitchlab
