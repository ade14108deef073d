#pragma once

// Analytically constructed "copy model" with planted glitch tokens.
//
// Residual stream layout (dh = d_model / n_heads):
//   [0, dh)        token code      (written by the token embedding)
//   [dh, 2dh)      copied code     (layer-0 head 0 copies the quoted token here)
//   2dh            constant 1      (positional embedding, every position)
//   2dh+1          slot flag       (positional embedding, quoted position only)
//   2dh+2          junk accumulator
//   [2dh+3, d)     scratch         (content heads and background neurons)
//
// Unembedding reads the copied code against the normalised code of every
// token, so the quoted token wins by Cauchy-Schwarz, and reads the junk
// accumulator into the logit of the reserved <unk> token.
//
// Key-layer MLPs hold three neuron groups:
//   junk    swish-like units  act(k z) z,  z = <u, copied> - bias; silent for
//           unit-norm codes, firing for large corrupted codes; write +junk
//   steady  act(a - g * junk) * 2; ~2 for normal tokens, shut off once junk
//           has accumulated; write -junk
//   background  small random reads/writes on scratch
//
// Planted tokens get their embedding row replaced by a scaled random vector.
// The large code drives the junk units, <unk> outranks the copy and the echo
// fails. Every planted token is re-drawn (bounded) until it fails the oracle,
// then the whole vocabulary is checked: planted <=> oracle glitch.

#include <array>
#include <string_view>

#include "glitchlab/oracle.hpp"

namespace glitchlab {

namespace synth_detail {

inline constexpr std::array<std::string_view, 16> kReservedWords = {
    "<bos>", "<eos>", "<unk>", "Can", "you", "repeat", "the", "token",
    "`",     "and",   "return", "it", "back", "to",     "me",  "?"};

inline constexpr TokenId kBos = 0;
inline constexpr TokenId kEos = 1;
inline constexpr TokenId kUnk = 2;

inline std::string pseudo_word(TokenId id) {
  static constexpr std::array<std::string_view, 24> syl = {
      "ka", "ro", "mi", "zu", "te", "lan", "vor", "qui", "sha", "dre", "po", "nix",
      "gal", "fen", "tor", "wy", "ess", "bri", "um", "och", "ral", "yst", "ze", "ark"};
  std::string w;
  std::uint32_t v = id * 2654435761u;
  const int parts = 2 + static_cast<int>(id % 3);
  for (int i = 0; i < parts; ++i) {
    w += syl[v % syl.size()];
    v = v / static_cast<std::uint32_t>(syl.size()) + id * 40503u + static_cast<std::uint32_t>(i);
  }
  return w + std::to_string(id);
}

inline double to_float_precision(double v) { return static_cast<double>(static_cast<float>(v)); }

inline void round_to_float(Eigen::MatrixXd& m) { m = m.unaryExpr(&to_float_precision); }

struct Layout {
  Eigen::Index dh, code, copy, constant, flag, junk, scratch, scratch_len;
  explicit Layout(const ModelConfig& c) {
    dh = static_cast<Eigen::Index>(c.d_head());
    code = 0;
    copy = dh;
    constant = 2 * dh;
    flag = 2 * dh + 1;
    junk = 2 * dh + 2;
    scratch = 2 * dh + 3;
    scratch_len = static_cast<Eigen::Index>(c.d_model) - scratch;
  }
};

}  // namespace synth_detail

/// The repetition template shared by synthetic models:
/// "<bos> Can you repeat the token ` {token} ` and return it back to me ?"
inline PromptTemplate default_prompt_template() {
  return PromptTemplate{{0, 3, 4, 5, 6, 7, 8, kSlot, 8, 9, 10, 11, 12, 13, 14, 15}};
}

inline constexpr std::size_t kReservedTokenCount = synth_detail::kReservedWords.size();

/// Downstream band used by synthetic models: every layer except the first
/// and the last (just layer 1 for two-layer models).
inline std::vector<std::size_t> synthetic_key_layers(std::size_t n_layers) {
  std::vector<std::size_t> out;
  if (n_layers < 2) return out;
  const std::size_t last = n_layers >= 3 ? n_layers - 2 : 1;
  for (std::size_t l = 1; l <= last; ++l) out.push_back(l);
  return out;
}

struct SynthTuning {
  double copy_gain = 4.0;
  double copy_sharpness = 40.0;  // attention logit at the slot
  double junk_bias = 1.2;
  double junk_slope = 8.0;
  double junk_weight = 32.0;
  // Extra negative gate bias on junk units. Unset: 0 for sigmoid, else 8,
  // which keeps silu/gelu gates of normal tokens out of their negative lobe.
  std::optional<double> junk_gate_margin;
  double steady_bias = 6.0;
  double steady_value = 2.0;
  double steady_coupling = 1.0;
  double anti_junk_weight = 0.25;
  double scratch_noise = 0.1;
  double content_scale = 0.6;
  double corruption_jitter = 0.4;  // planted scale drawn in [1-j, 1+j] * corruption_scale
  std::size_t max_redraws = 32;
};

/// The reference scenario: vocab 512, d_model 64, 4 layers, 4 heads.
inline ModelConfig reference_config() {
  ModelConfig c;
  c.n_layers = 4;
  c.n_heads = 4;
  c.d_model = 64;
  c.d_mlp = 128;
  c.vocab_size = 512;
  c.max_positions = default_prompt_template().size() + kDefaultEchoBudget;
  c.activation = Activation::sigmoid;
  return c;
}

inline TransformerModel synth_copy_model(ModelConfig config, std::size_t n_glitch,
                                         double corruption_scale, std::uint64_t rng_seed,
                                         const SynthTuning& tune = {}, std::size_t workers = 0) {
  using synth_detail::Layout;
  config.rng_seed = rng_seed;
  config.validate();
  const PromptTemplate tmpl = default_prompt_template();
  if (config.n_heads < 3) throw std::invalid_argument("synth: need at least 3 heads");
  if (config.n_layers < 2) throw std::invalid_argument("synth: need at least 2 layers");
  if (config.d_gate() < 4) throw std::invalid_argument("synth: d_mlp must be at least 8");
  if (config.vocab_size <= kReservedTokenCount)
    throw std::invalid_argument("synth: vocab_size must exceed the reserved template tokens");
  if (n_glitch >= config.vocab_size - kReservedTokenCount)
    throw std::invalid_argument("synth: n_glitch must be below vocab_size - reserved tokens");
  if (config.max_positions < tmpl.size() + kDefaultEchoBudget)
    throw std::invalid_argument("synth: max_positions too small for prompt plus echo budget");
  if (!(corruption_scale > 0.0)) throw std::invalid_argument("synth: corruption_scale must be > 0");

  const Layout lay(config);
  const double gate_margin =
      tune.junk_gate_margin.value_or(config.activation == Activation::sigmoid ? 0.0 : 8.0);
  if (lay.scratch_len < 1) throw std::invalid_argument("synth: d_model too small for layout");
  const auto d = static_cast<Eigen::Index>(config.d_model);
  const auto vocab = static_cast<Eigen::Index>(config.vocab_size);
  const auto half = static_cast<Eigen::Index>(config.d_gate());
  const std::size_t slot = tmpl.slot();

  Rng rng(rng_seed);
  auto gauss = [&] { return normal_draw(rng); };
  auto unit_vector = [&](Eigen::Index n) {
    Eigen::VectorXd v(n);
    do {
      for (Eigen::Index i = 0; i < n; ++i) v[i] = gauss();
    } while (v.norm() < 1e-6);
    return Eigen::VectorXd(v / v.norm());
  };
  // Token rows own the code and scratch coordinates only.
  auto fill_token_row = [&](Eigen::MatrixXd& emb, Eigen::Index t, double scale) {
    emb.row(t).setZero();
    emb.row(t).segment(lay.code, lay.dh) = scale * unit_vector(lay.dh).transpose();
    for (Eigen::Index i = 0; i < lay.scratch_len; ++i)
      emb(t, lay.scratch + i) = scale * tune.scratch_noise * gauss();
  };

  TransformerModel m;
  m.config = config;
  m.tokens.prompt = tmpl;
  m.tokens.eos = synth_detail::kEos;
  m.tokens.display.resize(config.vocab_size);
  for (std::size_t i = 0; i < config.vocab_size; ++i)
    m.tokens.display[i] = i < kReservedTokenCount ? std::string(synth_detail::kReservedWords[i])
                                                  : synth_detail::pseudo_word(static_cast<TokenId>(i));

  m.token_embedding = Eigen::MatrixXd::Zero(vocab, d);
  for (Eigen::Index t = 0; t < vocab; ++t) fill_token_row(m.token_embedding, t, 1.0);

  m.position_embedding = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(config.max_positions), d);
  for (Eigen::Index p = 0; p < m.position_embedding.rows(); ++p) {
    m.position_embedding(p, lay.constant) = 1.0;
    for (Eigen::Index i = 0; i < lay.scratch_len; ++i)
      m.position_embedding(p, lay.scratch + i) = tune.scratch_noise * gauss();
  }
  m.position_embedding(static_cast<Eigen::Index>(slot), lay.flag) = 1.0;

  const std::vector<std::size_t> key_layers = synthetic_key_layers(config.n_layers);
  const Eigen::Index n_junk = std::max<Eigen::Index>(2, (half / 4) & ~Eigen::Index{1});
  const Eigen::Index n_steady = std::max<Eigen::Index>(1, half / 4);
  const Eigen::Index n_heads = static_cast<Eigen::Index>(config.n_heads);

  // Content-bearing coordinates: code + scratch.
  std::vector<Eigen::Index> content;
  for (Eigen::Index i = 0; i < lay.dh; ++i) content.push_back(lay.code + i);
  for (Eigen::Index i = 0; i < lay.scratch_len; ++i) content.push_back(lay.scratch + i);
  const double content_sd = tune.content_scale / std::sqrt(static_cast<double>(content.size()));
  const double scratch_sd = 0.3 / std::sqrt(static_cast<double>(lay.scratch_len));

  m.layers.resize(config.n_layers);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    LayerWeights& w = m.layers[l];
    w.wq = Eigen::MatrixXd::Zero(d, d);
    w.wk = Eigen::MatrixXd::Zero(d, d);
    w.wv = Eigen::MatrixXd::Zero(d, d);
    w.wo = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index h = 0; h < n_heads; ++h) {
      const Eigen::Index off = h * lay.dh;
      if (l == 0 && h == 0) {
        // Copy head: constant query meets the slot flag key; value is the code.
        const double s = std::sqrt(tune.copy_sharpness * std::sqrt(static_cast<double>(lay.dh)));
        w.wq(lay.constant, off) = s;
        w.wk(lay.flag, off) = s;
        for (Eigen::Index i = 0; i < lay.dh; ++i) {
          w.wv(lay.code + i, off + i) = 1.0;
          w.wo(off + i, lay.copy + i) = tune.copy_gain;
        }
        continue;
      }
      // Content heads: random reads of code + scratch, small writes to scratch.
      for (Eigen::Index r : content)
        for (Eigen::Index c = 0; c < lay.dh; ++c) {
          w.wq(r, off + c) = content_sd * gauss();
          w.wk(r, off + c) = content_sd * gauss();
          w.wv(r, off + c) = content_sd * gauss();
        }
      for (Eigen::Index c = 0; c < lay.dh; ++c)
        for (Eigen::Index i = 0; i < lay.scratch_len; ++i)
          w.wo(off + c, lay.scratch + i) = 0.1 * scratch_sd * gauss();
    }

    w.up = Eigen::MatrixXd::Zero(d, 2 * half);
    w.down = Eigen::MatrixXd::Zero(half, d);
    const bool is_key = std::find(key_layers.begin(), key_layers.end(), l) != key_layers.end();
    Eigen::Index n = 0;
    if (is_key) {
      for (Eigen::Index j = 0; j < n_junk; j += 2) {
        const Eigen::VectorXd u = unit_vector(lay.dh);
        for (int sign : {1, -1}) {
          const Eigen::Index col = n + j + (sign < 0 ? 1 : 0);
          for (Eigen::Index i = 0; i < lay.dh; ++i) {
            w.up(lay.copy + i, half + col) = sign * u[i] / tune.copy_gain;
            w.up(lay.copy + i, col) = tune.junk_slope * sign * u[i] / tune.copy_gain;
          }
          w.up(lay.constant, half + col) = -tune.junk_bias;
          w.up(lay.constant, col) = -tune.junk_slope * tune.junk_bias - gate_margin;
          w.down(col, lay.junk) = tune.junk_weight;
        }
      }
      n += n_junk;
      for (Eigen::Index j = 0; j < n_steady; ++j, ++n) {
        w.up(lay.constant, n) = tune.steady_bias;
        w.up(lay.junk, n) = -tune.steady_coupling;
        w.up(lay.constant, half + n) = tune.steady_value;
        w.down(n, lay.junk) = -tune.anti_junk_weight;
      }
    }
    for (; n < half; ++n) {
      for (Eigen::Index i = 0; i < lay.scratch_len; ++i) {
        w.up(lay.scratch + i, n) = scratch_sd * gauss();
        w.up(lay.scratch + i, half + n) = scratch_sd * gauss();
        w.down(n, lay.scratch + i) = 0.1 * scratch_sd * gauss();
      }
    }
    for (Eigen::MatrixXd* mat : {&w.wq, &w.wk, &w.wv, &w.wo, &w.up, &w.down})
      synth_detail::round_to_float(*mat);
  }

  // Planted set: uniform over non-reserved ids.
  std::vector<TokenId> candidates;
  for (TokenId t = static_cast<TokenId>(kReservedTokenCount); t < config.vocab_size; ++t)
    candidates.push_back(t);
  std::vector<TokenId> planted = sample_without_replacement(candidates, n_glitch, rng);
  std::sort(planted.begin(), planted.end());

  // The steady units of normal tokens leave a fixed negative offset on the
  // junk coordinate; the constant coordinate cancels it in the <unk> logit.
  double steady_offset = 0.0;
  {
    double junk_in = 0.0;
    for (std::size_t k = 0; k < key_layers.size(); ++k) {
      const double act = tune.steady_value * activate(config.activation, tune.steady_bias - tune.steady_coupling * junk_in);
      const double written = static_cast<double>(n_steady) * act * tune.anti_junk_weight;
      junk_in -= written;
      steady_offset += written;
    }
  }

  auto rebuild_unembedding = [&] {
    m.unembedding = Eigen::MatrixXd::Zero(d, vocab);
    for (Eigen::Index t = 0; t < vocab; ++t) {
      const Eigen::VectorXd c = m.token_embedding.row(t).segment(lay.code, lay.dh).transpose();
      m.unembedding.col(t).segment(lay.copy, lay.dh) = c / c.norm();
    }
    m.unembedding(lay.junk, synth_detail::kUnk) = 1.0;
    m.unembedding(lay.constant, synth_detail::kUnk) = steady_offset;
    synth_detail::round_to_float(m.unembedding);
  };

  // Each planted token keeps its own generator so the outcome of one redraw
  // loop does not shift the random stream of the next.
  std::vector<std::uint64_t> planted_seeds(planted.size());
  for (auto& s : planted_seeds) s = rng();
  for (std::size_t i = 0; i < planted.size(); ++i) {
    Rng local(planted_seeds[i]);
    std::swap(rng, local);
    const double jitter = 1.0 + tune.corruption_jitter * (2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0);
    fill_token_row(m.token_embedding, planted[i], corruption_scale * jitter);
    std::swap(rng, local);
  }
  synth_detail::round_to_float(m.token_embedding);
  synth_detail::round_to_float(m.position_embedding);
  rebuild_unembedding();

  // Redraw planted rows that still echo.
  std::vector<TokenId> stubborn;
  for (std::size_t i = 0; i < planted.size(); ++i) {
    const TokenId t = planted[i];
    Rng local(planted_seeds[i] ^ 0x9e3779b97f4a7c15ull);
    std::size_t tries = 0;
    while (classify_token(m, t).label != Label::Glitch) {
      if (++tries > tune.max_redraws) {
        stubborn.push_back(t);
        break;
      }
      std::swap(rng, local);
      fill_token_row(m.token_embedding, t, corruption_scale);
      std::swap(rng, local);
      synth_detail::round_to_float(m.token_embedding);
      const Eigen::VectorXd c = m.token_embedding.row(t).segment(lay.code, lay.dh).transpose();
      m.unembedding.col(t).segment(lay.copy, lay.dh) = c / c.norm();
      synth_detail::round_to_float(m.unembedding);
    }
  }
  if (!stubborn.empty())
    throw ConstructionError("synth: planted tokens still echo after redraws", stubborn);

  m.planted_glitch_set = planted;
  m.validate();

  // Exhaustive verification: planted <=> oracle glitch.
  std::vector<TokenId> all(config.vocab_size);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<TokenId>(i);
  const std::vector<TokenId> found = glitch_ids(classify_tokens(m, all, workers));
  if (found != planted) {
    std::vector<TokenId> diff;
    std::set_symmetric_difference(found.begin(), found.end(), planted.begin(), planted.end(),
                                  std::back_inserter(diff));
    throw ConstructionError("synth: oracle glitch set differs from planted set", diff);
  }
  return m;
}

}  // namespace glitchlab
