#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "glitchlab/synth.hpp"

namespace testsupport {

using namespace glitchlab;

/// The reference scenario, built once per process.
inline const TransformerModel& reference_model() {
  static const TransformerModel m = synth_copy_model(reference_config(), 102, 8.0, 7);
  return m;
}

inline ModelConfig small_config() {
  ModelConfig c;
  c.vocab_size = 128;
  c.d_model = 32;
  c.n_layers = 3;
  c.n_heads = 4;
  c.d_mlp = 32;
  c.max_positions = 24;
  return c;
}

inline const TransformerModel& small_model() {
  static const TransformerModel m = synth_copy_model(small_config(), 25, 8.0, 3);
  return m;
}

/// Gaussian weights at float precision; template {0, slot, 1}.
inline TransformerModel random_model(std::uint64_t seed, Activation act = Activation::sigmoid,
                                     std::size_t vocab = 16, std::size_t d_model = 8, std::size_t n_heads = 2,
                                     std::size_t n_layers = 2, std::size_t d_mlp = 12, std::size_t max_pos = 12) {
  TransformerModel m;
  m.config.vocab_size = vocab;
  m.config.d_model = d_model;
  m.config.n_heads = n_heads;
  m.config.n_layers = n_layers;
  m.config.d_mlp = d_mlp;
  m.config.max_positions = max_pos;
  m.config.activation = act;
  m.config.rng_seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 0.5);
  auto fill = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd x(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) x(i, j) = static_cast<float>(nd(rng));
    return x;
  };
  const auto d = static_cast<Eigen::Index>(d_model), v = static_cast<Eigen::Index>(vocab);
  m.token_embedding = fill(v, d);
  m.position_embedding = fill(static_cast<Eigen::Index>(max_pos), d);
  for (std::size_t l = 0; l < n_layers; ++l) {
    LayerWeights w;
    w.wq = fill(d, d);
    w.wk = fill(d, d);
    w.wv = fill(d, d);
    w.wo = fill(d, d);
    w.up = fill(d, static_cast<Eigen::Index>(d_mlp));
    w.down = fill(static_cast<Eigen::Index>(d_mlp / 2), d);
    m.layers.push_back(std::move(w));
  }
  m.unembedding = fill(d, v);
  m.tokens.prompt.items = {0, kSlot, 1};
  m.validate();
  return m;
}

inline std::vector<TokenId> all_tokens(std::size_t n) {
  std::vector<TokenId> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<TokenId>(i);
  return v;
}

inline nlohmann::json fixtures() {
  std::ifstream is(std::string(GLITCHLAB_FIXTURES) + "/reference.json");
  return nlohmann::json::parse(is);
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

/// Fresh directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("glitchlab-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testsupport
