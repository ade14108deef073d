#pragma once

// "glitchlab-model/1" container:
//
//   "glitchlab-model/1\n"
//   u64  header length, then UTF-8 JSON header
//        {format, config, tokens{display, eos, prompt}, planted_glitch_set}
//   u32  blob count
//   per blob: u16 name length, name, u8 ndim, u64 dims[ndim], f32 data (row-major)
//
// All integers and floats are little-endian.

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

#include "glitchlab/binary_io.hpp"
#include "glitchlab/model.hpp"

namespace glitchlab {

inline constexpr std::string_view kModelFormat = "glitchlab-model/1";

inline nlohmann::ordered_json config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["n_layers"] = c.n_layers;
  j["n_heads"] = c.n_heads;
  j["d_model"] = c.d_model;
  j["d_mlp"] = c.d_mlp;
  j["vocab_size"] = c.vocab_size;
  j["max_positions"] = c.max_positions;
  j["activation"] = std::string(to_string(c.activation));
  j["rng_seed"] = c.rng_seed;
  return j;
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.d_mlp = j.at("d_mlp").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.max_positions = j.at("max_positions").get<std::size_t>();
  c.activation = parse_activation(j.at("activation").get<std::string>());
  c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  return c;
}

namespace model_io_detail {

inline void put_blob(std::ostream& os, const std::string& name, const Eigen::MatrixXd& m) {
  bin::put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
  bin::put_bytes(os, name);
  bin::put<std::uint8_t>(os, 2);
  bin::put<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
  bin::put<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) bin::put_f32(os, m(r, c));
}

inline std::vector<std::pair<std::string, const Eigen::MatrixXd*>> blob_list(const TransformerModel& m) {
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> out = {
      {"token_embedding", &m.token_embedding},
      {"position_embedding", &m.position_embedding},
      {"unembedding", &m.unembedding}};
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& w = m.layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    out.insert(out.end(), {{p + "wq", &w.wq}, {p + "wk", &w.wk}, {p + "wv", &w.wv},
                           {p + "wo", &w.wo}, {p + "up", &w.up}, {p + "down", &w.down}});
  }
  return out;
}

}  // namespace model_io_detail

inline void save_model(std::ostream& os, const TransformerModel& m) {
  m.validate();
  nlohmann::ordered_json h;
  h["format"] = kModelFormat;
  h["config"] = config_to_json(m.config);
  nlohmann::ordered_json tok;
  tok["display"] = m.tokens.display;
  tok["eos"] = m.tokens.eos ? nlohmann::ordered_json(*m.tokens.eos) : nlohmann::ordered_json(nullptr);
  std::vector<std::int64_t> prompt;
  for (TokenId t : m.tokens.prompt.items) prompt.push_back(t == kSlot ? -1 : static_cast<std::int64_t>(t));
  tok["prompt"] = prompt;
  h["tokens"] = tok;
  h["planted_glitch_set"] =
      m.planted_glitch_set ? nlohmann::ordered_json(*m.planted_glitch_set) : nlohmann::ordered_json(nullptr);
  const std::string header = h.dump();

  bin::put_bytes(os, kModelFormat);
  bin::put_bytes(os, "\n");
  bin::put<std::uint64_t>(os, header.size());
  bin::put_bytes(os, header);
  const auto blobs = model_io_detail::blob_list(m);
  bin::put<std::uint32_t>(os, static_cast<std::uint32_t>(blobs.size()));
  for (const auto& [name, mat] : blobs) model_io_detail::put_blob(os, name, *mat);
}

inline TransformerModel load_model(std::istream& is) {
  bin::Reader r(is);
  const std::string magic = r.get_line(64, "format line");
  if (magic != kModelFormat) throw FormatError("unsupported model format '" + magic + "'", 0);

  const std::uint64_t header_at = r.offset();
  const auto header_len = r.get<std::uint64_t>("header length");
  if (header_len > (std::uint64_t{1} << 30)) throw FormatError("implausible header length", header_at);
  TransformerModel m;
  try {
    const auto h = nlohmann::json::parse(r.get_string(header_len, "header"));
    if (h.at("format").get<std::string>() != kModelFormat) throw std::invalid_argument("header format mismatch");
    m.config = config_from_json(h.at("config"));
    m.config.validate();
    const auto& tok = h.at("tokens");
    m.tokens.display = tok.at("display").get<std::vector<std::string>>();
    if (!tok.at("eos").is_null()) m.tokens.eos = tok.at("eos").get<TokenId>();
    for (std::int64_t t : tok.at("prompt").get<std::vector<std::int64_t>>())
      m.tokens.prompt.items.push_back(t < 0 ? kSlot : static_cast<TokenId>(t));
    if (!h.at("planted_glitch_set").is_null())
      m.planted_glitch_set = h.at("planted_glitch_set").get<std::vector<TokenId>>();
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("bad model header: ") + e.what(), header_at);
  }

  m.layers.resize(m.config.n_layers);
  std::vector<std::pair<std::string, Eigen::MatrixXd*>> slots = {
      {"token_embedding", &m.token_embedding},
      {"position_embedding", &m.position_embedding},
      {"unembedding", &m.unembedding}};
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    auto& w = m.layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    slots.insert(slots.end(), {{p + "wq", &w.wq}, {p + "wk", &w.wk}, {p + "wv", &w.wv},
                               {p + "wo", &w.wo}, {p + "up", &w.up}, {p + "down", &w.down}});
  }

  const std::uint64_t count_at = r.offset();
  const auto count = r.get<std::uint32_t>("blob count");
  if (count != slots.size()) throw FormatError("unexpected blob count", count_at);
  for (const auto& [expected, target] : slots) {
    const std::uint64_t blob_at = r.offset();
    const auto name_len = r.get<std::uint16_t>("blob name length");
    const std::string name = r.get_string(name_len, "blob name");
    if (name != expected) throw FormatError("expected blob '" + expected + "', found '" + name + "'", blob_at);
    const auto ndim = r.get<std::uint8_t>("blob ndim");
    if (ndim != 2) throw FormatError("blob '" + name + "' must be 2-D", blob_at);
    const auto rows = r.get<std::uint64_t>("blob dims");
    const auto cols = r.get<std::uint64_t>("blob dims");
    if (rows > (1u << 24) || cols > (1u << 24)) throw FormatError("implausible blob shape", blob_at);
    target->resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::uint64_t i = 0; i < rows; ++i)
      for (std::uint64_t j = 0; j < cols; ++j)
        (*target)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            static_cast<double>(r.get<float>("blob data"));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after last blob", r.offset());
  try {
    m.validate();
  } catch (const std::exception& e) {
    throw FormatError(std::string("invalid model: ") + e.what(), r.offset());
  }
  return m;
}

inline void save_model(const std::string& path, const TransformerModel& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  save_model(os, m);
  if (!os) throw IoError("write failed for '" + path + "'");
}

inline TransformerModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return load_model(is);
}

}  // namespace glitchlab
