#pragma once

// Repetition-task oracle: quote a token inside a fixed prompt, decode at
// temperature 0, and call the token a glitch when the echo does not contain it.

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

#include "glitchlab/model.hpp"

namespace glitchlab {

inline constexpr std::size_t kDefaultEchoBudget = 8;

struct OracleVerdict {
  TokenId token = 0;
  Label label = Label::Normal;
  std::vector<TokenId> echoed;
  std::size_t prompt_len = 0;

  friend bool operator==(const OracleVerdict&, const OracleVerdict&) = default;
};

inline std::vector<TokenId> build_repetition_prompt(TokenId token, const PromptTemplate& tmpl) {
  const std::size_t slot = tmpl.slot();
  std::vector<TokenId> prompt = tmpl.items;
  prompt[slot] = token;
  return prompt;
}

/// Containment match: the echo repeats the token if the id appears anywhere.
inline bool echo_contains(std::span<const TokenId> echoed, TokenId token) {
  return std::find(echoed.begin(), echoed.end(), token) != echoed.end();
}

inline OracleVerdict classify_token(const TransformerModel& model, TokenId token,
                                    std::size_t max_new_tokens = kDefaultEchoBudget) {
  if (token >= model.config.vocab_size) throw std::invalid_argument("classify_token: token out of range");
  const std::vector<TokenId> prompt = build_repetition_prompt(token, model.tokens.prompt);
  OracleVerdict v;
  v.token = token;
  v.prompt_len = prompt.size();
  v.echoed = greedy_decode(model, prompt, max_new_tokens);
  v.label = echo_contains(v.echoed, token) ? Label::Normal : Label::Glitch;
  return v;
}

/// Oracle over an explicit token list, fanned out over `workers` threads.
inline std::vector<OracleVerdict> classify_tokens(const TransformerModel& model,
                                                  std::span<const TokenId> tokens,
                                                  std::size_t workers = 0,
                                                  std::size_t max_new_tokens = kDefaultEchoBudget) {
  std::vector<OracleVerdict> out(tokens.size());
  parallel_for(tokens.size(), workers,
               [&](std::size_t i) { out[i] = classify_token(model, tokens[i], max_new_tokens); });
  return out;
}

inline std::vector<TokenId> glitch_ids(std::span<const OracleVerdict> verdicts) {
  std::vector<TokenId> g;
  for (const auto& v : verdicts)
    if (v.label == Label::Glitch) g.push_back(v.token);
  std::sort(g.begin(), g.end());
  return g;
}

// ---------------------------------------------------------------------------
// Verdict dump: one JSON object per line {"token", "label", "echoed"}.

inline void write_verdicts(std::ostream& os, std::span<const OracleVerdict> verdicts) {
  for (const auto& v : verdicts) {
    nlohmann::ordered_json j;
    j["token"] = v.token;
    j["label"] = std::string(to_string(v.label));
    j["echoed"] = v.echoed;
    j["prompt_len"] = v.prompt_len;
    os << j.dump() << '\n';
  }
}

inline void write_verdicts(const std::string& path, std::span<const OracleVerdict> verdicts) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_verdicts(os, verdicts);
  if (!os) throw IoError("write failed for '" + path + "'");
}

inline std::vector<OracleVerdict> read_verdicts(std::istream& is) {
  std::vector<OracleVerdict> out;
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(is, line)) {
    const std::uint64_t line_start = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      OracleVerdict v;
      v.token = j.at("token").get<TokenId>();
      v.label = parse_label(j.at("label").get<std::string>());
      v.echoed = j.at("echoed").get<std::vector<TokenId>>();
      v.prompt_len = j.value("prompt_len", std::size_t{0});
      out.push_back(std::move(v));
    } catch (const std::exception& e) {
      throw FormatError(std::string("bad verdict record: ") + e.what(), line_start);
    }
  }
  return out;
}

inline std::vector<OracleVerdict> read_verdicts(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_verdicts(is);
}

}  // namespace glitchlab
