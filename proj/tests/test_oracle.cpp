#include <gtest/gtest.h>

#include <sstream>

#include "glitchlab/model_io.hpp"
#include "support.hpp"

using namespace glitchlab;
using namespace testsupport;

TEST(RepetitionPrompt, FillsTheSlot) {
  const PromptTemplate t{{4, 5, kSlot, 6}};
  EXPECT_EQ(build_repetition_prompt(99, t), (std::vector<TokenId>{4, 5, 99, 6}));
  EXPECT_TRUE(echo_contains(std::vector<TokenId>{1, 2, 3}, 3));
  EXPECT_FALSE(echo_contains(std::vector<TokenId>{}, 3));
}

TEST(Oracle, ReferenceScenarioMatchesPlantedSet) {
  const TransformerModel& m = reference_model();
  ASSERT_TRUE(m.planted_glitch_set);
  EXPECT_EQ(m.planted_glitch_set->size(), 102u);
  const auto verdicts = classify_tokens(m, all_tokens(512));
  EXPECT_EQ(glitch_ids(verdicts), *m.planted_glitch_set);
  for (const auto& v : verdicts) {
    ASSERT_FALSE(v.echoed.empty());
    EXPECT_LE(v.echoed.size(), kDefaultEchoBudget);
    // Generation stops early only on EOS.
    if (v.echoed.size() < kDefaultEchoBudget) {
      EXPECT_EQ(v.echoed.back(), *m.tokens.eos);
    }
    EXPECT_EQ(v.prompt_len, m.tokens.prompt.size());
    EXPECT_EQ(v.label == Label::Normal, echo_contains(v.echoed, v.token));
  }
}

TEST(Oracle, GlitchAndNormalPartitionTheVocabulary) {
  const TransformerModel& m = small_model();
  const auto verdicts = classify_tokens(m, all_tokens(m.config.vocab_size), 2);
  std::vector<TokenId> g, n;
  for (const auto& v : verdicts) (v.label == Label::Glitch ? g : n).push_back(v.token);
  EXPECT_EQ(g.size() + n.size(), m.config.vocab_size);
  std::vector<TokenId> both;
  std::set_intersection(g.begin(), g.end(), n.begin(), n.end(), std::back_inserter(both));
  EXPECT_TRUE(both.empty());
  EXPECT_EQ(g, glitch_ids(verdicts));
}

TEST(Oracle, WorkerCountDoesNotChangeVerdicts) {
  const TransformerModel& m = small_model();
  const auto toks = all_tokens(m.config.vocab_size);
  EXPECT_EQ(classify_tokens(m, toks, 1), classify_tokens(m, toks, 3));
}

TEST(Oracle, RejectsOutOfRangeToken) {
  EXPECT_THROW(classify_token(small_model(), 128), std::invalid_argument);
}

TEST(Verdicts, JsonlRoundTrip) {
  const auto verdicts = classify_tokens(small_model(), all_tokens(20));
  std::stringstream ss;
  write_verdicts(ss, verdicts);
  EXPECT_EQ(read_verdicts(ss), verdicts);
}

TEST(Verdicts, MalformedLineReportsItsOffset) {
  std::stringstream ss("{\"token\":1,\"label\":\"Glitch\",\"echoed\":[2]}\n{\"token\":2,\"label\":\"Maybe\",\"echoed\":[]}\n");
  try {
    read_verdicts(ss);
    FAIL() << "bad label accepted";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset, 42u);
  }
}

TEST(Synth, SameSeedGivesIdenticalBytes) {
  const TransformerModel a = synth_copy_model(small_config(), 25, 8.0, 3);
  std::stringstream sa, sb;
  save_model(sa, a);
  save_model(sb, small_model());
  EXPECT_EQ(sa.str(), sb.str());
  const TransformerModel c = synth_copy_model(small_config(), 25, 8.0, 4);
  EXPECT_NE(*c.planted_glitch_set, *a.planted_glitch_set);
}

TEST(Synth, PlantedCountIsFloorOfTwentyPercent) {
  EXPECT_EQ(static_cast<std::size_t>(0.2 * 512), 102u);
  const auto& p = *reference_model().planted_glitch_set;
  EXPECT_TRUE(std::is_sorted(p.begin(), p.end()));
  for (TokenId t : p) EXPECT_GE(t, kReservedTokenCount);
}

TEST(Synth, EveryActivationBuildsAVerifiedModel) {
  for (Activation act : {Activation::silu, Activation::gelu}) {
    ModelConfig c = small_config();
    c.activation = act;
    const TransformerModel m = synth_copy_model(c, 25, 8.0, 2);
    EXPECT_EQ(glitch_ids(classify_tokens(m, all_tokens(128))), *m.planted_glitch_set);
  }
}

TEST(Synth, NoGlitchScenarioHasEmptyPlantedSet) {
  const TransformerModel m = synth_copy_model(small_config(), 0, 8.0, 1);
  EXPECT_TRUE(m.planted_glitch_set->empty());
  EXPECT_TRUE(glitch_ids(classify_tokens(m, all_tokens(128))).empty());
}

TEST(Synth, WeakCorruptionFailsVerification) {
  SynthTuning t;
  t.max_redraws = 0;
  try {
    synth_copy_model(small_config(), 5, 0.01, 1, t);
    FAIL() << "weak corruption verified";
  } catch (const ConstructionError& e) {
    EXPECT_FALSE(e.tokens.empty());
  }
}

TEST(Synth, RejectsImpossibleConfigs) {
  ModelConfig c = small_config();
  EXPECT_THROW(synth_copy_model(c, 200, 8.0, 1), std::invalid_argument);
  EXPECT_THROW(synth_copy_model(c, 5, 0.0, 1), std::invalid_argument);
  c.n_heads = 2;
  c.d_model = 32;
  EXPECT_THROW(synth_copy_model(c, 5, 8.0, 1), std::invalid_argument);
  c = small_config();
  c.max_positions = 8;
  EXPECT_THROW(synth_copy_model(c, 5, 8.0, 1), std::invalid_argument);
}

TEST(Synth, KeyLayersAreTheInteriorBand) {
  EXPECT_EQ(synthetic_key_layers(4), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(synthetic_key_layers(3), (std::vector<std::size_t>{1}));
}
