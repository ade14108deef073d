#include <gtest/gtest.h>

#include "glitchlab/detect.hpp"
#include "glitchlab/repair.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace glitchlab;
using namespace testsupport;
using namespace oracles;

TEST(NeuronSets, MatchBruteForceOnHandTable) {
  const std::vector<std::size_t> layer = {3};
  for (double m : {0.0, 0.5, 1.0, 2.0}) {
    for (double quota : {1.0, 0.75, 0.5}) {
      const NeuronProfile p = profile_from_activations(hand_table(), layer, m, quota);
      std::vector<std::size_t> up, down;
      brute_sets(hand_table(), m, quota, up, down);
      EXPECT_EQ(p.layers[0].up, up) << "m=" << m << " quota=" << quota;
      EXPECT_EQ(p.layers[0].down, down) << "m=" << m << " quota=" << quota;
      EXPECT_EQ(p.layers[0].layer, 3u);
    }
  }
  const NeuronProfile strict = profile_from_activations(hand_table(), layer, 1.0, 1.0);
  EXPECT_EQ(strict.layers[0].up, (std::vector<std::size_t>{0}));
  EXPECT_EQ(strict.layers[0].down, (std::vector<std::size_t>{1}));
  EXPECT_NEAR(strict.layers[0].normal_mean[2], 1.25, 1e-15);
}

TEST(NeuronSets, RejectBadInput) {
  const std::vector<std::size_t> layer = {0};
  EXPECT_THROW(profile_from_activations({}, layer, 1.0), std::invalid_argument);
  EXPECT_THROW(profile_from_activations(hand_table(), layer, 1.0, 0.0), std::invalid_argument);
  Table ragged = hand_table();
  ragged[2][0] = vec({1.0});
  EXPECT_THROW(profile_from_activations(ragged, layer, 1.0), std::invalid_argument);
}

TEST(Adjustments, HandValues) {
  const std::vector<std::size_t> layer = {0};
  const NeuronProfile p = profile_from_activations(hand_table(), layer, 1.0, 1.0);
  // Neun-up = {0} with normal mean 2.25; Neun-down = {1} with normal mean -0.025.
  const Table glitch = {{vec({0.25, 2.0, 0, 0, 0})}, {vec({1.25, 4.0, 0, 0, 0})}};
  const AdjustmentFactors f = compute_adjustments(p, glitch);
  EXPECT_NEAR(f.delta_up, 2.25 - 0.75, 1e-12);
  EXPECT_NEAR(f.beta, 1.5, 1e-12);
  EXPECT_NEAR(f.delta_down, 3.0 / kRatioEpsilon, 1e-3);
  EXPECT_EQ(f.alpha, kAlphaMax);

  AdjustmentCoefficients coef;
  coef.k1 = 2.0;
  coef.b1 = -1.0;
  coef.k2 = 0.0;
  coef.b2 = 3.5;
  const AdjustmentFactors g = compute_adjustments(p, glitch, coef);
  EXPECT_NEAR(g.beta, 2.0, 1e-12);
  EXPECT_NEAR(g.alpha, 3.5, 1e-12);
}

TEST(Adjustments, ClampsAndDegenerateProfiles) {
  const std::vector<std::size_t> layer = {0};
  const NeuronProfile p = profile_from_activations(hand_table(), layer, 1.0, 1.0);
  const Table above_normal = {{vec({9.0, -5.0, 0, 0, 0})}};
  const AdjustmentFactors f = compute_adjustments(p, above_normal);
  EXPECT_EQ(f.beta, 0.0);
  EXPECT_EQ(f.alpha, 1.0);
  EXPECT_THROW(compute_adjustments(p, {}), std::invalid_argument);
  NeuronProfile empty = p;
  empty.layers[0].up.clear();
  empty.layers[0].down.clear();
  EXPECT_TRUE(empty.degenerate());
  EXPECT_THROW(compute_adjustments(empty, above_normal), DegenerateDataError);
}

TEST(Patch, PromotesUpAndDividesDown) {
  NeuronProfile p;
  LayerProfile lp;
  lp.layer = 2;
  lp.up = {0};
  lp.down = {2};
  p.layers.push_back(lp);
  AdjustmentFactors f;
  f.beta = 0.5;
  f.alpha = 4.0;
  const MlpPatch patch = make_patch(p, f);
  std::vector<double> z = {1.0, 1.0, 8.0};
  patch(2, z);
  EXPECT_EQ(z, (std::vector<double>{1.5, 1.0, 2.0}));
  patch(1, z);
  EXPECT_EQ(z, (std::vector<double>{1.5, 1.0, 2.0}));
  f.alpha = 0.0;
  EXPECT_THROW(make_patch(p, f), std::invalid_argument);
}

TEST(RepairRate, IsRepairedOverTotal) {
  const TransformerModel& m = small_model();
  const auto& g = *m.planted_glitch_set;
  const KeyLayerSet kl = KeyLayerSet::explicit_layers({1}, 3);
  const std::vector<TokenId> vocab = all_tokens(128);
  std::vector<TokenId> normal;
  std::set_difference(vocab.begin(), vocab.end(), g.begin(), g.end(), std::back_inserter(normal));
  const NeuronProfile p = profile_normal(m, normal, 0.2, 1.0, kl, 1);
  const RepairReport r = repair_all(m, g, p, rule_based_factors());
  std::size_t repaired = 0;
  for (const auto& rec : r.records) repaired += rec.repaired;
  EXPECT_EQ(r.repaired_tokens, repaired);
  EXPECT_EQ(r.total_glitch, g.size());
  ASSERT_TRUE(r.repair_rate);
  EXPECT_DOUBLE_EQ(*r.repair_rate, static_cast<double>(repaired) / static_cast<double>(g.size()));
  const RepairReport none = repair_all(m, std::vector<TokenId>{}, p, rule_based_factors());
  EXPECT_FALSE(none.repair_rate);
}

TEST(RepairRate, IdentityPatchReproducesEchoesOverG) {
  const TransformerModel& m = reference_model();
  const auto& g = *m.planted_glitch_set;
  const KeyLayerSet kl = KeyLayerSet::explicit_layers(synthetic_key_layers(4), 4);
  const std::vector<TokenId> vocab = all_tokens(512);
  std::vector<TokenId> normal;
  std::set_difference(vocab.begin(), vocab.end(), g.begin(), g.end(), std::back_inserter(normal));
  const NeuronProfile p = profile_normal(m, normal, 0.1, 1.0, kl, 7);
  AdjustmentFactors id;
  id.beta = 0.0;
  id.alpha = 1.0;
  const RepairReport r = repair_all(m, g, p, id);
  EXPECT_EQ(r.repaired_tokens, 0u);
  const MlpPatch patch = make_patch(p, id);
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.before, rec.after);
    const auto prompt = build_repetition_prompt(rec.token, m.tokens.prompt);
    DecodeState a(m), b(m);
    for (TokenId t : prompt) {
      a.push(t);
      StepHooks h;
      h.patch = &patch;
      b.push(t, h);
    }
    ASSERT_EQ(a.logits(), b.logits()) << "token " << rec.token;
  }
}

TEST(RepairRate, AdaptiveBeatsRuleBasedOnTheFrozenScenario) {
  const TransformerModel& m = reference_model();
  DetectionConfig c;
  c.key_layers = KeyLayerSet::explicit_layers(synthetic_key_layers(4), 4);
  c.rng_seed = 7;
  const DetectionReport d = detect(model_source(m, c.key_layers, c.sites), c);
  const NeuronProfile p = profile_normal(m, d.normal_set, 0.1, 1.0, c.key_layers, 7);
  const auto acts = sample_glitch_activations(m, d.glitch_set, 0.1, c.key_layers, 7);
  const AdjustmentFactors f = compute_adjustments(p, acts);
  const RepairReport adaptive = repair_all(m, d.glitch_set, p, f);
  const RepairReport rule = repair_all(m, d.glitch_set, p, rule_based_factors());
  const auto fx = fixtures().at("repair");
  EXPECT_GE(*adaptive.repair_rate, *rule.repair_rate);
  EXPECT_EQ(adaptive.repaired_tokens, fx.at("adaptive_repaired").get<std::size_t>());
  EXPECT_EQ(rule.repaired_tokens, fx.at("rule_based_repaired").get<std::size_t>());
  EXPECT_EQ(adaptive.total_glitch, fx.at("total_glitch").get<std::size_t>());
  EXPECT_EQ(f.alpha, fx.at("adaptive_alpha").get<double>());
  EXPECT_EQ(f.beta, fx.at("adaptive_beta").get<double>());
}

TEST(GlitchSample, AtLeastOneTokenAtRateGamma) {
  const TransformerModel& m = small_model();
  const KeyLayerSet kl = KeyLayerSet::explicit_layers({1}, 3);
  std::vector<TokenId> sampled;
  const auto acts = sample_glitch_activations(m, std::vector<TokenId>{40}, 0.1, kl, 1, 0, &sampled);
  EXPECT_EQ(sampled, std::vector<TokenId>{40});
  ASSERT_EQ(acts.size(), 1u);
  EXPECT_EQ(acts[0][0].size(), static_cast<Eigen::Index>(m.config.d_gate()));
  const auto& g = *m.planted_glitch_set;
  sample_glitch_activations(m, g, 0.2, kl, 1, 0, &sampled);
  EXPECT_EQ(sampled.size(), 5u);
  EXPECT_THROW(sample_glitch_activations(m, std::vector<TokenId>{}, 0.1, kl, 1), std::invalid_argument);
}

TEST(GatedActivations, AreGateTimesData) {
  const TransformerModel& m = small_model();
  const KeyLayerSet kl = KeyLayerSet::explicit_layers({1, 2}, 3);
  const ActivationTrace t = extract_features(m, 60, kl, kMlpSites);
  const auto z = gated_activations(t, kl.layers);
  ASSERT_EQ(z.size(), 2u);
  const auto gate = t.segment(2, Site::mlp_gate), data = t.segment(2, Site::mlp_data);
  for (std::size_t i = 0; i < gate.size(); ++i)
    EXPECT_EQ(z[1][static_cast<Eigen::Index>(i)], static_cast<double>(gate[i]) * static_cast<double>(data[i]));
}
