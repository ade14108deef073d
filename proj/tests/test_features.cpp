#include <gtest/gtest.h>

#include <sstream>

#include "glitchlab/trace_io.hpp"
#include "support.hpp"

using namespace glitchlab;
using namespace testsupport;

TEST(KeyLayers, DownstreamBandOnThirtyTwoLayers) {
  const KeyLayerSet k = KeyLayerSet::downstream_band(32);
  EXPECT_EQ(k.layers.front(), 19u);
  EXPECT_EQ(k.layers.back(), 28u);
  EXPECT_EQ(k.layers.size(), 10u);
  const KeyLayerSet four = KeyLayerSet::downstream_band(4);
  EXPECT_EQ(four.layers, (std::vector<std::size_t>{2, 3}));
}

TEST(KeyLayers, ExplicitListIsSortedAndChecked) {
  EXPECT_EQ(KeyLayerSet::explicit_layers({2, 1, 2}, 4).layers, (std::vector<std::size_t>{1, 2}));
  EXPECT_THROW(KeyLayerSet::explicit_layers({4}, 4), std::invalid_argument);
  EXPECT_THROW(KeyLayerSet::explicit_layers({}, 4), std::invalid_argument);
}

TEST(Layout, LayerMajorCanonicalSiteOrder) {
  const ModelConfig cfg = reference_config();
  const Site sites[] = {Site::mlp_data, Site::attn_pattern};
  const SiteLayout l = make_layout(KeyLayerSet::explicit_layers({2, 1}, 4), sites, cfg, 6);
  ASSERT_EQ(l.slots.size(), 4u);
  EXPECT_EQ(l.slots[0], (SiteSlot{1, Site::attn_pattern, 0, 24}));
  EXPECT_EQ(l.slots[1], (SiteSlot{1, Site::mlp_data, 24, 64}));
  EXPECT_EQ(l.slots[2], (SiteSlot{2, Site::attn_pattern, 88, 24}));
  EXPECT_EQ(l.slots[3], (SiteSlot{2, Site::mlp_data, 112, 64}));
  EXPECT_EQ(l.width(), 176u);
  EXPECT_EQ(l.layers(), (std::vector<std::size_t>{1, 2}));
  EXPECT_NO_THROW(l.validate());
  const Site none[] = {Site::mlp_gate};
  EXPECT_THROW(make_layout(KeyLayerSet{}, none, cfg, 6), std::invalid_argument);
}

TEST(Extract, ValuesEqualCapturesAtTheLastPromptPosition) {
  const TransformerModel& m = small_model();
  const KeyLayerSet kl = KeyLayerSet::explicit_layers({0, 1, 2}, 3);
  const ActivationTrace t = extract_features(m, 40, kl, kAllSites);
  EXPECT_EQ(t.token, 40u);
  EXPECT_FALSE(t.label);
  std::vector<HookPoint> hooks;
  for (std::size_t l : kl.layers)
    for (Site s : kAllSites) hooks.push_back({l, s});
  const auto prompt = build_repetition_prompt(40, m.tokens.prompt);
  const auto caps = capture_last(m, prompt, hooks);
  for (const auto& c : caps) {
    const auto seg = t.segment(c.layer, c.site);
    ASSERT_EQ(seg.size(), c.values.size());
    for (std::size_t i = 0; i < seg.size(); ++i) EXPECT_EQ(seg[i], static_cast<float>(c.values[i]));
  }
  // Each head's attention row is a distribution over the prompt.
  const auto attn = t.segment(1, Site::attn_pattern);
  for (std::size_t h = 0; h < m.config.n_heads; ++h) {
    double s = 0;
    for (std::size_t j = 0; j < prompt.size(); ++j) s += attn[h * prompt.size() + j];
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Extract, SelectSitesKeepsSegments) {
  const TransformerModel& m = small_model();
  const KeyLayerSet kl = KeyLayerSet::explicit_layers({1}, 3);
  const ActivationTrace full = extract_features(m, 50, kl, kAllSites);
  const Site gate[] = {Site::mlp_gate};
  const ActivationTrace sub = select_sites(full, gate);
  EXPECT_EQ(sub.layout.width(), m.config.d_gate());
  const auto a = sub.segment(1, Site::mlp_gate), b = full.segment(1, Site::mlp_gate);
  EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  EXPECT_THROW(sub.segment(1, Site::mlp_data), std::invalid_argument);
  EXPECT_EQ(extract_features(m, 50, kl, gate), sub);
}

TEST(Extract, ParallelMatchesSerial) {
  const TransformerModel& m = small_model();
  const KeyLayerSet kl = KeyLayerSet::explicit_layers({1}, 3);
  const auto toks = all_tokens(30);
  EXPECT_EQ(extract_all(m, toks, kl, kAllSites, 1), extract_all(m, toks, kl, kAllSites, 4));
}

TEST(Assemble, RowsFollowTracesAndLayoutsMustAgree) {
  const TransformerModel& m = small_model();
  const KeyLayerSet kl = KeyLayerSet::explicit_layers({1}, 3);
  auto traces = extract_all(m, all_tokens(5), kl, kAllSites);
  const FeatureMatrix fm = assemble_matrix(traces);
  EXPECT_EQ(fm.rows(), 5u);
  EXPECT_EQ(fm.cols(), traces[0].layout.width());
  EXPECT_EQ(fm.data.row(3).transpose(), to_vector(traces[3]));
  const Site gate[] = {Site::mlp_gate};
  traces.push_back(select_sites(traces[0], gate));
  EXPECT_THROW(assemble_matrix(traces), std::invalid_argument);
  EXPECT_THROW(assemble_matrix(std::vector<ActivationTrace>{}), std::invalid_argument);
}

namespace {

std::vector<ActivationTrace> labelled_traces() {
  const TransformerModel& m = small_model();
  auto traces = extract_all(m, all_tokens(12), KeyLayerSet::explicit_layers({1}, 3), kAllSites);
  for (auto& t : traces) t.label = t.token % 3 == 0 ? Label::Glitch : Label::Normal;
  return traces;
}

std::string serialized(const std::vector<ActivationTrace>& t) {
  std::stringstream ss;
  write_traces(ss, t, 128);
  return ss.str();
}

}  // namespace

TEST(TraceIo, RoundTripIsExact) {
  const auto traces = labelled_traces();
  std::stringstream ss(serialized(traces));
  const TraceFile f = read_traces(ss);
  EXPECT_EQ(f.vocab_size, 128u);
  EXPECT_TRUE(f.has_labels);
  EXPECT_EQ(f.traces, traces);
  EXPECT_EQ(serialized(f.traces), ss.str());
}

TEST(TraceIo, UnlabelledFileUsesSentinel) {
  auto traces = labelled_traces();
  for (auto& t : traces) t.label.reset();
  std::stringstream ss(serialized(traces));
  const TraceFile f = read_traces(ss);
  EXPECT_FALSE(f.has_labels);
  EXPECT_EQ(f.traces, traces);
}

TEST(TraceIo, CorruptFilesAreRejected) {
  const auto traces = labelled_traces();
  const std::string bytes = serialized(traces);
  const std::size_t width = traces[0].layout.width();
  const std::size_t record = 5 + 4 * width;
  const std::size_t first = bytes.size() - record * traces.size();

  auto expect_bad = [](const std::string& b) {
    std::stringstream ss(b);
    EXPECT_THROW(read_traces(ss), FormatError);
  };
  expect_bad("glitchlab-trace/0" + bytes.substr(bytes.find('\n')));
  expect_bad(bytes.substr(0, bytes.size() - 1));
  expect_bad(bytes + std::string(4, '\0'));

  std::string bad_label = bytes;
  bad_label[first + 4] = 7;
  expect_bad(bad_label);

  std::string bad_token = bytes;
  bad_token[first] = static_cast<char>(200);
  try {
    std::stringstream ss(bad_token);
    read_traces(ss);
    FAIL() << "token beyond vocab accepted";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset, first);
  }
}

TEST(TraceIo, LabelInUnlabelledFileIsRejected) {
  auto traces = labelled_traces();
  for (auto& t : traces) t.label.reset();
  std::string bytes = serialized(traces);
  const std::size_t record = 5 + 4 * traces[0].layout.width();
  bytes[bytes.size() - record + 4] = 1;
  std::stringstream ss(bytes);
  EXPECT_THROW(read_traces(ss), FormatError);
}

TEST(TraceIo, WriterRejectsMixedLayouts) {
  auto traces = labelled_traces();
  const Site gate[] = {Site::mlp_gate};
  traces.push_back(select_sites(traces[0], gate));
  std::stringstream ss;
  EXPECT_THROW(write_traces(ss, traces, 128), std::invalid_argument);
}
