#pragma once

// The glitchlab command-line tool, kept in a header so tests can drive it
// in-process. Needs CLI11 on the include path.
//
// Exit codes: 0 ok, 1 unexpected error, 2 config, 3 io/format,
// 4 verification (synthetic construction), 5 degenerate-data fallback taken.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "glitchlab/config.hpp"
#include "glitchlab/trace_io.hpp"

namespace glitchlab::cli {

enum ExitCode : int { kOk = 0, kUnexpected = 1, kConfig = 2, kIo = 3, kVerification = 4, kDegenerate = 5 };

/// Command-line overrides applied on top of the config file.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out_dir;
  std::optional<double> gamma;
  std::optional<std::size_t> pca_dim;
  std::optional<double> svm_c;
  std::optional<int> svm_degree;
  std::optional<double> threshold_m;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<std::string> key_layers;
  std::optional<std::string> model_path;
  std::optional<std::string> trace_path;
};

inline RunConfig resolve_config(const Overrides& o) {
  RunConfig c = o.config_path.empty() ? parse_run_config(nlohmann::json::object()) : load_run_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.workers) c.workers = *o.workers;
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (o.gamma) c.detection.gamma = *o.gamma;
  if (o.pca_dim) c.detection.pca_dim = *o.pca_dim;
  if (o.svm_c) c.detection.svm.C = *o.svm_c;
  if (o.svm_degree) c.detection.svm.degree = *o.svm_degree;
  if (o.threshold_m) c.repair.threshold_m = *o.threshold_m;
  if (o.alpha) c.repair.alpha = *o.alpha;
  if (o.beta) c.repair.beta = *o.beta;
  if (o.key_layers) c.detection.key_layers = parse_key_layers(*o.key_layers);
  if (o.model_path) c.model_path = *o.model_path;
  if (o.trace_path) c.trace_path = *o.trace_path;
  c.validate();
  return c;
}

namespace detail {

struct Context {
  RunConfig cfg;
  std::ostream& out;
  std::filesystem::path dir;
  std::map<std::string, double> timings;
  std::chrono::steady_clock::time_point last = std::chrono::steady_clock::now();

  void lap(const std::string& phase) {
    const auto now = std::chrono::steady_clock::now();
    timings[phase] += std::chrono::duration<double>(now - last).count();
    last = now;
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

inline std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

inline std::string fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

inline TransformerModel acquire_model(Context& ctx) {
  TransformerModel m;
  if (ctx.cfg.model_path) {
    m = load_model(*ctx.cfg.model_path);
  } else {
    const auto& s = ctx.cfg.scenario;
    m = synth_copy_model(s.model, s.n_glitch, s.corruption_scale, ctx.cfg.seed, {}, ctx.cfg.workers);
  }
  ctx.lap("model");
  return m;
}

inline ojson manifest(const Context& ctx, const TransformerModel* model) {
  ojson j = to_json(ctx.cfg);
  if (model) {
    j["model"] = config_to_json(model->config);
    j["resolved_key_layers"] = ctx.cfg.detection.key_layers.resolve(model->config.n_layers).layers;
  }
  return j;
}

inline void finish(Context& ctx, ojson report) {
  write_json(ctx.path("report.json"), report);
  write_json(ctx.path("timings.json"), timings_to_json(ctx.timings));
}

/// Ground-truth glitch ids: a verdict file when configured, else an exhaustive scan.
inline std::vector<TokenId> ground_truth(Context& ctx, const TransformerModel& m, ojson& report,
                                         std::vector<OracleVerdict>* verdicts_out = nullptr) {
  std::vector<OracleVerdict> verdicts;
  std::string source;
  if (ctx.cfg.verdicts_path) {
    verdicts = read_verdicts(*ctx.cfg.verdicts_path);
    source = "verdicts_file";
  } else {
    exhaustive_scan(m, ctx.cfg.workers, ctx.cfg.echo_budget, &verdicts);
    source = "exhaustive_scan";
  }
  std::vector<TokenId> truth = glitch_ids(verdicts);
  ojson g;
  g["source"] = source;
  g["glitch_count"] = truth.size();
  if (m.planted_glitch_set) g["matches_planted"] = (*m.planted_glitch_set == truth);
  report["ground_truth"] = g;
  ctx.lap("ground_truth");
  if (verdicts_out) *verdicts_out = std::move(verdicts);
  return truth;
}

inline DetectionConfig detection_config(const RunConfig& c, std::size_t n_layers) {
  DetectionConfig d;
  d.gamma = c.detection.gamma;
  d.pca_dim = c.detection.pca_dim;
  d.key_layers = c.detection.key_layers.resolve(n_layers);
  d.sites = c.detection.sites;
  d.svm = c.detection.svm;
  d.rng_seed = c.seed;
  d.post_validate = c.detection.post_validate;
  d.workers = c.workers;
  return d;
}

inline void print_detection_table(std::ostream& out, std::span<const DetectionReport* const> rows) {
  out << pad("method", 14) << pad("TP", 7) << pad("precision", 11) << pad("recall", 10) << pad("F1", 8)
      << "oracle_calls\n";
  for (const DetectionReport* r : rows) {
    if (!r->metrics) continue;
    out << pad(r->method, 14) << pad(std::to_string(r->metrics->tp), 7) << pad(pct(r->metrics->precision), 11)
        << pad(pct(r->metrics->recall), 10) << pad(fixed(r->metrics->f1, 4), 8) << r->oracle_calls << '\n';
  }
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_synth(Context& ctx) {
  const auto& s = ctx.cfg.scenario;
  const TransformerModel m = synth_copy_model(s.model, s.n_glitch, s.corruption_scale, ctx.cfg.seed, {}, ctx.cfg.workers);
  ctx.lap("synthesize");
  save_model(ctx.path("model.glm"), m);
  ctx.lap("write");
  ojson r = make_report("synth", manifest(ctx, &m));
  ojson sj;
  sj["model_file"] = "model.glm";
  sj["planted_count"] = m.planted_glitch_set->size();
  sj["planted_glitch_set"] = *m.planted_glitch_set;
  sj["verified"] = true;
  r["synth"] = sj;
  finish(ctx, r);
  ctx.out << "synthesized model: vocab " << m.config.vocab_size << ", planted " << m.planted_glitch_set->size()
          << " glitch tokens (verified by exhaustive oracle scan)\n";
  return kOk;
}

inline int cmd_scan(Context& ctx) {
  const TransformerModel m = acquire_model(ctx);
  std::vector<OracleVerdict> verdicts;
  DetectionReport rep = exhaustive_scan(m, ctx.cfg.workers, ctx.cfg.echo_budget, &verdicts);
  ctx.lap("scan");
  write_verdicts(ctx.path("verdicts.jsonl"), verdicts);
  ojson r = make_report("scan", manifest(ctx, &m));
  r["scan"] = to_json(rep);
  if (m.planted_glitch_set) r["scan"]["matches_planted"] = (*m.planted_glitch_set == rep.glitch_set);
  finish(ctx, r);
  ctx.out << "exhaustive scan: " << rep.glitch_set.size() << " glitch / " << rep.normal_set.size()
          << " normal, oracle_calls " << rep.oracle_calls << '\n';
  return kOk;
}

inline int detect_from_traces(Context& ctx) {
  const TraceFile tf = read_traces(*ctx.cfg.trace_path);
  ctx.lap("read_traces");
  const std::vector<std::size_t> layers = tf.layout.layers();
  DetectionConfig d;
  d.gamma = ctx.cfg.detection.gamma;
  d.pca_dim = ctx.cfg.detection.pca_dim;
  d.key_layers.layers = layers;
  d.sites = ctx.cfg.detection.sites;
  d.svm = ctx.cfg.detection.svm;
  d.rng_seed = ctx.cfg.seed;
  d.post_validate = ctx.cfg.detection.post_validate;
  d.workers = ctx.cfg.workers;
  const DetectionSource src = trace_source(tf.traces, d.sites);

  std::optional<std::vector<TokenId>> truth;
  if (std::all_of(tf.traces.begin(), tf.traces.end(), [](const auto& t) { return t.label.has_value(); })) {
    truth.emplace();
    for (const auto& t : tf.traces)
      if (*t.label == Label::Glitch) truth->push_back(t.token);
    std::sort(truth->begin(), truth->end());
  }
  const DetectionReport rep =
      truth ? detect(src, d, std::span<const TokenId>(*truth)) : detect(src, d);
  ctx.lap("detect");
  ojson man = manifest(ctx, nullptr);
  man["trace_layout"] = layout_to_json(tf.layout);
  ojson r = make_report("detect", man);
  r["detection"] = to_json(rep);
  finish(ctx, r);
  const DetectionReport* rows[] = {&rep};
  print_detection_table(ctx.out, rows);
  for (const auto& w : rep.warnings) ctx.out << "warning: " << w << '\n';
  return rep.fallback ? kDegenerate : kOk;
}

inline int cmd_detect(Context& ctx) {
  if (ctx.cfg.trace_path) return detect_from_traces(ctx);
  const TransformerModel m = acquire_model(ctx);
  ojson r = make_report("detect", manifest(ctx, &m));
  const std::vector<TokenId> truth = ground_truth(ctx, m, r);
  const DetectionConfig d = detection_config(ctx.cfg, m.config.n_layers);
  const DetectionReport rep = detect(model_source(m, d.key_layers, d.sites, ctx.cfg.echo_budget), d,
                                     std::span<const TokenId>(truth));
  ctx.lap("detect");
  r["detection"] = to_json(rep);

  std::optional<DetectionReport> rule;
  if (!m.tokens.display.empty()) {
    rule = rule_based_baseline(m.config.vocab_size, m.tokens.display, default_stopwords(), ctx.cfg.seed,
                               std::span<const TokenId>(truth));
    r["rule_based"] = to_json(*rule);
  }
  finish(ctx, r);

  std::vector<const DetectionReport*> rows = {&rep};
  if (rule) rows.push_back(&*rule);
  print_detection_table(ctx.out, rows);
  for (const auto& w : rep.warnings) ctx.out << "warning: " << w << '\n';
  return rep.fallback ? kDegenerate : kOk;
}

inline int cmd_export_traces(Context& ctx) {
  const TransformerModel m = acquire_model(ctx);
  std::vector<OracleVerdict> verdicts;
  ojson r = make_report("export-traces", manifest(ctx, &m));
  ground_truth(ctx, m, r, &verdicts);
  const KeyLayerSet kl = ctx.cfg.detection.key_layers.resolve(m.config.n_layers);
  std::vector<TokenId> vocab(m.config.vocab_size);
  for (std::size_t i = 0; i < vocab.size(); ++i) vocab[i] = static_cast<TokenId>(i);
  std::vector<ActivationTrace> traces = extract_all(m, vocab, kl, ctx.cfg.detection.sites, ctx.cfg.workers);
  std::unordered_map<TokenId, Label> labels;
  for (const auto& v : verdicts) labels.emplace(v.token, v.label);
  for (auto& t : traces)
    if (auto it = labels.find(t.token); it != labels.end()) t.label = it->second;
  ctx.lap("extract");
  write_traces(ctx.path("traces.glt"), traces, m.config.vocab_size);
  ctx.lap("write");
  ojson e;
  e["trace_file"] = "traces.glt";
  e["layout_file"] = "traces.glt.layout.txt";
  e["record_count"] = traces.size();
  e["width"] = traces.front().layout.width();
  e["site_layout"] = layout_to_json(traces.front().layout);
  r["export"] = e;
  finish(ctx, r);
  ctx.out << "exported " << traces.size() << " traces of width " << traces.front().layout.width() << '\n';
  return kOk;
}

inline int cmd_repair(Context& ctx) {
  const TransformerModel m = acquire_model(ctx);
  ojson r = make_report("repair", manifest(ctx, &m));
  const std::vector<TokenId> truth = ground_truth(ctx, m, r);
  const DetectionConfig d = detection_config(ctx.cfg, m.config.n_layers);
  const RepairSettings& rs = ctx.cfg.repair;
  int code = kOk;

  std::vector<TokenId> glitch, normal;
  if (rs.glitch_source == GlitchSource::detect) {
    const DetectionReport rep = detect(model_source(m, d.key_layers, d.sites, ctx.cfg.echo_budget), d,
                                       std::span<const TokenId>(truth));
    if (rep.fallback) code = kDegenerate;
    r["detection"] = to_json(rep);
    glitch = rep.glitch_set;
    normal = rep.normal_set;
    ctx.lap("detect");
  } else {
    glitch = truth;
    std::vector<TokenId> vocab(m.config.vocab_size);
    for (std::size_t i = 0; i < vocab.size(); ++i) vocab[i] = static_cast<TokenId>(i);
    std::set_difference(vocab.begin(), vocab.end(), glitch.begin(), glitch.end(), std::back_inserter(normal));
  }

  const NeuronProfile profile = profile_normal(m, normal, rs.gamma, rs.threshold_m, d.key_layers, ctx.cfg.seed,
                                               rs.up_quota, ctx.cfg.workers);
  ctx.lap("profile");
  r["profile"] = to_json(profile);

  AdjustmentFactors factors;
  std::vector<std::string> warnings;
  if (glitch.empty()) {
    warnings.push_back("empty glitch set: repair not applicable");
  } else if (profile.degenerate()) {
    warnings.push_back("degenerate neuron profile: repair is the identity");
    code = kDegenerate;
  } else {
    std::vector<TokenId> glitch_sample;
    const auto acts = sample_glitch_activations(m, glitch, rs.gamma, d.key_layers, ctx.cfg.seed, ctx.cfg.workers,
                                                &glitch_sample);
    factors = compute_adjustments(profile, acts, rs.coefficients);
    r["glitch_sample"] = glitch_sample;
  }
  factors.coefficients = rs.coefficients;
  if (rs.alpha) factors.alpha = *rs.alpha;
  if (rs.beta) factors.beta = *rs.beta;
  ctx.lap("adjust");

  RepairReport adaptive = repair_all(m, glitch, profile, factors, ctx.cfg.workers, ctx.cfg.echo_budget);
  adaptive.method = (rs.alpha || rs.beta) ? "override" : "adaptive";
  RepairReport rule = repair_all(m, glitch, profile, rule_based_factors(), ctx.cfg.workers, ctx.cfg.echo_budget);
  rule.method = "rule_based";
  ctx.lap("repair");
  r["repair"] = to_json(adaptive);
  r["rule_based"] = to_json(rule);
  r["warnings"] = warnings;
  finish(ctx, r);

  ctx.out << pad("method", 12) << pad("alpha", 8) << pad("beta", 8) << pad("repaired", 10) << pad("total", 7)
          << "repair_rate\n";
  for (const RepairReport* rep : {&adaptive, &rule})
    ctx.out << pad(rep->method, 12) << pad(fixed(rep->factors.alpha, 2), 8) << pad(fixed(rep->factors.beta, 2), 8)
            << pad(std::to_string(rep->repaired_tokens), 10) << pad(std::to_string(rep->total_glitch), 7)
            << (rep->repair_rate ? pct(*rep->repair_rate) : std::string("n/a")) << '\n';
  for (const auto& w : warnings) ctx.out << "warning: " << w << '\n';
  return code;
}

inline int cmd_diagnose(Context& ctx) {
  const TransformerModel m = acquire_model(ctx);
  ojson r = make_report("diagnose", manifest(ctx, &m));
  const std::vector<TokenId> glitch = ground_truth(ctx, m, r);
  std::vector<TokenId> vocab(m.config.vocab_size), normal;
  for (std::size_t i = 0; i < vocab.size(); ++i) vocab[i] = static_cast<TokenId>(i);
  std::set_difference(vocab.begin(), vocab.end(), glitch.begin(), glitch.end(), std::back_inserter(normal));
  if (glitch.empty() || normal.empty()) throw DegenerateDataError("diagnose: need both glitch and normal tokens");

  const KeyLayerSet kl = ctx.cfg.detection.key_layers.resolve(m.config.n_layers);
  const auto gt = extract_all(m, glitch, kl, kAllSites, ctx.cfg.workers);
  const auto nt = extract_all(m, normal, kl, kAllSites, ctx.cfg.workers);
  ctx.lap("extract");
  const AttentionHistograms hist = attention_histograms(gt, nt, ctx.cfg.diagnostics.bin_width);
  const std::vector<ScatterPoint> pts = mlp_scatter(gt, nt, ctx.cfg.diagnostics.scatter_site);
  const LayerDistanceProfile prof = layer_profile(m, glitch, normal, ctx.cfg.workers);
  ctx.lap("diagnose");

  auto open = [&](const std::string& name) {
    std::ofstream os(ctx.path(name), std::ios::binary);
    if (!os) throw IoError("cannot open '" + ctx.path(name) + "' for writing");
    return os;
  };
  {
    auto os = open("attention_histogram.csv");
    write_histogram_csv(os, hist);
  }
  {
    auto os = open("mlp_scatter.csv");
    write_scatter_csv(os, pts);
  }
  {
    auto os = open("layer_profile.csv");
    write_layer_profile_csv(os, prof);
  }
  ojson dj;
  dj["attention_wasserstein1"] = hist.wasserstein;
  dj["scatter_site"] = std::string(to_string(ctx.cfg.diagnostics.scatter_site));
  dj["scatter_spread_glitch"] = cluster_spread(pts, Population::glitch);
  dj["scatter_spread_normal"] = cluster_spread(pts, Population::normal);
  dj["layer_profile"] = to_json(prof);
  dj["files"] = {"attention_histogram.csv", "mlp_scatter.csv", "layer_profile.csv"};
  r["diagnostics"] = dj;
  finish(ctx, r);
  ctx.out << "attention W1 (glitch vs normal): " << format_real(hist.wasserstein) << '\n'
          << "scatter spread: glitch " << format_real(cluster_spread(pts, Population::glitch)) << ", normal "
          << format_real(cluster_spread(pts, Population::normal)) << '\n'
          << "suggested key layers:";
  for (std::size_t l : prof.suggested) ctx.out << ' ' << l;
  ctx.out << '\n';
  return kOk;
}

inline int cmd_sweep(Context& ctx) {
  const TransformerModel m = acquire_model(ctx);
  ojson r = make_report("sweep", manifest(ctx, &m));
  std::vector<OracleVerdict> verdicts;
  ground_truth(ctx, m, r, &verdicts);
  const DetectionConfig d = detection_config(ctx.cfg, m.config.n_layers);
  std::vector<TokenId> vocab(m.config.vocab_size);
  for (std::size_t i = 0; i < vocab.size(); ++i) vocab[i] = static_cast<TokenId>(i);
  const auto traces = extract_all(m, vocab, d.key_layers, kAllSites, ctx.cfg.workers);
  ctx.lap("extract");
  const std::vector<SweepRow> rows = sweep(traces, verdicts, d, ctx.cfg.sweep_grid);
  ctx.lap("sweep");

  ojson arr = ojson::array();
  for (const auto& row : rows) arr.push_back(to_json(row));
  r["sweep"] = arr;
  finish(ctx, r);

  std::ofstream csv(ctx.path("sweep.csv"), std::ios::binary);
  if (!csv) throw IoError("cannot open '" + ctx.path("sweep.csv") + "' for writing");
  csv << "sites,C,degree,f1_validated,f1_unvalidated,precision,recall,oracle_calls\n";
  ctx.out << pad("sites", 36) << pad("C", 6) << pad("degree", 8) << pad("F1", 8) << pad("F1(raw)", 9) << "calls\n";
  for (const auto& row : rows) {
    std::string sites;
    for (Site s : row.cell.sites) sites += (sites.empty() ? "" : "+") + std::string(to_string(s));
    csv << sites << ',' << format_real(row.cell.C) << ',' << row.cell.degree << ',' << format_real(row.validated.f1)
        << ',' << format_real(row.unvalidated.f1) << ',' << format_real(row.validated.precision) << ','
        << format_real(row.validated.recall) << ',' << row.oracle_calls << '\n';
    ctx.out << pad(sites, 36) << pad(fixed(row.cell.C, 1), 6) << pad(std::to_string(row.cell.degree), 8)
            << pad(fixed(row.validated.f1, 4), 8) << pad(fixed(row.unvalidated.f1, 4), 9) << row.oracle_calls << '\n';
  }
  return kOk;
}

}  // namespace detail

/// Parses argv and runs one subcommand. Output goes to `out`, diagnostics to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"glitchlab: glitch-token detection and repair on hookable toy transformers"};
  app.require_subcommand(1);
  Overrides o;

  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(detail::Context&);
  };
  const Cmd cmds[] = {
      {"synth", "build and verify a synthetic copy model", detail::cmd_synth},
      {"scan", "exhaustive oracle scan over the vocabulary", detail::cmd_scan},
      {"detect", "sampled detection with PCA + SVM and post-validation", detail::cmd_detect},
      {"export-traces", "write activation traces for the whole vocabulary", detail::cmd_export_traces},
      {"repair", "profile, derive adjustment factors and patch glitch tokens", detail::cmd_repair},
      {"diagnose", "histograms, MLP scatter and per-layer Wasserstein profile", detail::cmd_diagnose},
      {"sweep", "feature-site x SVM-setting grid", detail::cmd_sweep},
  };
  std::vector<std::pair<CLI::App*, const Cmd*>> subs;
  for (const Cmd& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", o.config_path, "JSON run configuration");
    sub->add_option("--seed", o.seed, "RNG seed");
    sub->add_option("--workers", o.workers, "worker threads (0 = all cores)");
    sub->add_option("--out-dir", o.out_dir, "output directory");
    sub->add_option("--model", o.model_path, "model file (default: synthesize the configured scenario)");
    sub->add_option("--gamma", o.gamma, "detection sample rate");
    sub->add_option("--pca-dim", o.pca_dim, "PCA dimension P");
    sub->add_option("--svm-c", o.svm_c, "SVM regularization C");
    sub->add_option("--svm-degree", o.svm_degree, "SVM polynomial degree");
    sub->add_option("--key-layers", o.key_layers, "'interior', 'downstream_band' or a comma list");
    if (std::string_view(c.name) == "detect") sub->add_option("--traces", o.trace_path, "trace file (trace-only mode)");
    if (std::string_view(c.name) == "repair") {
      sub->add_option("--threshold-m", o.threshold_m, "activation threshold m");
      sub->add_option("--alpha", o.alpha, "override the suppression factor");
      sub->add_option("--beta", o.beta, "override the promotion factor");
    }
    subs.emplace_back(sub, &c);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    RunConfig cfg = resolve_config(o);
    std::filesystem::create_directories(cfg.out_dir);
    for (const auto& [sub, cmd] : subs) {
      if (!sub->parsed()) continue;
      detail::Context ctx{cfg, out, cfg.out_dir, {}, std::chrono::steady_clock::now()};
      return cmd->fn(ctx);
    }
    return kUnexpected;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kIo;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const ConstructionError& e) {
    err << "verification failed: " << e.what() << " (" << e.tokens.size() << " tokens)\n";
    return kVerification;
  } catch (const DegenerateDataError& e) {
    err << "degenerate data: " << e.what() << '\n';
    return kDegenerate;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUnexpected;
  }
}

}  // namespace glitchlab::cli
