#pragma once

// JSON encoding for "glitchlab-report/1". Matrices travel as base64 f32
// blobs ({rows, cols, f32}); everything else is plain JSON. Timings are kept
// out of the report payload so identical runs give identical bytes.

#include <nlohmann/json.hpp>

#include <fstream>

#include "glitchlab/binary_io.hpp"
#include "glitchlab/detect.hpp"
#include "glitchlab/diagnostics.hpp"
#include "glitchlab/repair.hpp"

namespace glitchlab {

inline constexpr std::string_view kReportFormat = "glitchlab-report/1";

using ojson = nlohmann::ordered_json;

inline ojson blob_to_json(const Eigen::MatrixXd& m) {
  ojson j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["f32"] = bin::encode_f32(m);
  return j;
}

inline Eigen::MatrixXd blob_from_json(const nlohmann::json& j) {
  return bin::decode_f32(j.at("f32").get<std::string>(), j.at("rows").get<Eigen::Index>(),
                         j.at("cols").get<Eigen::Index>());
}

inline ojson sites_to_json(std::span<const Site> sites) {
  ojson a = ojson::array();
  for (Site s : sites) a.push_back(std::string(to_string(s)));
  return a;
}

inline std::vector<Site> sites_from_json(const nlohmann::json& j) {
  std::vector<Site> out;
  for (const auto& s : j) out.push_back(parse_site(s.get<std::string>()));
  return canonical_sites(std::move(out));
}

inline ojson to_json(const PcaModel& m) {
  ojson j;
  j["dim"] = m.dim();
  j["mean"] = blob_to_json(m.mean.transpose());
  j["components"] = blob_to_json(m.components);
  j["explained_variance"] = blob_to_json(m.explained_variance.transpose());
  return j;
}

inline PcaModel pca_from_json(const nlohmann::json& j) {
  PcaModel m;
  m.mean = blob_from_json(j.at("mean")).transpose();
  m.components = blob_from_json(j.at("components"));
  m.explained_variance = blob_from_json(j.at("explained_variance")).transpose();
  return m;
}

inline ojson to_json(const SvmParams& p) {
  ojson j;
  j["C"] = p.C;
  j["degree"] = p.degree;
  j["kernel_scale"] = p.kernel_scale ? ojson(*p.kernel_scale) : ojson(nullptr);
  j["kernel_offset"] = p.kernel_offset;
  j["tolerance"] = p.tolerance;
  j["max_iters"] = p.max_iters;
  j["glitch_weight"] = p.glitch_weight;
  return j;
}

inline SvmParams svm_params_from_json(const nlohmann::json& j) {
  SvmParams p;
  p.C = j.at("C").get<double>();
  p.degree = j.at("degree").get<int>();
  if (!j.at("kernel_scale").is_null()) p.kernel_scale = j.at("kernel_scale").get<double>();
  p.kernel_offset = j.at("kernel_offset").get<double>();
  p.tolerance = j.at("tolerance").get<double>();
  p.max_iters = j.at("max_iters").get<std::size_t>();
  p.glitch_weight = j.at("glitch_weight").get<double>();
  return p;
}

/// The dual coefficients and bias are stored as f64 (JSON numbers) so the
/// decision function survives the round trip exactly; support vectors are
/// f32 blobs of values that were computed in double.
inline ojson to_json(const SvmModel& m) {
  ojson j;
  j["params"] = to_json(m.params);
  j["support_vectors"] = blob_to_json(m.support_vectors);
  j["dual_coefs"] = std::vector<double>(m.dual_coefs.begin(), m.dual_coefs.end());
  j["bias"] = m.bias;
  j["iterations"] = m.iterations;
  j["converged"] = m.converged;
  return j;
}

inline SvmModel svm_from_json(const nlohmann::json& j) {
  SvmModel m;
  m.params = svm_params_from_json(j.at("params"));
  m.support_vectors = blob_from_json(j.at("support_vectors"));
  const auto coefs = j.at("dual_coefs").get<std::vector<double>>();
  m.dual_coefs = Eigen::Map<const Eigen::VectorXd>(coefs.data(), static_cast<Eigen::Index>(coefs.size()));
  m.bias = j.at("bias").get<double>();
  m.iterations = j.at("iterations").get<std::size_t>();
  m.converged = j.at("converged").get<bool>();
  return m;
}

inline ojson to_json(const Metrics& m) {
  ojson j;
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["fn"] = m.fn;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  return j;
}

inline Metrics metrics_from_json(const nlohmann::json& j) {
  return {j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(), j.at("fn").get<std::size_t>(),
          j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

inline ojson timings_to_json(const std::map<std::string, double>& t) {
  ojson j = ojson::object();
  for (const auto& [k, v] : t) j[k] = v;
  return j;
}

inline ojson to_json(const DetectionReport& r) {
  ojson j;
  j["method"] = r.method;
  j["vocab_size"] = r.vocab_size;
  j["glitch_count"] = r.glitch_set.size();
  j["normal_count"] = r.normal_set.size();
  j["oracle_calls"] = r.oracle_calls;
  j["validated"] = r.validated;
  j["fallback"] = r.fallback;
  j["pca_dim_requested"] = r.pca_dim_requested;
  j["pca_dim_used"] = r.pca_dim_used;
  j["feature_width"] = r.feature_width;
  j["metrics"] = r.metrics ? to_json(*r.metrics) : ojson(nullptr);
  j["unvalidated_metrics"] = r.unvalidated_metrics ? to_json(*r.unvalidated_metrics) : ojson(nullptr);
  j["glitch_set"] = r.glitch_set;
  j["normal_set"] = r.normal_set;
  j["sampled"] = r.sampled;
  j["predicted_glitch"] = r.predicted_glitch;
  j["pca"] = r.pca ? to_json(*r.pca) : ojson(nullptr);
  j["svm"] = r.svm ? to_json(*r.svm) : ojson(nullptr);
  j["warnings"] = r.warnings;
  return j;
}

inline DetectionReport detection_from_json(const nlohmann::json& j) {
  DetectionReport r;
  r.method = j.at("method").get<std::string>();
  r.vocab_size = j.at("vocab_size").get<std::size_t>();
  r.oracle_calls = j.at("oracle_calls").get<std::size_t>();
  r.validated = j.at("validated").get<bool>();
  r.fallback = j.at("fallback").get<bool>();
  r.pca_dim_requested = j.at("pca_dim_requested").get<std::size_t>();
  r.pca_dim_used = j.at("pca_dim_used").get<std::size_t>();
  r.feature_width = j.at("feature_width").get<std::size_t>();
  if (!j.at("metrics").is_null()) r.metrics = metrics_from_json(j.at("metrics"));
  if (!j.at("unvalidated_metrics").is_null()) r.unvalidated_metrics = metrics_from_json(j.at("unvalidated_metrics"));
  r.glitch_set = j.at("glitch_set").get<std::vector<TokenId>>();
  r.normal_set = j.at("normal_set").get<std::vector<TokenId>>();
  r.sampled = j.at("sampled").get<std::vector<TokenId>>();
  r.predicted_glitch = j.at("predicted_glitch").get<std::vector<TokenId>>();
  if (!j.at("pca").is_null()) r.pca = pca_from_json(j.at("pca"));
  if (!j.at("svm").is_null()) r.svm = svm_from_json(j.at("svm"));
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

inline ojson to_json(const NeuronProfile& p) {
  ojson j;
  j["m"] = p.m;
  j["up_quota"] = p.up_quota;
  j["sample_ids"] = p.sample_ids;
  ojson layers = ojson::array();
  for (const auto& l : p.layers) {
    ojson lj;
    lj["layer"] = l.layer;
    lj["up"] = l.up;
    lj["down"] = l.down;
    lj["normal_mean"] = blob_to_json(l.normal_mean.transpose());
    layers.push_back(lj);
  }
  j["layers"] = layers;
  return j;
}

inline NeuronProfile profile_from_json(const nlohmann::json& j) {
  NeuronProfile p;
  p.m = j.at("m").get<double>();
  p.up_quota = j.at("up_quota").get<double>();
  p.sample_ids = j.at("sample_ids").get<std::vector<TokenId>>();
  for (const auto& lj : j.at("layers")) {
    LayerProfile l;
    l.layer = lj.at("layer").get<std::size_t>();
    l.up = lj.at("up").get<std::vector<std::size_t>>();
    l.down = lj.at("down").get<std::vector<std::size_t>>();
    l.normal_mean = blob_from_json(lj.at("normal_mean")).transpose();
    p.layers.push_back(std::move(l));
  }
  return p;
}

inline ojson to_json(const AdjustmentFactors& f) {
  ojson j;
  j["alpha"] = f.alpha;
  j["beta"] = f.beta;
  j["delta_up"] = f.delta_up;
  j["delta_down"] = f.delta_down;
  j["k1"] = f.coefficients.k1;
  j["b1"] = f.coefficients.b1;
  j["k2"] = f.coefficients.k2;
  j["b2"] = f.coefficients.b2;
  return j;
}

inline AdjustmentFactors factors_from_json(const nlohmann::json& j) {
  AdjustmentFactors f;
  f.alpha = j.at("alpha").get<double>();
  f.beta = j.at("beta").get<double>();
  f.delta_up = j.at("delta_up").get<double>();
  f.delta_down = j.at("delta_down").get<double>();
  f.coefficients = {j.at("k1").get<double>(), j.at("b1").get<double>(), j.at("k2").get<double>(),
                    j.at("b2").get<double>()};
  return f;
}

inline ojson to_json(const RepairReport& r) {
  ojson j;
  j["method"] = r.method;
  j["factors"] = to_json(r.factors);
  j["repaired_tokens"] = r.repaired_tokens;
  j["total_glitch"] = r.total_glitch;
  j["repair_rate"] = r.repair_rate ? ojson(*r.repair_rate) : ojson(nullptr);
  ojson recs = ojson::array();
  for (const auto& rec : r.records) {
    ojson rj;
    rj["token"] = rec.token;
    rj["before"] = rec.before;
    rj["after"] = rec.after;
    rj["repaired"] = rec.repaired;
    recs.push_back(rj);
  }
  j["records"] = recs;
  return j;
}

inline RepairReport repair_from_json(const nlohmann::json& j) {
  RepairReport r;
  r.method = j.at("method").get<std::string>();
  r.factors = factors_from_json(j.at("factors"));
  r.repaired_tokens = j.at("repaired_tokens").get<std::size_t>();
  r.total_glitch = j.at("total_glitch").get<std::size_t>();
  if (!j.at("repair_rate").is_null()) r.repair_rate = j.at("repair_rate").get<double>();
  for (const auto& rj : j.at("records"))
    r.records.push_back({rj.at("token").get<TokenId>(), rj.at("before").get<std::vector<TokenId>>(),
                         rj.at("after").get<std::vector<TokenId>>(), rj.at("repaired").get<bool>()});
  return r;
}

inline ojson to_json(const LayerDistanceProfile& p) {
  ojson j;
  j["n_layers"] = p.n_layers;
  ojson e = ojson::array();
  for (const auto& d : p.entries) {
    ojson dj;
    dj["layer"] = d.layer;
    dj["site"] = std::string(to_string(d.site));
    dj["wasserstein1"] = d.distance;
    e.push_back(dj);
  }
  j["entries"] = e;
  j["suggested_key_layers"] = p.suggested;
  return j;
}

inline ojson to_json(const SweepRow& r) {
  ojson j;
  j["sites"] = sites_to_json(r.cell.sites);
  j["C"] = r.cell.C;
  j["degree"] = r.cell.degree;
  j["f1_validated"] = r.validated.f1;
  j["f1_unvalidated"] = r.unvalidated.f1;
  j["validated"] = to_json(r.validated);
  j["unvalidated"] = to_json(r.unvalidated);
  j["oracle_calls"] = r.oracle_calls;
  j["pca_dim_used"] = r.pca_dim_used;
  j["fallback"] = r.fallback;
  return j;
}

/// Report envelope: {format, command, manifest, ...sections}.
inline ojson make_report(std::string_view command, const ojson& manifest) {
  ojson j;
  j["format"] = kReportFormat;
  j["command"] = command;
  j["manifest"] = manifest;
  return j;
}

inline void check_report_format(const nlohmann::json& j) {
  if (!j.contains("format") || j.at("format") != kReportFormat)
    throw FormatError("unsupported report format", 0);
}

inline void write_json(const std::string& path, const ojson& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write failed for '" + path + "'");
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("invalid JSON in '") + path + "': " + e.what(), e.byte);
  }
}

}  // namespace glitchlab
