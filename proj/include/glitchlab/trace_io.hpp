#pragma once

// "glitchlab-trace/1" container:
//
//   "glitchlab-trace/1\n"
//   u64  header length, then JSON header
//        {format, vocab_size, has_labels, record_count, width,
//         site_layout: [{layer, site, offset, length}, ...]}
//   record_count records of: u32 token, u8 label (0 Normal, 1 Glitch,
//                            255 absent), width x f32
//
// Little-endian throughout. Every trace file gets a plain-text companion
// "<path>.layout.txt" describing the same layout.

#include <nlohmann/json.hpp>

#include <fstream>

#include "glitchlab/binary_io.hpp"
#include "glitchlab/features.hpp"

namespace glitchlab {

inline constexpr std::string_view kTraceFormat = "glitchlab-trace/1";

inline nlohmann::ordered_json layout_to_json(const SiteLayout& layout) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& s : layout.slots) {
    nlohmann::ordered_json j;
    j["layer"] = s.layer;
    j["site"] = std::string(to_string(s.site));
    j["offset"] = s.offset;
    j["length"] = s.length;
    arr.push_back(j);
  }
  return arr;
}

inline SiteLayout layout_from_json(const nlohmann::json& arr) {
  SiteLayout layout;
  for (const auto& j : arr)
    layout.slots.push_back({j.at("layer").get<std::size_t>(), parse_site(j.at("site").get<std::string>()),
                            j.at("offset").get<std::size_t>(), j.at("length").get<std::size_t>()});
  layout.validate();
  return layout;
}

inline std::string layout_descriptor(const SiteLayout& layout, std::size_t vocab_size) {
  std::ostringstream os;
  os << kTraceFormat << '\n'
     << "vocab_size " << vocab_size << '\n'
     << "width " << layout.width() << '\n'
     << "layer site offset length\n";
  for (const auto& s : layout.slots)
    os << s.layer << ' ' << to_string(s.site) << ' ' << s.offset << ' ' << s.length << '\n';
  return os.str();
}

inline void write_traces(std::ostream& os, std::span<const ActivationTrace> traces, std::size_t vocab_size) {
  if (traces.empty()) throw std::invalid_argument("write_traces: no traces");
  const SiteLayout& layout = traces.front().layout;
  layout.validate();
  const bool has_labels = std::any_of(traces.begin(), traces.end(), [](const auto& t) { return t.label.has_value(); });
  for (const auto& t : traces) {
    if (!(t.layout == layout) || t.values.size() != layout.width())
      throw std::invalid_argument("write_traces: heterogeneous trace layouts");
    if (t.token >= vocab_size) throw std::invalid_argument("write_traces: token id exceeds vocab_size");
  }

  nlohmann::ordered_json h;
  h["format"] = kTraceFormat;
  h["vocab_size"] = vocab_size;
  h["has_labels"] = has_labels;
  h["record_count"] = traces.size();
  h["width"] = layout.width();
  h["site_layout"] = layout_to_json(layout);
  const std::string header = h.dump();

  bin::put_bytes(os, kTraceFormat);
  bin::put_bytes(os, "\n");
  bin::put<std::uint64_t>(os, header.size());
  bin::put_bytes(os, header);
  for (const auto& t : traces) {
    bin::put<std::uint32_t>(os, t.token);
    bin::put<std::uint8_t>(os, t.label ? static_cast<std::uint8_t>(*t.label) : std::uint8_t{255});
    for (float v : t.values) bin::put(os, v);
  }
}

struct TraceFile {
  std::size_t vocab_size = 0;
  bool has_labels = false;
  SiteLayout layout;
  std::vector<ActivationTrace> traces;
};

inline TraceFile read_traces(std::istream& is) {
  bin::Reader r(is);
  const std::string magic = r.get_line(64, "format line");
  if (magic != kTraceFormat) throw FormatError("unsupported trace format '" + magic + "'", 0);
  const std::uint64_t header_at = r.offset();
  const auto header_len = r.get<std::uint64_t>("header length");
  if (header_len > (std::uint64_t{1} << 30)) throw FormatError("implausible header length", header_at);
  TraceFile f;
  std::size_t count = 0;
  try {
    const auto h = nlohmann::json::parse(r.get_string(header_len, "header"));
    if (h.at("format").get<std::string>() != kTraceFormat) throw std::invalid_argument("header format mismatch");
    f.vocab_size = h.at("vocab_size").get<std::size_t>();
    f.has_labels = h.at("has_labels").get<bool>();
    count = h.at("record_count").get<std::size_t>();
    f.layout = layout_from_json(h.at("site_layout"));
    if (h.at("width").get<std::size_t>() != f.layout.width())
      throw std::invalid_argument("width does not match site_layout");
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("bad trace header: ") + e.what(), header_at);
  }

  const std::size_t width = f.layout.width();
  f.traces.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t at = r.offset();
    ActivationTrace t;
    t.token = r.get<std::uint32_t>("record token");
    if (t.token >= f.vocab_size) throw FormatError("record token id exceeds vocab_size", at);
    const auto label = r.get<std::uint8_t>("record label");
    if (label == 0 || label == 1) {
      t.label = static_cast<Label>(label);
    } else if (label != 255) {
      throw FormatError("invalid record label", at + 4);
    }
    if (t.label && !f.has_labels) throw FormatError("labelled record in unlabelled file", at + 4);
    t.layout = f.layout;
    t.values.resize(width);
    for (auto& v : t.values) v = r.get<float>("record values");
    f.traces.push_back(std::move(t));
  }
  if (!r.at_end()) throw FormatError("record length mismatch: trailing bytes", r.offset());
  return f;
}

inline void write_traces(const std::string& path, std::span<const ActivationTrace> traces, std::size_t vocab_size) {
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_traces(os, traces, vocab_size);
    if (!os) throw IoError("write failed for '" + path + "'");
  }
  std::ofstream desc(path + ".layout.txt", std::ios::binary);
  if (!desc) throw IoError("cannot open '" + path + ".layout.txt' for writing");
  desc << layout_descriptor(traces.front().layout, vocab_size);
}

inline TraceFile read_traces(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_traces(is);
}

}  // namespace glitchlab
