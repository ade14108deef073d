#pragma once

// Little-endian primitives shared by the model and trace containers, plus
// base64 for float blobs embedded in JSON reports.

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>

#include "glitchlab/common.hpp"

namespace glitchlab::bin {

template <typename T>
void put(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline void put_f32(std::ostream& os, double v) { put(os, static_cast<float>(v)); }

inline void put_bytes(std::ostream& os, std::string_view s) {
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

/// Reader that tracks its byte offset and reports truncation as FormatError.
class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  std::uint64_t offset() const { return offset_; }

  void read(char* dst, std::size_t n, const char* what) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n)
      throw FormatError(std::string("truncated ") + what, offset_ + static_cast<std::uint64_t>(is_.gcount()));
    offset_ += n;
  }

  template <typename T>
  T get(const char* what) {
    std::array<char, sizeof(T)> bytes;
    read(bytes.data(), bytes.size(), what);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T v;
    std::memcpy(&v, bytes.data(), sizeof(T));
    return v;
  }

  std::string get_string(std::size_t n, const char* what) {
    std::string s(n, '\0');
    if (n) read(s.data(), n, what);
    return s;
  }

  std::string get_line(std::size_t max_len, const char* what) {
    std::string s;
    for (;;) {
      const char c = get<char>(what);
      if (c == '\n') return s;
      if (s.size() >= max_len) throw FormatError(std::string("unterminated ") + what, offset_);
      s.push_back(c);
    }
  }

  bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& is_;
  std::uint64_t offset_ = 0;
};

// ---------------------------------------------------------------------------
// base64 (RFC 4648, padded)

inline std::string base64_encode(std::span<const unsigned char> data) {
  static constexpr char alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= data.size(); i += 3) {
    const std::uint32_t v = (std::uint32_t{data[i]} << 16) | (std::uint32_t{data[i + 1]} << 8) | data[i + 2];
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += alphabet[(v >> 6) & 63];
    out += alphabet[v & 63];
  }
  if (const std::size_t rest = data.size() - i; rest > 0) {
    std::uint32_t v = std::uint32_t{data[i]} << 16;
    if (rest == 2) v |= std::uint32_t{data[i + 1]} << 8;
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += rest == 2 ? alphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

inline std::vector<unsigned char> base64_decode(std::string_view text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) throw std::invalid_argument("base64: length not a multiple of 4");
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + static_cast<std::size_t>(k)];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
      } else if (pad > 0 || (v[k] = value(c)) < 0) {
        throw std::invalid_argument("base64: invalid character");
      }
    }
    const std::uint32_t n = (std::uint32_t(v[0]) << 18) | (std::uint32_t(v[1]) << 12) |
                            (std::uint32_t(v[2]) << 6) | std::uint32_t(v[3]);
    out.push_back(static_cast<unsigned char>(n >> 16));
    if (pad < 2) out.push_back(static_cast<unsigned char>((n >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<unsigned char>(n & 0xff));
  }
  return out;
}

/// Row-major f32 little-endian bytes of a matrix, base64 encoded.
inline std::string encode_f32(const Eigen::MatrixXd& m) {
  std::vector<unsigned char> bytes;
  bytes.reserve(static_cast<std::size_t>(m.size()) * 4);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c)));
      for (int k = 0; k < 4; ++k) bytes.push_back(static_cast<unsigned char>((u >> (8 * k)) & 0xff));
    }
  return base64_encode(bytes);
}

inline Eigen::MatrixXd decode_f32(std::string_view text, Eigen::Index rows, Eigen::Index cols) {
  const std::vector<unsigned char> bytes = base64_decode(text);
  if (bytes.size() != static_cast<std::size_t>(rows * cols) * 4)
    throw std::invalid_argument("f32 blob: size does not match shape");
  Eigen::MatrixXd m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c, i += 4) {
      std::uint32_t u = 0;
      for (int k = 0; k < 4; ++k) u |= std::uint32_t{bytes[i + static_cast<std::size_t>(k)]} << (8 * k);
      m(r, c) = static_cast<double>(std::bit_cast<float>(u));
    }
  return m;
}

}  // namespace glitchlab::bin
