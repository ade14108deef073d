#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace glitchlab {

using TokenId = std::uint32_t;

// Error taxonomy. Everything derives from std::runtime_error or
// std::invalid_argument so callers can catch at the granularity they need.

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  FormatError(const std::string& what, std::uint64_t byte_offset)
      : std::runtime_error(what + " (at byte " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  std::uint64_t offset;
};

struct ConstructionError : std::runtime_error {
  ConstructionError(const std::string& what, std::vector<TokenId> offending)
      : std::runtime_error(what), tokens(std::move(offending)) {}
  std::vector<TokenId> tokens;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Site : std::uint8_t { attn_pattern = 0, mlp_gate = 1, mlp_data = 2 };

inline constexpr Site kAllSites[] = {Site::attn_pattern, Site::mlp_gate, Site::mlp_data};

inline std::string_view to_string(Site s) {
  switch (s) {
    case Site::attn_pattern: return "attn_pattern";
    case Site::mlp_gate: return "mlp_gate";
    case Site::mlp_data: return "mlp_data";
  }
  return "?";
}

inline Site parse_site(std::string_view s) {
  if (s == "attn_pattern") return Site::attn_pattern;
  if (s == "mlp_gate") return Site::mlp_gate;
  if (s == "mlp_data") return Site::mlp_data;
  throw std::invalid_argument("unknown site '" + std::string(s) + "'");
}

enum class Label : std::uint8_t { Normal = 0, Glitch = 1 };

inline std::string_view to_string(Label l) { return l == Label::Glitch ? "Glitch" : "Normal"; }

inline Label parse_label(std::string_view s) {
  if (s == "Glitch") return Label::Glitch;
  if (s == "Normal") return Label::Normal;
  throw std::invalid_argument("unknown label '" + std::string(s) + "'");
}

/// Canonical ordering for site subsets: attn_pattern, mlp_gate, mlp_data.
inline std::vector<Site> canonical_sites(std::vector<Site> sites) {
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  return sites;
}

using Rng = std::mt19937_64;

// std::uniform_int_distribution is implementation-defined; this keeps
// sampled subsets identical across standard libraries.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  const std::uint64_t limit = Rng::max() - (Rng::max() % n);
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

/// Uniform sample of k items without replacement (partial Fisher-Yates).
/// The returned order is the draw order.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t k, Rng& rng) {
  if (k > pool.size()) throw std::invalid_argument("sample size exceeds population");
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

/// Standard normal draw via Box-Muller; std::normal_distribution is not
/// reproducible across standard library implementations.
inline double normal_draw(Rng& rng) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  double u1;
  do {
    u1 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  } while (u1 <= 0.0);
  const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

inline std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs fn(i) for i in [0, n) on a bounded pool. Results must be written to
/// per-index slots by fn; the first exception is rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::min(resolve_workers(workers), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace glitchlab
