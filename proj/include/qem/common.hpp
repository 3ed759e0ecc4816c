#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace qem {

// Error taxonomy. The CLI maps these onto exit codes (1 config, 3 resource).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ResourceGuardError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidGateError : ConfigError {
  using ConfigError::ConfigError;
};

struct DimensionError : ConfigError {
  using ConfigError::ConfigError;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Random streams

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Independent, reproducible stream `stream` derived from a base seed.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ull)));
}

/// Uniform double in [0, 1) with 53 random bits. Unlike
/// std::uniform_real_distribution this is identical across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound) by rejection.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

// ---------------------------------------------------------------------------
// Bitstrings. Character k of a bitstring is qubit k, which is bit k of the
// basis-state index.

inline std::uint64_t parse_bitstring(std::string_view bits) {
  if (bits.empty() || bits.size() > 63) throw ConfigError("bitstring must have 1..63 characters");
  std::uint64_t index = 0;
  for (std::size_t k = 0; k < bits.size(); ++k) {
    if (bits[k] == '1') {
      index |= std::uint64_t{1} << k;
    } else if (bits[k] != '0') {
      throw ConfigError("bitstring may only contain '0' and '1': " + std::string(bits));
    }
  }
  return index;
}

inline std::string format_bitstring(std::uint64_t index, int n) {
  std::string bits(static_cast<std::size_t>(n), '0');
  for (int k = 0; k < n; ++k) {
    if ((index >> k) & 1u) bits[static_cast<std::size_t>(k)] = '1';
  }
  return bits;
}

// ---------------------------------------------------------------------------
// Hashing for config fingerprints (FNV-1a, 64 bit).

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Threading

/// Thread count from QEM_THREADS, falling back to the hardware count.
inline int default_thread_count() {
  if (const char* env = std::getenv("QEM_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. Work is split
/// round-robin; callers must write results to disjoint slots.
template <class Body>
void parallel_for(std::size_t count, int threads, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < count; i += workers) body(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Pairwise summation; the result does not depend on how the terms were
/// produced, only on their order.
inline double pairwise_sum(const double* data, std::size_t count) {
  if (count <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i) s += data[i];
    return s;
  }
  const std::size_t half = count / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, count - half);
}

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

}  // namespace qem
