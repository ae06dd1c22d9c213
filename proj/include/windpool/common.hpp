#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace windpool {

/// Bad input: files, configs, violated preconditions. CLI exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Internal consistency failure (duality gap, divergence). CLI exit code 2.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// All randomness flows through mt19937_64: its output sequence is pinned by
/// the standard, so a (seed, config) pair replays bit-identically.
using Rng = std::mt19937_64;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Uniform in [0, 1), 53-bit resolution.
double uniform01(Rng& rng);

/// Standard normal via Box-Muller (two uniforms per draw; no state carried
/// between calls, so draw order is reproducible).
double normal01(Rng& rng);

/// Uniform integer in [lo, hi], inclusive.
long long uniform_int(Rng& rng, long long lo, long long hi);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

double parse_double(std::string_view s, const std::string& context);
long long parse_int(std::string_view s, const std::string& context);

std::uint64_t fnv1a64(std::string_view s);

/// Runs fn(0..n-1) on up to `threads` workers. Callers own determinism:
/// every fn(i) must be independent of scheduling order.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace windpool
