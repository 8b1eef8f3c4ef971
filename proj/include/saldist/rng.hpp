#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace saldist::rng {

/// SplitMix64 finalizer, used to spread raw seeds and derive substreams.
constexpr std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent stream for (seed, stream index), e.g. one per image, so that
/// parallel and serial evaluation draw identical numbers.
constexpr std::uint64_t substream(std::uint64_t seed, std::uint64_t stream) {
  return mix(mix(seed) ^ mix(stream + 0x51ed2701a9c53a4dULL));
}

inline std::mt19937_64 engine(std::uint64_t seed) { return std::mt19937_64(mix(seed)); }

inline std::mt19937_64 engine(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(substream(seed, stream));
}

// The mt19937_64 engine is specified bit-for-bit by the standard, but the
// standard distributions are not; the samplers below are hand-rolled so that
// streams reproduce across standard libraries.

/// Uniform in [0, 1) with 53-bit resolution.
inline double uniform(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform(eng);
}

/// Uniform integer in [0, n). Modulo bias is negligible for n << 2^64.
inline std::uint64_t uniform_index(std::mt19937_64& eng, std::uint64_t n) {
  return eng() % n;
}

inline int uniform_int(std::mt19937_64& eng, int n) {
  return static_cast<int>(uniform_index(eng, static_cast<std::uint64_t>(n)));
}

/// Standard normal via Box-Muller (two uniforms per draw, no cached spare).
inline double normal(std::mt19937_64& eng) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  const double u1 = 1.0 - uniform(eng);  // (0, 1], keeps the log finite
  const double u2 = uniform(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

/// Fisher-Yates with the reproducible index sampler.
template <class T>
void shuffle(std::vector<T>& v, std::mt19937_64& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(eng, i)]);
  }
}

}  // namespace saldist::rng
