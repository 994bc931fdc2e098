#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ragrec {

// FNV-1a, 64-bit. Used for cache keys and manifest content hashes; not
// cryptographic.
constexpr std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// splitmix64 step; advances the state and returns the next value.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform double in [0, 1) from a 64-bit value (53 mantissa bits).
inline double u64_to_unit(std::uint64_t u) {
  return static_cast<double>(u >> 11) * (1.0 / 9007199254740992.0);
}

std::string to_hex(std::uint64_t v);

// FNV-1a over a whole file's bytes, hex-encoded. Throws DataError if the
// file cannot be read.
std::string hash_file(const std::string& path);

}  // namespace ragrec
