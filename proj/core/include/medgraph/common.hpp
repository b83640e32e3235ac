// Shared error types and small utilities used across the library.
#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace medgraph {

inline constexpr const char* kVersion = "0.1.0";

// Raised when an input value, spec, or config violates a documented invariant.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised for file, parse, and schema problems on external interfaces.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// FNV-1a, 64-bit. Used for config hashes, input-file hashes, and parameter hashes.
class Fnv1a {
public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  void update(double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    update(&bits, sizeof(bits));
  }
  std::uint64_t digest() const { return state_; }

private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t hash_bytes(std::string_view s);
std::uint64_t hash_file(const std::string& path);
std::string hex64(std::uint64_t h);

// SplitMix64; used to derive independent sub-seeds from one user seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + stream * 0x9e3779b97f4a7c15ULL + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Shortest round-trip decimal representation (locale-independent).
std::string format_double(double x);
// Fixed significant-digit formatting for text exports that pin a precision.
std::string format_double_sig(double x, int significant);
double parse_double(std::string_view s, const std::string& context);
long parse_long(std::string_view s, const std::string& context);

std::vector<std::string> split(std::string_view s, char sep);
std::string trim(std::string_view s);

}  // namespace medgraph
