#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ff {

inline constexpr std::string_view kVersion = "freeflyer 0.1.0";

constexpr double kPi = 3.141592653589793238462643383279502884;

// ---- error types -------------------------------------------------------
//
// Every named failure mode gets its own exception so callers (and the CLI
// exit-code mapping) can discriminate without string matching.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateSixD : Error { using Error::Error; };
struct LayoutMismatch : Error { using Error::Error; };
struct NonFiniteState : Error { using Error::Error; };
struct KindMismatch : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct ConfigInvalid : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };
struct ParamInvalid : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct PolicyTaskMismatch : Error { using Error::Error; };

// ---- small utilities ---------------------------------------------------

// FNV-1a over bytes; used for config hashes embedded in output files.
inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace ff
