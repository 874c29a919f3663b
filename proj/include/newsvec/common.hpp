#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace newsvec {

/// Broad failure categories. The CLI maps each to a distinct exit code.
enum class ErrorKind {
  InvalidArgument,
  InvalidData,
  MissingArtifact,
  Numerical,
  ConfigMismatch,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind);

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::InvalidArgument, what);
}

// ---------------------------------------------------------------------------
// Randomness
//
// std distributions are implementation-defined, so every sampler here maps
// raw 64-bit engine output to values itself. Results are then identical
// across standard libraries for a given seed.

/// SplitMix64 step; also used to derive independent child seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0xD1B54A32D192ED03ULL));
}

/// xoshiro256** with portable helpers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : s_) {
      x = splitmix64(x);
      s = x;
    }
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (no cached second value, stateless apart
  /// from the engine).
  double normal();

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4]{};
};

// ---------------------------------------------------------------------------
// Calendar dates

using Date = std::chrono::year_month_day;

/// Parses `YYYY-MM-DD` (a trailing `T...` time component is ignored).
Date parse_date(std::string_view text);
std::string format_date(const Date& d);
/// ISO weekday, Monday = 1 ... Sunday = 7.
unsigned iso_weekday(const Date& d);
Date add_days(const Date& d, int days);

// ---------------------------------------------------------------------------
// Misc text helpers shared by readers and writers.

std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);
/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double v);
double parse_double(std::string_view text);

}  // namespace newsvec
