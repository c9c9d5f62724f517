// Shared plumbing: error types, label enums, deterministic RNG, hashing,
// and the flat key=value file format used by configs and metadata sidecars.
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace asd {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Errors. Exit codes: 2 validation, 3 numeric, 4 I/O.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Labels shared across modules.

enum class Domain { kSource, kTarget, kUnknown };
enum class Split { kTrain, kTest };
enum class Condition { kNormal, kAnomaly, kUnknown };

std::string to_string(Domain d);
std::string to_string(Split s);
std::string to_string(Condition c);

Domain domain_from_string(std::string_view s);
Split split_from_string(std::string_view s);
Condition condition_from_string(std::string_view s);

// ---------------------------------------------------------------------------
// Deterministic RNG. std::* distributions are not bit-stable across standard
// library versions, so all randomness goes through these explicit mappings.

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via the polar method (sqrt/log only, no trig).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Fisher-Yates with the run seed's stream.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

// ---------------------------------------------------------------------------
// FNV-1a 64-bit, used for config/corpus fingerprints and per-clip seeds.

constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (const char c : data) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string to_hex(std::uint64_t value);

// ---------------------------------------------------------------------------
// Flat key=value files ('#' comments, blank lines ignored). Optional
// [section] headers produce "section.key" entries in insertion order.

struct KvFile {
  std::vector<std::pair<std::string, std::string>> entries;

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  void set(const std::string& key, const std::string& value);

  double get_double(const std::string& key) const;
  long get_long(const std::string& key) const;

  // Canonical text rendering; fingerprints hash this.
  std::string render() const;
};

KvFile parse_kv_text(const std::string& text);
KvFile load_kv_file(const fs::path& path);
void save_kv_file(const fs::path& path, const KvFile& kv);

std::string read_text_file(const fs::path& path);
void write_text_file(const fs::path& path, const std::string& text);

// ---------------------------------------------------------------------------
// Runs fn(i) for i in [0, count) on up to `jobs` worker threads. fn must be
// thread-safe; completion order is unspecified. The first exception thrown
// by any worker is rethrown on the calling thread after all workers join.
void parallel_for(std::size_t count, int jobs,
                  const std::function<void(std::size_t)>& fn);

}  // namespace asd
