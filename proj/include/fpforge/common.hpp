#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpforge {

inline constexpr const char* kToolVersion = "fpforge 0.1.0";

// Error taxonomy. Callers that need to distinguish failure classes catch the
// concrete type; everything derives from std::runtime_error except argument
// validation, which reuses std::invalid_argument so standard call sites work.
struct ConflictError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CollisionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CorruptCheckpoint : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic random stream used everywhere we sample (parameter init,
// fingerprints, latents, noise, shuffles). The generator core and the
// Box-Muller normal variate are implemented in this project, so a seed
// reproduces the same stream on any platform and standard library.
class RandomStream {
 public:
  explicit RandomStream(uint64_t seed) : state_seed_(seed) { reseed(seed); }

  void reseed(uint64_t seed);

  uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n).
  uint64_t uniform_index(uint64_t n);

  // Standard normal via Box-Muller.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // One fair bit.
  int bit() { return static_cast<int>(next_u64() & 1u); }

  // In-place Fisher-Yates; std::shuffle is implementation-defined so we roll
  // our own for reproducibility.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  uint64_t seed() const { return state_seed_; }

  // Derive an independent stream for a named sub-task.
  RandomStream fork(uint64_t salt) const;

 private:
  uint64_t state_seed_ = 0;
  uint64_t s_[4] = {0, 0, 0, 0};  // xoshiro256** state, seeded via splitmix64
  bool have_spare_ = false;
  double spare_ = 0.0;
};

std::string to_hex(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> from_hex(const std::string& hex);

// Current UTC time as RFC 3339 (e.g. "2024-05-01T12:00:00Z").
std::string rfc3339_now();

}  // namespace fpforge
