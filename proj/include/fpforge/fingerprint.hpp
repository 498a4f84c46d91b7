#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fpforge/common.hpp"

namespace fpforge {

// A length-n binary identifier assigned to one model/dataset.
class Fingerprint {
 public:
  Fingerprint() = default;
  explicit Fingerprint(std::vector<uint8_t> bits);

  int n() const { return static_cast<int>(bits_.size()); }
  const std::vector<uint8_t>& bits() const { return bits_; }
  uint8_t bit(int i) const { return bits_[static_cast<size_t>(i)]; }

  Fingerprint complement() const;

  // Big-endian bit packing, zero-padded to ceil(n/8) bytes: bit 0 of the
  // fingerprint is the most significant bit of the first byte.
  std::string to_hex() const;
  static Fingerprint from_hex(const std::string& hex, int n);

  bool operator==(const Fingerprint& other) const { return bits_ == other.bits_; }

 private:
  std::vector<uint8_t> bits_;
};

// Decoder output: per-bit sigmoid probabilities plus the hard threshold.
struct DecodedFingerprint {
  std::vector<double> probs;  // each in [0, 1]
  Fingerprint bits;           // bits[i] = 1 iff probs[i] >= 0.5

  static DecodedFingerprint from_probs(std::vector<double> probs);
  int n() const { return bits.n(); }
};

struct MatchResult {
  int matched_bits = 0;  // k
  int n = 0;
  double accuracy = 0.0;    // k / n
  double p_value = 1.0;     // inclusive binomial tail
  bool verified = false;    // accuracy >= threshold
  double confidence = 0.0;  // 1 - p_value when verified, else 0
};

// Each bit drawn independently and uniformly over {0,1}; deterministic per seed.
Fingerprint sample_fingerprint(int n, uint64_t seed);

// Fraction of positions where the two fingerprints agree.
double bitwise_accuracy(const Fingerprint& a, const Fingerprint& b);

// Number of agreeing positions.
int matching_bits(const Fingerprint& a, const Fingerprint& b);

// Inclusive binomial tail Pr(X >= k) for X ~ Binomial(n, 0.5), computed with
// exact integer binomial coefficients and high-precision division so values
// down to ~1e-32 carry full double accuracy.
double match_pvalue(int k, int n);

// Smallest k such that k/n >= threshold.
int min_matching_bits(double threshold, int n);

MatchResult verify_match(const DecodedFingerprint& decoded, const Fingerprint& reference,
                         double threshold = 0.75);
MatchResult verify_match(const Fingerprint& decoded_bits, const Fingerprint& reference,
                         double threshold = 0.75);

// Union bound on the probability that a random decoded fingerprint clears the
// threshold against at least one of M registered fingerprints.
double false_match_rate(int num_registered, int n, double threshold);

}  // namespace fpforge
