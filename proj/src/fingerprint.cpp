#include "fpforge/fingerprint.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cmath>

namespace fpforge {

Fingerprint::Fingerprint(std::vector<uint8_t> bits) : bits_(std::move(bits)) {
  if (bits_.empty()) throw std::invalid_argument("fingerprint length must be > 0");
  for (uint8_t b : bits_) {
    if (b > 1) throw std::invalid_argument("fingerprint bits must be 0 or 1");
  }
}

Fingerprint Fingerprint::complement() const {
  std::vector<uint8_t> out(bits_.size());
  for (size_t i = 0; i < bits_.size(); ++i) out[i] = bits_[i] ^ 1u;
  return Fingerprint(std::move(out));
}

std::string Fingerprint::to_hex() const {
  size_t nbytes = (bits_.size() + 7) / 8;
  std::vector<uint8_t> bytes(nbytes, 0);
  for (size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) bytes[i / 8] |= static_cast<uint8_t>(0x80u >> (i % 8));
  }
  return fpforge::to_hex(bytes);
}

Fingerprint Fingerprint::from_hex(const std::string& hex, int n) {
  if (n <= 0) throw std::invalid_argument("fingerprint length must be > 0");
  std::vector<uint8_t> bytes = fpforge::from_hex(hex);
  size_t need = (static_cast<size_t>(n) + 7) / 8;
  if (bytes.size() != need) {
    throw std::invalid_argument("fingerprint hex length does not match n");
  }
  std::vector<uint8_t> bits(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    bits[static_cast<size_t>(i)] =
        (bytes[static_cast<size_t>(i) / 8] >> (7 - i % 8)) & 1u;
  }
  // Padding bits beyond n must be zero.
  for (size_t i = static_cast<size_t>(n); i < need * 8; ++i) {
    if ((bytes[i / 8] >> (7 - i % 8)) & 1u) {
      throw std::invalid_argument("fingerprint hex has nonzero padding bits");
    }
  }
  return Fingerprint(std::move(bits));
}

DecodedFingerprint DecodedFingerprint::from_probs(std::vector<double> probs) {
  if (probs.empty()) throw std::invalid_argument("decoded fingerprint must be non-empty");
  std::vector<uint8_t> bits(probs.size());
  for (size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] < 0.0 || probs[i] > 1.0 || std::isnan(probs[i])) {
      throw std::invalid_argument("decoded probabilities must lie in [0,1]");
    }
    bits[i] = probs[i] >= 0.5 ? 1 : 0;
  }
  DecodedFingerprint d;
  d.probs = std::move(probs);
  d.bits = Fingerprint(std::move(bits));
  return d;
}

Fingerprint sample_fingerprint(int n, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_fingerprint: n must be >= 1");
  RandomStream rng(seed);
  std::vector<uint8_t> bits(static_cast<size_t>(n));
  for (auto& b : bits) b = static_cast<uint8_t>(rng.bit());
  return Fingerprint(std::move(bits));
}

int matching_bits(const Fingerprint& a, const Fingerprint& b) {
  if (a.n() != b.n()) throw std::invalid_argument("fingerprint lengths differ");
  int k = 0;
  for (int i = 0; i < a.n(); ++i) k += a.bit(i) == b.bit(i) ? 1 : 0;
  return k;
}

double bitwise_accuracy(const Fingerprint& a, const Fingerprint& b) {
  return static_cast<double>(matching_bits(a, b)) / a.n();
}

double match_pvalue(int k, int n) {
  if (n <= 0) throw std::invalid_argument("match_pvalue: n must be > 0");
  if (k < 0 || k > n) throw std::invalid_argument("match_pvalue: need 0 <= k <= n");
  // Sum_{i=k}^{n} C(n,i) as an exact integer, then divide by 2^n with enough
  // mantissa bits that the double rounding is the only loss.
  mpz_class tail = 0;
  mpz_class coeff;
  for (int i = k; i <= n; ++i) {
    mpz_bin_uiui(coeff.get_mpz_t(), static_cast<unsigned long>(n),
                 static_cast<unsigned long>(i));
    tail += coeff;
  }
  mpf_class num(tail, 256);
  mpf_class denom(1, 256);
  mpf_mul_2exp(denom.get_mpf_t(), denom.get_mpf_t(), static_cast<unsigned long>(n));
  mpf_class p = num / denom;
  return p.get_d();
}

int min_matching_bits(double threshold, int n) {
  // k/n >= threshold  <=>  k >= ceil(threshold * n); the tiny slack guards
  // against representation error when threshold*n is an exact integer.
  return static_cast<int>(std::ceil(threshold * n - 1e-9));
}

MatchResult verify_match(const Fingerprint& decoded_bits, const Fingerprint& reference,
                         double threshold) {
  if (decoded_bits.n() != reference.n()) {
    throw std::invalid_argument("verify_match: fingerprint lengths differ");
  }
  MatchResult r;
  r.n = reference.n();
  r.matched_bits = matching_bits(decoded_bits, reference);
  r.accuracy = static_cast<double>(r.matched_bits) / r.n;
  r.p_value = match_pvalue(r.matched_bits, r.n);
  r.verified = r.accuracy >= threshold;
  r.confidence = r.verified ? 1.0 - r.p_value : 0.0;
  return r;
}

MatchResult verify_match(const DecodedFingerprint& decoded, const Fingerprint& reference,
                         double threshold) {
  return verify_match(decoded.bits, reference, threshold);
}

double false_match_rate(int num_registered, int n, double threshold) {
  if (num_registered < 0) throw std::invalid_argument("false_match_rate: M must be >= 0");
  if (num_registered == 0) return 0.0;
  double p = match_pvalue(min_matching_bits(threshold, n), n);
  return std::min(1.0, num_registered * p);
}

}  // namespace fpforge
