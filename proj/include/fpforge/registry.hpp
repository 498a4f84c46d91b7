#pragma once

#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "fpforge/fingerprint.hpp"

namespace fpforge {

struct RegistryEntry {
  std::string model_id;
  Fingerprint fingerprint;
  std::string codec_id;
  std::string created_at;  // RFC 3339
};

// The inventor-side database mapping model ids to allocated fingerprints.
// Registration enforces pairwise separation so attribution is unambiguous:
// a new fingerprint is rejected if it agrees with any existing entry on
// >= threshold*n bits. Reads are concurrent; writes are serialized.
class Registry {
 public:
  Registry() = default;
  Registry(Registry&& other) noexcept : entries_(std::move(other.entries_)) {}
  Registry& operator=(Registry&& other) noexcept {
    entries_ = std::move(other.entries_);
    return *this;
  }

  RegistryEntry register_model(const std::string& model_id, const Fingerprint& fingerprint,
                               const std::string& codec_id, double threshold = 0.75);

  // Entry with maximal bit agreement if that agreement clears the threshold,
  // otherwise nullopt (image treated as real/unknown). Ties break by lowest
  // p-value, then lexicographic model_id.
  std::optional<RegistryEntry> attribute(const Fingerprint& decoded,
                                         double threshold = 0.75) const;
  std::optional<RegistryEntry> attribute(const DecodedFingerprint& decoded,
                                         double threshold = 0.75) const;

  std::optional<RegistryEntry> find(const std::string& model_id) const;
  std::vector<RegistryEntry> entries() const;
  size_t size() const;

  // JSON-lines persistence: one object per entry with fields model_id,
  // fingerprint_hex, n, codec_id, created_at.
  void save(const std::string& path) const;
  static Registry load(const std::string& path);

 private:
  mutable std::shared_mutex mutex_;
  std::vector<RegistryEntry> entries_;
};

}  // namespace fpforge
