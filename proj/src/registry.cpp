#include "fpforge/registry.hpp"

#include <fstream>
#include <mutex>

#include <nlohmann/json.hpp>

namespace fpforge {

using json = nlohmann::json;

RegistryEntry Registry::register_model(const std::string& model_id,
                                       const Fingerprint& fingerprint,
                                       const std::string& codec_id, double threshold) {
  if (model_id.empty()) throw std::invalid_argument("register: model_id must be non-empty");
  std::unique_lock lock(mutex_);
  for (const auto& e : entries_) {
    if (e.model_id == model_id) {
      throw ConflictError("register: model_id '" + model_id + "' already registered");
    }
  }
  int limit = min_matching_bits(threshold, fingerprint.n());
  for (const auto& e : entries_) {
    if (e.fingerprint.n() != fingerprint.n()) continue;
    int agree = matching_bits(e.fingerprint, fingerprint);
    if (agree >= limit) {
      throw CollisionError("register: fingerprint agrees with '" + e.model_id + "' on " +
                           std::to_string(agree) + " bits (limit " + std::to_string(limit) +
                           ")");
    }
  }
  RegistryEntry entry{model_id, fingerprint, codec_id, rfc3339_now()};
  entries_.push_back(entry);
  return entry;
}

std::optional<RegistryEntry> Registry::attribute(const Fingerprint& decoded,
                                                 double threshold) const {
  std::shared_lock lock(mutex_);
  const RegistryEntry* best = nullptr;
  int best_agree = -1;
  for (const auto& e : entries_) {
    if (e.fingerprint.n() != decoded.n()) continue;
    int agree = matching_bits(e.fingerprint, decoded);
    // Equal agreement implies equal p-value; fall back to lexicographic id.
    if (agree > best_agree ||
        (agree == best_agree && best != nullptr && e.model_id < best->model_id)) {
      best = &e;
      best_agree = agree;
    }
  }
  if (best == nullptr) return std::nullopt;
  if (best_agree < min_matching_bits(threshold, decoded.n())) return std::nullopt;
  return *best;
}

std::optional<RegistryEntry> Registry::attribute(const DecodedFingerprint& decoded,
                                                 double threshold) const {
  return attribute(decoded.bits, threshold);
}

std::optional<RegistryEntry> Registry::find(const std::string& model_id) const {
  std::shared_lock lock(mutex_);
  for (const auto& e : entries_) {
    if (e.model_id == model_id) return e;
  }
  return std::nullopt;
}

std::vector<RegistryEntry> Registry::entries() const {
  std::shared_lock lock(mutex_);
  return entries_;
}

size_t Registry::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

void Registry::save(const std::string& path) const {
  std::shared_lock lock(mutex_);
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("registry: cannot write " + path);
  for (const auto& e : entries_) {
    json j = {{"model_id", e.model_id},
              {"fingerprint_hex", e.fingerprint.to_hex()},
              {"n", e.fingerprint.n()},
              {"codec_id", e.codec_id},
              {"created_at", e.created_at}};
    f << j.dump() << "\n";
  }
}

Registry Registry::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("registry: cannot open " + path);
  Registry reg;
  std::string line;
  size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw IntegrityError("registry: invalid JSON at line " + std::to_string(line_no));
    }
    RegistryEntry e;
    e.model_id = j.at("model_id").get<std::string>();
    e.fingerprint = Fingerprint::from_hex(j.at("fingerprint_hex").get<std::string>(),
                                          j.at("n").get<int>());
    e.codec_id = j.at("codec_id").get<std::string>();
    e.created_at = j.at("created_at").get<std::string>();
    reg.entries_.push_back(std::move(e));
  }
  return reg;
}

}  // namespace fpforge
