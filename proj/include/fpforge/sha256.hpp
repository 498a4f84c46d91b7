#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fpforge {

// Hex-encoded SHA-256 digests (OpenSSL EVP underneath).
std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::vector<uint8_t>& bytes);
std::string sha256_hex(const std::string& s);
std::string sha256_file_hex(const std::string& path);

}  // namespace fpforge
