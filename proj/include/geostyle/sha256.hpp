#pragma once

#include <cstdint>
#include <string>

namespace geostyle {

/// SHA-256 digest as a lowercase hex string.
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& text);

/// Digest of a file's contents; throws IoError if unreadable.
std::string sha256_file(const std::string& path);

} // namespace geostyle
