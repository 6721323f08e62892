#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace dfl {

/// SHA-256 of a byte span, as a lowercase hex string.
std::string sha256_hex(std::span<const uint8_t> data);

/// SHA-256 of a file's contents; throws Error if the file cannot be read.
std::string sha256_file_hex(const std::string& path);

}  // namespace dfl
