#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace chainfolio {

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view data);

/// Hex SHA-256 of a file's contents; empty string when the file is absent.
std::string file_sha256(const std::filesystem::path& path);

}  // namespace chainfolio
