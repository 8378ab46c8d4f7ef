#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace retrace {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file, then renames over `path`. Readers never see a
/// partially written file; on failure the temp file is removed.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

}  // namespace retrace
