#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace hg {

// Hex SHA-1 of "blob <len>\0<bytes>", identical to `git hash-object`.
std::string git_blob_hash(std::span<const unsigned char> bytes);
std::string git_blob_hash(std::string_view text);
std::string git_blob_hash_file(const std::filesystem::path& path);

}  // namespace hg
