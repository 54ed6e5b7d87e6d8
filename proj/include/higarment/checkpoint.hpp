#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "higarment/autograd.hpp"

namespace hg {

// Checkpoint container:
//   "HGCK" | u32 version
//   then per parameter, in sorted name order:
//   u32 name length | name bytes | u32 rank | u32 dims[rank] | f32 data[numel]
// All integers and floats are little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<unsigned char> encode_checkpoint(const ParameterStore& store);
void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path);

// Copies values into matching parameters. Names or shapes that do not match
// the store raise ValidationError; the store is left untouched in that case.
void decode_checkpoint(const std::vector<unsigned char>& bytes, ParameterStore& store);
void load_checkpoint(const std::filesystem::path& path, ParameterStore& store);

}  // namespace hg
