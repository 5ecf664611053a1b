#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "imd/tensor.hpp"

namespace imd {

// IMDT container: "IMDT" magic, u8 version (1), u32 LE rank, rank x u32 LE
// dims, then the float64 LE payload in row-major order.
inline constexpr std::uint8_t kImdtVersion = 1;

std::vector<std::uint8_t> encode_imdt(const Tensor& tensor);
Tensor decode_imdt(const std::vector<std::uint8_t>& bytes);

void write_imdt(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_imdt(const std::filesystem::path& path);

}  // namespace imd
