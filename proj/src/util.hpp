#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace aqua {

// FNV-1a 64-bit over raw bytes.
std::uint64_t fnv1a64(std::string_view data);

// 16-hex-digit rendering of a 64-bit digest.
std::string hex64(std::uint64_t value);

// Writes via a sibling temp file and renames into place, so readers never
// observe a partial file.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace aqua
