#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <cstdint>

namespace smcl::io {

/// Writes `bytes` to `path.tmp` and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// FNV-1a 64-bit.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t v);

}  // namespace smcl::io
