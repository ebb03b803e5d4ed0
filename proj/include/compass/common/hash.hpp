#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace compass {

/// 64-bit FNV-1a. Stable across platforms, used for config and file hashes.
constexpr std::uint64_t fnv1a(std::string_view bytes,
                              std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v);
std::uint64_t hash_file(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace compass
