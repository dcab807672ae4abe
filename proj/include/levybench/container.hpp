#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace levybench {

// Binary container shared by datasets and chain traces:
//
//   bytes 0..7    magic "LVYBENCH"
//   bytes 8..15   header length N, uint64 little-endian
//   next N bytes  UTF-8 JSON header (keys sorted, no whitespace)
//   remainder     float64 payload, little-endian, length given by header["payload_doubles"]
//
// The header always carries "format" and "version".
inline constexpr std::uint32_t kContainerVersion = 1;

struct Container {
  nlohmann::json header;
  std::vector<double> payload;
};

std::string encode_container(const Container& c);
Container decode_container(const std::string& bytes);

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames on success, so a failed
// write never leaves a partial artifact behind.
void write_file_atomically(const std::filesystem::path& path, const std::string& bytes);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t value);

}  // namespace levybench
