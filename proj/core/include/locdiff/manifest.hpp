#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace locdiff {

inline constexpr const char* kToolVersion = "0.1.0";

/// Record of one command run; exactly one per output directory.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> artifact_hashes;  // file name -> fnv1a hex
  double duration_seconds = 0.0;
  std::string tool_version = kToolVersion;

  void write(const std::filesystem::path& dir) const;
  static RunManifest read(const std::filesystem::path& dir);
};

std::uint64_t fnv1a_file(const std::filesystem::path& path);
std::string hash_hex(std::uint64_t h);

}  // namespace locdiff
