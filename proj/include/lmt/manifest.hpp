#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace lmt::manifest {

inline constexpr std::string_view kToolVersion = "1.0.0";

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

struct FileDigest {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string command;
  std::string tool_version = std::string(kToolVersion);
  std::string config_hash;  // sha256 of the effective configuration as JSON
  nlohmann::json config;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  std::vector<std::uint64_t> seeds;
  double wall_time_seconds = 0.0;

  void add_input(const std::filesystem::path& p);
  void add_output(const std::filesystem::path& p);
  void set_config(nlohmann::json effective);
  nlohmann::json to_json() const;
};

// "<out>.manifest.json" next to a file output.
std::filesystem::path manifest_path_for(const std::filesystem::path& output);
void write(const std::filesystem::path& path, const RunManifest& m);

}  // namespace lmt::manifest
