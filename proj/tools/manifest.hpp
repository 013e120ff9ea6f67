#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace fpca::cli {

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

struct RunManifest {
  std::string subcommand;
  std::vector<std::string> argv;
  nlohmann::ordered_json flags = nlohmann::ordered_json::object();
  std::vector<std::filesystem::path> inputs;
  std::uint64_t seed = 0;
  std::string version;
  double duration_seconds = 0.0;

  nlohmann::ordered_json to_json() const;
};

void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);

}  // namespace fpca::cli
