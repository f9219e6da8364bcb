#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vids::cli {

// Git blob id: sha1("blob <size>\0" + content), lower-case hex.
std::string git_blob_hash(const std::string& content);
std::string git_blob_hash_file(const std::string& path);

std::string read_file(const std::string& path);

struct ManifestEntry {
  std::string name;  // path relative to the run directory
  std::string hash;
};

struct RunManifest {
  std::string stage;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> inputs;
  std::vector<ManifestEntry> outputs;
  std::vector<std::pair<std::string, std::string>> extra;
};

// Pretty JSON with sorted keys and no timestamps.
std::string manifest_json(const RunManifest& m);
void write_manifest(const std::string& path, const RunManifest& m);

}  // namespace vids::cli
