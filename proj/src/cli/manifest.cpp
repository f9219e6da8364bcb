#include "vids/cli/manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iterator>
#include "json.hpp"

#include "vids/error.hpp"

namespace vids::cli {

namespace {

std::string to_hex(const unsigned char* md, unsigned int len) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

}  // namespace

std::string git_blob_hash(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  return to_hex(md, len);
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

std::string git_blob_hash_file(const std::string& path) { return git_blob_hash(read_file(path)); }

std::string manifest_json(const RunManifest& m) {
  nlohmann::json j;
  j["stage"] = m.stage;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  auto entries = [](const std::vector<ManifestEntry>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& e : v) a.push_back({{"name", e.name}, {"hash", e.hash}});
    return a;
  };
  j["inputs"] = entries(m.inputs);
  j["outputs"] = entries(m.outputs);
  for (const auto& [k, v] : m.extra) j["info"][k] = v;
  return j.dump(2) + "\n";
}

void write_manifest(const std::string& path, const RunManifest& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path + "'");
  os << manifest_json(m);
}

}  // namespace vids::cli
