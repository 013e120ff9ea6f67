#include "manifest.hpp"

#include <array>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "fpca/csv.hpp"
#include "fpca/error.hpp"

namespace fpca::cli {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());

  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);

  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xf];
  }
  return out;
}

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["subcommand"] = subcommand;
  j["argv"] = argv;
  j["flags"] = flags;
  auto inputs_json = nlohmann::ordered_json::array();
  for (const auto& p : inputs) inputs_json.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  j["inputs"] = inputs_json;
  j["seed"] = seed;
  j["version"] = version;
  j["duration_seconds"] = duration_seconds;
  return j;
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest) {
  write_text_file(dir / "manifest.json", manifest.to_json().dump(2) + "\n");
}

}  // namespace fpca::cli
