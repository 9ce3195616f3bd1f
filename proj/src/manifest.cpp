#include "htgfd/manifest.hpp"

#include "htgfd/common.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <vector>

namespace htgfd {

std::string file_sha256(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open " + path + " for hashing");

  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  require(ctx != nullptr, "EVP_MD_CTX_new failed");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in.good()) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = in.gcount();
    if (got > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<size_t>(got));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);

  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

nlohmann::json make_run_manifest(const std::string& command,
                                 const nlohmann::json& config,
                                 const std::vector<std::string>& input_files) {
  nlohmann::json m;
  m["command"] = command;
  m["config"] = config;
  auto& inputs = m["inputs"] = nlohmann::json::array();
  for (const auto& f : input_files)
    inputs.push_back({{"path", f}, {"sha256", file_sha256(f)}});
  return m;
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot write " + path);
  out << j.dump(2) << "\n";
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot read " + path);
  return nlohmann::json::parse(in);
}

}  // namespace htgfd
