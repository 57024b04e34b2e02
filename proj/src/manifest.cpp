#include "lmt/manifest.hpp"

#include <array>
#include <fstream>

#include <openssl/evp.h>

#include "lmt/common.hpp"

namespace lmt::manifest {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1)
      throw Error("sha256: initialization failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const char* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_, data, n) != 1) throw Error("sha256: update failed");
  }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_, md.data(), &len) != 1) throw Error("sha256: final failed");
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out.push_back(digits[md[i] >> 4]);
      out.push_back(digits[md[i] & 15]);
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

void RunManifest::add_input(const std::filesystem::path& p) {
  inputs.push_back({p.string(), sha256_file(p)});
}

void RunManifest::add_output(const std::filesystem::path& p) {
  outputs.push_back({p.string(), sha256_file(p)});
}

void RunManifest::set_config(nlohmann::json effective) {
  config = std::move(effective);
  config_hash = sha256_hex(config.dump());
}

nlohmann::json RunManifest::to_json() const {
  auto files = [](const std::vector<FileDigest>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& f : v) a.push_back({{"path", f.path}, {"sha256", f.sha256}});
    return a;
  };
  return {{"command", command},     {"tool_version", tool_version},
          {"config_hash", config_hash}, {"config", config},
          {"inputs", files(inputs)},    {"outputs", files(outputs)},
          {"seeds", seeds},             {"wall_time_seconds", wall_time_seconds}};
}

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  auto p = output;
  p += ".manifest.json";
  return p;
}

void write(const std::filesystem::path& path, const RunManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << m.to_json().dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace lmt::manifest
