#include "higarment/hash.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <memory>

#include "higarment/errors.hpp"
#include "higarment/image.hpp"

namespace hg {

std::string git_blob_hash(std::span<const unsigned char> bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + std::string(1, '\0');
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error("SHA-1 digest failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string git_blob_hash(std::string_view text) {
  return git_blob_hash(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::string git_blob_hash_file(const std::filesystem::path& path) {
  return git_blob_hash(read_file_bytes(path));
}

}  // namespace hg
