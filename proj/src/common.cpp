#include "reid/common.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace reid {

namespace {
std::atomic<std::size_t> g_warnings{0};
}

void warn(const std::string &message) {
  ++g_warnings;
  std::cerr << "warning: " << message << '\n';
}

std::size_t warning_count() { return g_warnings.load(); }

double uniform(Rng &rng, double lo, double hi) {
  // Explicit 53-bit mantissa draw; identical across standard libraries.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double normal(Rng &rng) {
  double u1 = uniform(rng, 0.0, 1.0);
  while (u1 <= 0.0)
    u1 = uniform(rng, 0.0, 1.0);
  const double u2 = uniform(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::size_t uniform_index(Rng &rng, std::size_t n) {
  if (n == 0)
    throw Error("uniform_index: empty range");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v = rng();
  while (v >= limit)
    v = rng();
  return static_cast<std::size_t>(v % n);
}

std::string rng_state(const Rng &rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void set_rng_state(Rng &rng, const std::string &state) {
  std::istringstream is(state);
  is >> rng;
  if (!is)
    throw FormatError("corrupt rng state");
}

std::string git_blob_hash(const std::string &content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX *ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char *hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string &path, const std::string &content) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty())
    std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error("cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

} // namespace reid
