#pragma once

// Downloads the gzip-compressed IDX files from an HTTP(S) mirror. Requires
// cpp-httplib and zlib; define CPPHTTPLIB_OPENSSL_SUPPORT before inclusion for
// https mirrors.

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

// Eigen first: httplib pulls in <resolv.h>, whose _res macro breaks Eigen.
#include "gibbs/errors.hpp"
#include "gibbs/mnist.hpp"

#include "httplib.h"

namespace gibbs {

inline constexpr std::string_view kDefaultMnistMirror = "https://ossci-datasets.s3.amazonaws.com/mnist";

inline std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> compressed) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw IoError("zlib: inflateInit2 failed");
  zs.next_in = const_cast<Bytef*>(compressed.data());
  zs.avail_in = static_cast<uInt>(compressed.size());
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> chunk{};
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw FormatError("gzip stream is corrupt or truncated");
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw LengthError("gzip stream ended early");
    }
  }
  inflateEnd(&zs);
  return out;
}

namespace detail {
struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // leading '/', no trailing '/'
};

inline SplitUrl split_url(std::string url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("mirror URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl s;
  s.origin = url.substr(0, path_start);
  s.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!s.path.empty() && s.path.back() == '/') s.path.pop_back();
  return s;
}
}  // namespace detail

/// Fetches the four MNIST files into cache_dir (skipping files already present)
/// and checks each one parses. Returns the file set.
inline MnistFiles fetch_mnist(const std::string& mirror_url, const std::filesystem::path& cache_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(cache_dir);
  const MnistFiles files = MnistFiles::in(cache_dir);
  const auto url = detail::split_url(mirror_url);
  httplib::Client client(url.origin);
  client.set_follow_location(true);
  client.set_connection_timeout(30);
  client.set_read_timeout(120);

  for (const fs::path& target : {files.train_images, files.train_labels, files.test_images, files.test_labels}) {
    if (fs::exists(target)) continue;
    const std::string remote = url.path + "/" + target.filename().string() + ".gz";
    auto res = client.Get(remote);
    if (!res) throw IoError("download of " + url.origin + remote + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw IoError("download of " + url.origin + remote + " returned HTTP " + std::to_string(res->status));
    const std::span<const std::uint8_t> body(reinterpret_cast<const std::uint8_t*>(res->body.data()),
                                             res->body.size());
    const auto raw = gunzip(body);
    const auto name = target.filename().string();
    if (name.find("idx3") != std::string::npos)
      (void)parse_idx_images(raw, name);
    else
      (void)parse_idx_labels(raw, name);

    fs::path partial = target;
    partial += ".part";
    {
      std::ofstream out(partial, std::ios::binary);
      if (!out) throw IoError("cannot write " + partial.string());
      out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
      if (!out) throw IoError("write failed: " + partial.string());
    }
    fs::rename(partial, target);
  }
  return files;
}

}  // namespace gibbs
