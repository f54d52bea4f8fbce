#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "gibbs/errors.hpp"
#include "gibbs/types.hpp"

namespace gibbs {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Pixel rows scaled to [0, 1] plus the raw digit of each row.
struct MnistSplit {
  FeatureMatrix X;
  std::vector<std::uint8_t> digits;
  Index image_rows = 0;
  Index image_cols = 0;
};

namespace detail {

inline std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

inline std::string hex32(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

inline void expect_magic(std::span<const std::uint8_t> bytes, std::uint32_t expected,
                         const std::string& what) {
  if (bytes.size() < 4) throw LengthError(what + ": file shorter than the IDX magic");
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != expected)
    throw FormatError(what + ": unexpected IDX magic " + hex32(magic) + " (expected " +
                      hex32(expected) + ")");
}

}  // namespace detail

/// Parses an IDX3 image file (magic 0x00000803, big-endian count/rows/cols).
inline MnistSplit parse_idx_images(std::span<const std::uint8_t> bytes,
                                   const std::string& what = "images") {
  detail::expect_magic(bytes, kIdxImagesMagic, what);
  if (bytes.size() < 16) throw LengthError(what + ": truncated IDX header");
  const std::uint32_t count = detail::read_be32(bytes, 4);
  const std::uint32_t rows = detail::read_be32(bytes, 8);
  const std::uint32_t cols = detail::read_be32(bytes, 12);
  const std::uint64_t pixels = std::uint64_t{rows} * cols;
  const std::uint64_t need = 16 + std::uint64_t{count} * pixels;
  if (bytes.size() < need)
    throw LengthError(what + ": header declares " + std::to_string(count) + " images of " +
                      std::to_string(rows) + "x" + std::to_string(cols) + " (" +
                      std::to_string(need) + " bytes) but file has " +
                      std::to_string(bytes.size()));
  if (count == 0 || pixels == 0) throw FormatError(what + ": empty IDX image file");

  MnistSplit split;
  split.image_rows = rows;
  split.image_cols = cols;
  split.X.resize(count, static_cast<Index>(pixels));
  const std::uint8_t* src = bytes.data() + 16;
  float* dst = split.X.data();
  for (std::uint64_t i = 0; i < std::uint64_t{count} * pixels; ++i)
    dst[i] = static_cast<float>(src[i]) / 255.0f;
  return split;
}

/// Parses an IDX1 label file (magic 0x00000801); every label must be a digit.
inline std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes,
                                                  const std::string& what = "labels") {
  detail::expect_magic(bytes, kIdxLabelsMagic, what);
  if (bytes.size() < 8) throw LengthError(what + ": truncated IDX header");
  const std::uint32_t count = detail::read_be32(bytes, 4);
  if (bytes.size() < 8 + std::uint64_t{count})
    throw LengthError(what + ": header declares " + std::to_string(count) + " labels but file has " +
                      std::to_string(bytes.size() - 8));
  std::vector<std::uint8_t> labels(bytes.begin() + 8, bytes.begin() + 8 + count);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] > 9)
      throw FormatError(what + ": label " + std::to_string(labels[i]) + " at index " +
                        std::to_string(i) + " is not a digit");
  return labels;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline MnistSplit load_mnist_idx(const std::filesystem::path& images_path,
                                 const std::filesystem::path& labels_path) {
  const auto image_bytes = read_file_bytes(images_path);
  const auto label_bytes = read_file_bytes(labels_path);
  MnistSplit split = parse_idx_images(image_bytes, images_path.string());
  split.digits = parse_idx_labels(label_bytes, labels_path.string());
  if (static_cast<Index>(split.digits.size()) != split.X.rows())
    throw ConsistencyError(images_path.string() + " holds " + std::to_string(split.X.rows()) +
                           " images but " + labels_path.string() + " holds " +
                           std::to_string(split.digits.size()) + " labels");
  return split;
}

/// Canonical MNIST file names inside a directory.
struct MnistFiles {
  std::filesystem::path train_images, train_labels, test_images, test_labels;

  static MnistFiles in(const std::filesystem::path& dir) {
    return {dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte",
            dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte"};
  }

  bool present() const {
    namespace fs = std::filesystem;
    return fs::exists(train_images) && fs::exists(train_labels) && fs::exists(test_images) &&
           fs::exists(test_labels);
  }
};

}  // namespace gibbs
