#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "gibbs/parallel.hpp"
#include "gibbs/types.hpp"

namespace gibbs {

/// Identifies one independent random stream. Everything drawn from a stream is
/// a pure function of (master_seed, stream_id, row, position).
struct SeededStream {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  friend bool operator==(const SeededStream&, const SeededStream&) = default;
};

/// Purpose tags used to derive sub-streams from a single master seed.
namespace stream_tag {
inline constexpr std::uint64_t train_features = 0x7472'6169'6e00'0001;
inline constexpr std::uint64_t test_features = 0x7465'7374'0000'0002;
inline constexpr std::uint64_t classifiers = 0x636c'6173'7300'0003;
inline constexpr std::uint64_t teacher = 0x7465'6163'6800'0004;
inline constexpr std::uint64_t monte_carlo = 0x6d63'0000'0000'0005;
}  // namespace stream_tag

using PhiloxCounter = std::array<std::uint64_t, 4>;
using PhiloxKey = std::array<std::uint64_t, 2>;

/// Philox4x64-10 block function (Salmon et al., SC'11). Matches
/// numpy.random.Philox bit for bit.
inline PhiloxCounter philox4x64(PhiloxCounter ctr, PhiloxKey key) noexcept {
  constexpr std::uint64_t m0 = 0xD2E7470EE14C6C93ULL;
  constexpr std::uint64_t m1 = 0xCA5A826395121157ULL;
  constexpr std::uint64_t w0 = 0x9E3779B97F4A7C15ULL;
  constexpr std::uint64_t w1 = 0xBB67AE8584CAA73BULL;
  for (int round = 0; round < 10; ++round) {
    const unsigned __int128 p0 = static_cast<unsigned __int128>(m0) * ctr[0];
    const unsigned __int128 p1 = static_cast<unsigned __int128>(m1) * ctr[2];
    const auto hi0 = static_cast<std::uint64_t>(p0 >> 64);
    const auto lo0 = static_cast<std::uint64_t>(p0);
    const auto hi1 = static_cast<std::uint64_t>(p1 >> 64);
    const auto lo1 = static_cast<std::uint64_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += w0;
    key[1] += w1;
  }
  return ctr;
}

/// Maps 64 random bits to a double strictly inside (0, 1).
constexpr double open_unit(std::uint64_t bits) noexcept {
  // 52 bits keep k + 0.5 exact, so the largest value is 1 - 2^-53 < 1.
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Standard normal draws for one (stream, row) pair. Each Philox block yields
/// four uniforms, turned into four normals by two Box-Muller pairs.
class GaussianSequence {
 public:
  GaussianSequence(SeededStream stream, std::uint64_t row) noexcept
      : key_{stream.master_seed, stream.stream_id}, row_(row) {}

  double next() noexcept {
    if (pos_ == 4) refill();
    return buffer_[pos_++];
  }

  double uniform() noexcept {
    if (upos_ == 4) {
      ublock_ = philox4x64({ucounter_++, row_, 1, 0}, key_);
      upos_ = 0;
    }
    return open_unit(ublock_[upos_++]);
  }

 private:
  void refill() noexcept {
    const PhiloxCounter bits = philox4x64({counter_++, row_, 0, 0}, key_);
    for (int pair = 0; pair < 2; ++pair) {
      const double radius = std::sqrt(-2.0 * std::log(open_unit(bits[2 * pair])));
      const double angle = 2.0 * std::numbers::pi * open_unit(bits[2 * pair + 1]);
      buffer_[2 * pair] = radius * std::cos(angle);
      buffer_[2 * pair + 1] = radius * std::sin(angle);
    }
    pos_ = 0;
  }

  PhiloxKey key_;
  std::uint64_t row_;
  std::uint64_t counter_ = 0;
  std::array<double, 4> buffer_{};
  int pos_ = 4;
  std::uint64_t ucounter_ = 0;
  PhiloxCounter ublock_{};
  int upos_ = 4;
};

inline void fill_gaussian_row(SeededStream stream, std::uint64_t row, std::span<double> out) {
  GaussianSequence seq(stream, row);
  for (double& v : out) v = seq.next();
}

/// rows x cols i.i.d. N(0,1) matrix; row i is drawn from (stream, i) alone, so
/// the result is identical for any thread count and a smaller matrix from the
/// same stream is a prefix of a larger one.
inline FeatureMatrix gaussian_matrix(SeededStream stream, Index rows, Index cols,
                                     unsigned threads = 1) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("gaussian_matrix: empty shape");
  FeatureMatrix m(rows, cols);
  constexpr Index rows_per_task = 256;
  const auto tasks = static_cast<std::size_t>((rows + rows_per_task - 1) / rows_per_task);
  parallel_for(tasks, threads, [&](std::size_t task) {
    const Index begin = static_cast<Index>(task) * rows_per_task;
    const Index end = std::min(rows, begin + rows_per_task);
    for (Index r = begin; r < end; ++r) {
      GaussianSequence seq(stream, static_cast<std::uint64_t>(r));
      for (Index c = 0; c < cols; ++c) m(r, c) = static_cast<float>(seq.next());
    }
  });
  return m;
}

/// Uniform direction on the unit sphere in R^d.
inline std::vector<double> unit_teacher(SeededStream stream, std::size_t d) {
  if (d < 1) throw std::invalid_argument("unit_teacher: d must be >= 1");
  GaussianSequence seq(stream, 0);
  std::vector<double> v(d);
  for (;;) {
    double sq = 0.0;
    for (double& x : v) {
      x = seq.next();
      sq += x * x;
    }
    // An all-zero draw has probability zero; keep consuming the stream if it happens.
    if (sq > 0.0) {
      const double inv = 1.0 / std::sqrt(sq);
      for (double& x : v) x *= inv;
      return v;
    }
  }
}

/// The normalized all-ones teacher, ones(d) / sqrt(d).
inline std::vector<double> ones_teacher(std::size_t d) {
  if (d < 1) throw std::invalid_argument("ones_teacher: d must be >= 1");
  return std::vector<double>(d, 1.0 / std::sqrt(static_cast<double>(d)));
}

}  // namespace gibbs
