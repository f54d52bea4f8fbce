#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gibbs/errors.hpp"
#include "gibbs/parallel.hpp"
#include "gibbs/types.hpp"

namespace gibbs {

/// Bit-packed sign(X W^T): bit (r, i) is set iff w_i . x_r >= 0.
class SignMatrix {
 public:
  SignMatrix() = default;
  SignMatrix(Index rows, Index cols)
      : rows_(rows), cols_(cols), words_((cols + 63) / 64),
        bits_(static_cast<std::size_t>(rows * words_), 0) {}

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  Index words_per_row() const noexcept { return words_; }

  bool positive(Index r, Index c) const noexcept {
    return (row(r)[static_cast<std::size_t>(c / 64)] >> (c % 64)) & 1u;
  }
  Label sign(Index r, Index c) const noexcept { return positive(r, c) ? Label{1} : Label{-1}; }

  std::span<const std::uint64_t> row(Index r) const noexcept {
    return {bits_.data() + r * words_, static_cast<std::size_t>(words_)};
  }
  std::span<std::uint64_t> row(Index r) noexcept {
    return {bits_.data() + r * words_, static_cast<std::size_t>(words_)};
  }

  /// Mask of the valid bits in word w of a row.
  std::uint64_t word_mask(Index w) const noexcept {
    const Index tail = cols_ - w * 64;
    return tail >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << tail) - 1);
  }

  friend bool operator==(const SignMatrix&, const SignMatrix&) = default;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  Index words_ = 0;
  std::vector<std::uint64_t> bits_;
};

/// Fixed global tiling of the X W^T product. Every sign the library produces
/// comes out of exactly this tiling, so a dot product is computed the same way
/// no matter how many threads run or how rows are batched.
inline constexpr Index kSampleTile = 256;
inline constexpr Index kClassifierTile = 512;

/// Signs of rows [row_begin, row_end) of X against every row of W.
/// row_begin must be a multiple of kSampleTile.
inline SignMatrix compute_signs(const FeatureMatrix& X, const FeatureMatrix& W,
                                const Execution& exec, Index row_begin, Index row_end) {
  if (X.cols() != W.cols())
    throw DimensionError("features have d=" + std::to_string(X.cols()) + " but classifiers have d=" +
                         std::to_string(W.cols()));
  if (row_begin % kSampleTile != 0 || row_begin < 0 || row_end > X.rows() || row_begin > row_end)
    throw std::invalid_argument("compute_signs: bad row range");

  SignMatrix out(row_end - row_begin, W.rows());
  const Index n = W.rows();
  const auto tasks = static_cast<std::size_t>((out.rows() + kSampleTile - 1) / kSampleTile);
  parallel_for(tasks, exec.threads, [&](std::size_t task) {
    const Index r0 = row_begin + static_cast<Index>(task) * kSampleTile;
    const Index rt = std::min(kSampleTile, row_end - r0);
    Eigen::MatrixXf dots;
    for (Index c0 = 0; c0 < n; c0 += kClassifierTile) {
      const Index ct = std::min(kClassifierTile, n - c0);
      dots.resize(rt, ct);
      dots.noalias() = X.middleRows(r0, rt) * W.middleRows(c0, ct).transpose();
      for (Index r = 0; r < rt; ++r) {
        auto bits = out.row(r0 - row_begin + r);
        for (Index c = 0; c < ct; ++c) {
          if (dots(r, c) >= 0.0f) {
            const Index col = c0 + c;
            bits[static_cast<std::size_t>(col / 64)] |= std::uint64_t{1} << (col % 64);
          }
        }
      }
    }
  });
  return out;
}

inline SignMatrix compute_signs(const FeatureMatrix& X, const FeatureMatrix& W, const Execution& exec) {
  return compute_signs(X, W, exec, 0, X.rows());
}

/// Per-classifier count of rows where the classifier's sign disagrees with y.
inline std::vector<std::int64_t> mismatch_counts(const SignMatrix& signs, std::span<const Label> y,
                                                 const Execution& exec) {
  if (static_cast<Index>(y.size()) != signs.rows())
    throw DimensionError("label count does not match sign matrix rows");
  std::vector<std::int64_t> counts(static_cast<std::size_t>(signs.cols()), 0);
  constexpr Index words_per_task = 4;
  const Index words = signs.words_per_row();
  const auto tasks = static_cast<std::size_t>((words + words_per_task - 1) / words_per_task);
  parallel_for(tasks, exec.threads, [&](std::size_t task) {
    const Index w0 = static_cast<Index>(task) * words_per_task;
    const Index w1 = std::min(words, w0 + words_per_task);
    for (Index r = 0; r < signs.rows(); ++r) {
      const std::uint64_t flip = y[static_cast<std::size_t>(r)] > 0 ? ~std::uint64_t{0} : 0;
      const auto bits = signs.row(r);
      for (Index w = w0; w < w1; ++w) {
        std::uint64_t wrong = (bits[static_cast<std::size_t>(w)] ^ flip) & signs.word_mask(w);
        while (wrong != 0) {
          counts[static_cast<std::size_t>(w * 64 + std::countr_zero(wrong))] += 1;
          wrong &= wrong - 1;
        }
      }
    }
  });
  return counts;
}

/// Row-major (n x B) matrix of per-classifier vote weights, one column per
/// ensemble being evaluated.
using ScoreMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// votes(r, b) = sum_i sign_ri * scores(i, b), summed in ascending i for every
/// (r, b) regardless of threads or B.
inline ScoreMatrix accumulate_votes(const SignMatrix& signs, const ScoreMatrix& scores,
                                    const Execution& exec) {
  if (scores.rows() != signs.cols())
    throw DimensionError("score rows (" + std::to_string(scores.rows()) +
                         ") must equal the number of classifiers (" + std::to_string(signs.cols()) + ")");
  const Index B = scores.cols();
  ScoreMatrix votes = ScoreMatrix::Zero(signs.rows(), B);
  constexpr Index rows_per_task = 16;
  constexpr Index classifier_chunk = 128;
  const Index n = signs.cols();
  const auto tasks = static_cast<std::size_t>((signs.rows() + rows_per_task - 1) / rows_per_task);
  parallel_for(tasks, exec.threads, [&](std::size_t task) {
    const Index r0 = static_cast<Index>(task) * rows_per_task;
    const Index r1 = std::min(signs.rows(), r0 + rows_per_task);
    for (Index i0 = 0; i0 < n; i0 += classifier_chunk) {
      const Index i1 = std::min(n, i0 + classifier_chunk);
      for (Index r = r0; r < r1; ++r) {
        const auto bits = signs.row(r);
        double* acc = votes.row(r).data();
        for (Index i = i0; i < i1; ++i) {
          const double s = ((bits[static_cast<std::size_t>(i / 64)] >> (i % 64)) & 1u) ? 1.0 : -1.0;
          const double* sc = scores.row(i).data();
          for (Index b = 0; b < B; ++b) acc[b] += s * sc[b];
        }
      }
    }
  });
  return votes;
}

}  // namespace gibbs
