#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace gibbs {

using Index = Eigen::Index;

/// Dense row-major single-precision storage for features (N x d) and
/// classifier matrices (n x d).
using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Label = std::int8_t;

/// sign(0) is +1 everywhere in the library.
template <class T>
constexpr Label sign_label(T value) noexcept {
  return value >= T(0) ? Label{1} : Label{-1};
}

}  // namespace gibbs
