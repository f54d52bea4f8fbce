#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gibbs/data.hpp"
#include "gibbs/errors.hpp"
#include "gibbs/parallel.hpp"
#include "gibbs/sign_matrix.hpp"
#include "gibbs/types.hpp"

namespace gibbs {

/// Inverse temperature: a finite non-negative real or the exact beta -> infinity
/// limit, in which the ensemble collapses onto its best classifier.
class Beta {
 public:
  constexpr Beta() = default;
  explicit Beta(double value) : value_(value) {
    if (!(value >= 0.0) || !std::isfinite(value))
      throw std::invalid_argument("beta must be finite and >= 0 (use Beta::infinity())");
  }
  static constexpr Beta infinity() noexcept {
    Beta b;
    b.value_ = std::numeric_limits<double>::infinity();
    return b;
  }

  constexpr bool is_infinite() const noexcept { return value_ == std::numeric_limits<double>::infinity(); }
  constexpr double value() const noexcept { return value_; }

  friend constexpr auto operator<=>(const Beta&, const Beta&) = default;

 private:
  double value_ = 0.0;
};

inline std::string to_string(Beta b) {
  return b.is_infinite() ? std::string("inf") : std::to_string(b.value());
}

/// Normalized Gibbs weights alpha_i(beta).
struct GibbsWeights {
  std::vector<double> alpha;
};

inline void check_losses(std::span<const double> losses) {
  if (losses.empty()) throw std::invalid_argument("an ensemble needs at least one classifier");
  for (double l : losses)
    if (!std::isfinite(l)) throw std::invalid_argument("classifier losses must be finite");
}

/// Lowest index attaining the minimum loss.
inline std::size_t best_classifier(std::span<const double> losses) {
  check_losses(losses);
  return static_cast<std::size_t>(std::min_element(losses.begin(), losses.end()) - losses.begin());
}

/// Unnormalized scores exp(-beta (L_i - L_min)) for finite beta; these are the
/// vote weights used by predict (alpha up to the positive factor 1/Z).
inline std::vector<double> gibbs_scores(std::span<const double> losses, Beta beta) {
  check_losses(losses);
  if (beta.is_infinite()) throw std::invalid_argument("gibbs_scores: beta must be finite");
  const double lmin = *std::min_element(losses.begin(), losses.end());
  std::vector<double> s(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) s[i] = std::exp(-beta.value() * (losses[i] - lmin));
  return s;
}

inline GibbsWeights gibbs_weights(std::span<const double> losses, Beta beta) {
  check_losses(losses);
  GibbsWeights w;
  if (beta.is_infinite()) {
    const double lmin = *std::min_element(losses.begin(), losses.end());
    const auto ties = static_cast<double>(std::count(losses.begin(), losses.end(), lmin));
    w.alpha.resize(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) w.alpha[i] = losses[i] == lmin ? 1.0 / ties : 0.0;
    return w;
  }
  w.alpha = gibbs_scores(losses, beta);
  double z = 0.0;
  for (double s : w.alpha) z += s;  // z >= 1: the minimizer contributes exp(0)
  for (double& a : w.alpha) a /= z;
  return w;
}

inline std::vector<double> losses_from_signs(const SignMatrix& signs, std::span<const Label> y,
                                             const Execution& exec) {
  const auto counts = mismatch_counts(signs, y, exec);
  std::vector<double> losses(counts.size());
  const auto N = static_cast<double>(signs.rows());
  for (std::size_t i = 0; i < counts.size(); ++i) losses[i] = static_cast<double>(counts[i]) / N;
  return losses;
}

/// Empirical 0-1 loss of every row of W on the dataset.
inline std::vector<double> classifier_losses(const FeatureMatrix& W, const Dataset& data,
                                             const Execution& exec = {}) {
  if (W.cols() != data.dim())
    throw DimensionError("classifiers have d=" + std::to_string(W.cols()) + " but dataset has d=" +
                         std::to_string(data.dim()));
  return losses_from_signs(compute_signs(data.X, W, exec), data.y, exec);
}

inline double zero_one_loss(std::span<const Label> predicted, std::span<const Label> truth) {
  if (predicted.size() != truth.size() || truth.empty())
    throw DimensionError("prediction and label counts differ");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += predicted[i] != truth[i];
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

/// Ensemble decisions for every row of `signs` at each beta, one vector per beta.
/// Finite betas share one pass over the sign bits.
inline std::vector<std::vector<Label>> predict_from_signs(const SignMatrix& signs,
                                                          std::span<const double> losses,
                                                          std::span<const Beta> betas,
                                                          const Execution& exec) {
  if (static_cast<Index>(losses.size()) != signs.cols())
    throw DimensionError("loss count does not match classifier count");
  std::vector<std::vector<Label>> out(betas.size(), std::vector<Label>(static_cast<std::size_t>(signs.rows())));

  std::vector<std::size_t> finite;
  for (std::size_t b = 0; b < betas.size(); ++b)
    if (!betas[b].is_infinite()) finite.push_back(b);

  if (!finite.empty()) {
    ScoreMatrix scores(signs.cols(), static_cast<Index>(finite.size()));
    for (std::size_t k = 0; k < finite.size(); ++k) {
      const auto s = gibbs_scores(losses, betas[finite[k]]);
      for (Index i = 0; i < signs.cols(); ++i) scores(i, static_cast<Index>(k)) = s[static_cast<std::size_t>(i)];
    }
    const ScoreMatrix votes = accumulate_votes(signs, scores, exec);
    for (std::size_t k = 0; k < finite.size(); ++k)
      for (Index r = 0; r < signs.rows(); ++r)
        out[finite[k]][static_cast<std::size_t>(r)] = sign_label(votes(r, static_cast<Index>(k)));
  }

  const auto best = static_cast<Index>(best_classifier(losses));
  for (std::size_t b = 0; b < betas.size(); ++b) {
    if (!betas[b].is_infinite()) continue;
    for (Index r = 0; r < signs.rows(); ++r) out[b][static_cast<std::size_t>(r)] = signs.sign(r, best);
  }
  return out;
}

/// Ensemble 0-1 loss against y at each beta.
inline std::vector<double> ensemble_losses(const SignMatrix& signs, std::span<const Label> y,
                                           std::span<const double> losses, std::span<const Beta> betas,
                                           const Execution& exec) {
  const auto predictions = predict_from_signs(signs, losses, betas, exec);
  std::vector<double> result;
  result.reserve(betas.size());
  for (const auto& p : predictions) result.push_back(zero_one_loss(p, y));
  return result;
}

/// A quenched set of random perceptrons with their training losses and a
/// temperature. W is shared, never copied, between models built from it.
struct EnsembleModel {
  std::shared_ptr<const FeatureMatrix> W;
  std::vector<double> losses;
  Beta beta;

  Index classifiers() const noexcept { return W ? W->rows() : 0; }
  Index dim() const noexcept { return W ? W->cols() : 0; }

  void validate() const {
    if (!W || W->rows() < 1 || W->cols() < 1) throw std::invalid_argument("ensemble needs a non-empty W");
    if (static_cast<Index>(losses.size()) != W->rows())
      throw DimensionError("one loss per classifier is required");
    for (double l : losses)
      if (!(l >= 0.0 && l <= 1.0)) throw std::invalid_argument("classifier losses must lie in [0, 1]");
    if (!W->allFinite()) throw std::invalid_argument("W contains non-finite entries");
  }
};

/// Builds the (training-free) ensemble: losses of each row of W on `train`.
inline EnsembleModel make_ensemble(std::shared_ptr<const FeatureMatrix> W, const Dataset& train, Beta beta,
                                   const Execution& exec = {}) {
  EnsembleModel m{std::move(W), {}, beta};
  if (!m.W) throw std::invalid_argument("make_ensemble: null W");
  m.losses = classifier_losses(*m.W, train, exec);
  m.validate();
  return m;
}

/// y_hat = sign(sign(X W^T) alpha). Rows are processed in batches bounded by
/// exec.memory_budget_bytes; batching does not affect the result.
inline std::vector<Label> predict(const EnsembleModel& model, const FeatureMatrix& X, const Execution& exec = {}) {
  model.validate();
  if (X.cols() != model.dim())
    throw DimensionError("features have d=" + std::to_string(X.cols()) + " but the ensemble has d=" +
                         std::to_string(model.dim()));
  const auto bytes_per_row = static_cast<std::size_t>((model.classifiers() + 63) / 64 * 8 + 8);
  const auto budget_rows = static_cast<Index>(exec.memory_budget_bytes / bytes_per_row);
  const Index batch = std::max<Index>(1, budget_rows / kSampleTile) * kSampleTile;

  std::vector<Label> out(static_cast<std::size_t>(X.rows()));
  const Beta betas[] = {model.beta};
  for (Index r0 = 0; r0 < X.rows(); r0 += batch) {
    const Index r1 = std::min(X.rows(), r0 + batch);
    const SignMatrix signs = compute_signs(X, *model.W, exec, r0, r1);
    const auto part = predict_from_signs(signs, model.losses, betas, exec);
    std::copy(part[0].begin(), part[0].end(), out.begin() + r0);
  }
  return out;
}

inline double ensemble_loss(const EnsembleModel& model, const Dataset& data, const Execution& exec = {}) {
  return zero_one_loss(predict(model, data.X, exec), data.y);
}

/// Single perceptron w_ens = sum_i alpha_i w_i standing in for the weighted vote.
struct MergedPerceptron {
  std::vector<double> w_ens;

  std::vector<Label> predict(const FeatureMatrix& X) const {
    if (static_cast<Index>(w_ens.size()) != X.cols()) throw DimensionError("merged perceptron dimension mismatch");
    std::vector<Label> out(static_cast<std::size_t>(X.rows()));
    for (Index r = 0; r < X.rows(); ++r) {
      double dot = 0.0;
      for (Index c = 0; c < X.cols(); ++c) dot += static_cast<double>(X(r, c)) * w_ens[static_cast<std::size_t>(c)];
      out[static_cast<std::size_t>(r)] = sign_label(dot);
    }
    return out;
  }
};

inline MergedPerceptron merge(const FeatureMatrix& W, const GibbsWeights& weights) {
  if (static_cast<Index>(weights.alpha.size()) != W.rows())
    throw DimensionError("merge: " + std::to_string(weights.alpha.size()) + " weights for " +
                         std::to_string(W.rows()) + " classifiers");
  MergedPerceptron m{std::vector<double>(static_cast<std::size_t>(W.cols()), 0.0)};
  for (Index i = 0; i < W.rows(); ++i) {
    const double a = weights.alpha[static_cast<std::size_t>(i)];
    if (a == 0.0) continue;
    for (Index c = 0; c < W.cols(); ++c) m.w_ens[static_cast<std::size_t>(c)] += a * static_cast<double>(W(i, c));
  }
  return m;
}

}  // namespace gibbs
