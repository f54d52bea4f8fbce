#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include "gibbs/data.hpp"
#include "gibbs/ensemble.hpp"
#include "gibbs/rng.hpp"

using namespace gibbs;

namespace {

// Entries in {-3..3}: every dot product is exact in float, and exact zeros occur.
FeatureMatrix integer_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::uniform_int_distribution<int> u(-3, 3);
  FeatureMatrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = static_cast<float>(u(rng));
  return m;
}

std::vector<Label> random_labels(std::mt19937_64& rng, Index n) {
  std::vector<Label> y(static_cast<std::size_t>(n));
  for (auto& l : y) l = (rng() & 1) ? 1 : -1;
  return y;
}

Label naive_sign(const FeatureMatrix& X, Index r, const FeatureMatrix& W, Index i) {
  long dot = 0;
  for (Index c = 0; c < X.cols(); ++c) dot += std::lround(X(r, c)) * std::lround(W(i, c));
  return dot >= 0 ? 1 : -1;
}

// Unweighted vote over all classifiers; a tie goes to +1.
std::vector<Label> majority_oracle(const FeatureMatrix& X, const FeatureMatrix& W) {
  std::vector<Label> out;
  for (Index r = 0; r < X.rows(); ++r) {
    int votes = 0;
    for (Index i = 0; i < W.rows(); ++i) votes += naive_sign(X, r, W, i);
    out.push_back(votes >= 0 ? 1 : -1);
  }
  return out;
}

}  // namespace

TEST(Beta, Validation) {
  EXPECT_THROW(Beta(-1.0), std::invalid_argument);
  EXPECT_THROW(Beta(std::nan("")), std::invalid_argument);
  EXPECT_THROW(Beta(std::numeric_limits<double>::infinity()), std::invalid_argument);
  EXPECT_TRUE(Beta::infinity().is_infinite());
  EXPECT_LT(Beta(1e300), Beta::infinity());
  EXPECT_EQ(to_string(Beta::infinity()), "inf");
}

TEST(GibbsWeights, UniformAtZero) {
  const std::vector<double> l{0.1, 0.4, 0.2, 0.3};
  for (double a : gibbs_weights(l, Beta(0.0)).alpha) EXPECT_DOUBLE_EQ(a, 0.25);
}

TEST(GibbsWeights, InfinitySplitsTies) {
  const std::vector<double> l{0.3, 0.1, 0.2, 0.1};
  EXPECT_EQ(gibbs_weights(l, Beta::infinity()).alpha, (std::vector<double>{0, 0.5, 0, 0.5}));
  EXPECT_EQ(best_classifier(l), 1u);
}

TEST(GibbsWeights, TwoClassifierClosedForm) {
  const std::vector<double> l{0.2, 0.3};
  const auto w = gibbs_weights(l, Beta(10.0));
  EXPECT_NEAR(w.alpha[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(w.alpha[1], std::exp(-1.0) / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(GibbsWeights, HugeBetaDoesNotOverflow) {
  const std::vector<double> l{0.2, 0.2000001, 0.9};
  const auto w = gibbs_weights(l, Beta(1e12));
  for (double a : w.alpha) EXPECT_TRUE(std::isfinite(a));
  EXPECT_DOUBLE_EQ(w.alpha[0], 1.0);
}

TEST(GibbsWeights, RejectsBadLosses) {
  EXPECT_THROW(gibbs_weights(std::vector<double>{}, Beta(1.0)), std::invalid_argument);
  EXPECT_THROW(gibbs_weights(std::vector<double>{0.1, NAN}, Beta(1.0)), std::invalid_argument);
}

TEST(GibbsWeights, Properties) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> l(1 + rng() % 60);
    for (auto& x : l) x = std::round(u(rng) * 100) / 100;
    const double beta = std::exp(u(rng) * 12 - 4);
    const auto w = gibbs_weights(l, Beta(beta));
    EXPECT_NEAR(std::accumulate(w.alpha.begin(), w.alpha.end(), 0.0), 1.0, 1e-12);
    for (std::size_t i = 0; i < l.size(); ++i)
      for (std::size_t j = 0; j < l.size(); ++j) {
        if (l[i] < l[j]) {
          EXPECT_GE(w.alpha[i], w.alpha[j]);
        }
        if (l[i] == l[j]) {
          EXPECT_EQ(w.alpha[i], w.alpha[j]);
        }
      }
    // A common shift of all losses leaves the weights unchanged.
    auto shifted = l;
    for (auto& x : shifted) x += 0.25;
    const auto ws = gibbs_weights(shifted, Beta(beta));
    for (std::size_t i = 0; i < l.size(); ++i) EXPECT_NEAR(ws.alpha[i], w.alpha[i], 1e-12);
  }
}

TEST(SignMatrix, MatchesNaiveSigns) {
  std::mt19937_64 rng(11);
  const auto X = integer_matrix(rng, 700, 9);
  const auto W = integer_matrix(rng, 1100, 9);
  const auto s = compute_signs(X, W, Execution{3});
  for (Index r = 0; r < X.rows(); ++r)
    for (Index i = 0; i < W.rows(); ++i) ASSERT_EQ(s.sign(r, i), naive_sign(X, r, W, i)) << r << "," << i;
  EXPECT_EQ(s, compute_signs(X, W, Execution{1}));
}

TEST(SignMatrix, ZeroDotIsPositive) {
  FeatureMatrix X(1, 2), W(1, 2);
  X << 1, 1;
  W << 1, -1;
  EXPECT_EQ(compute_signs(X, W, Execution{1}).sign(0, 0), 1);
}

TEST(SignMatrix, DimensionMismatch) {
  FeatureMatrix X(3, 2), W(3, 4);
  X.setOnes();
  W.setOnes();
  EXPECT_THROW(compute_signs(X, W, Execution{1}), DimensionError);
}

TEST(Losses, CountMismatches) {
  std::mt19937_64 rng(3);
  const auto X = integer_matrix(rng, 300, 5);
  const auto W = integer_matrix(rng, 70, 5);
  const auto y = random_labels(rng, 300);
  const auto losses = losses_from_signs(compute_signs(X, W, Execution{2}), y, Execution{2});
  for (Index i = 0; i < W.rows(); ++i) {
    int wrong = 0;
    for (Index r = 0; r < X.rows(); ++r) wrong += naive_sign(X, r, W, i) != y[static_cast<std::size_t>(r)];
    EXPECT_EQ(losses[static_cast<std::size_t>(i)], wrong / 300.0);
  }
}

// beta = 0 is an unweighted majority vote and beta = inf is the best classifier,
// on 100 random small instances checked against a brute-force oracle.
TEST(LimitIdentities, ZeroAndInfinity) {
  std::mt19937_64 rng(2024);
  for (int inst = 0; inst < 100; ++inst) {
    const Index d = 1 + static_cast<Index>(rng() % 10);
    const Index n = 1 + static_cast<Index>(rng() % 50);
    const Index N = 1 + static_cast<Index>(rng() % 200);
    const auto X = integer_matrix(rng, N, d);
    const auto W = integer_matrix(rng, n, d);
    const auto y = random_labels(rng, N);
    const auto signs = compute_signs(X, W, Execution{2});
    const auto losses = losses_from_signs(signs, y, Execution{2});
    const Beta betas[] = {Beta(0.0), Beta::infinity()};
    const auto pred = predict_from_signs(signs, losses, betas, Execution{2});
    ASSERT_EQ(pred[0], majority_oracle(X, W)) << "instance " << inst;

    std::size_t best = 0;
    for (std::size_t i = 1; i < losses.size(); ++i)
      if (losses[i] < losses[best]) best = i;
    std::vector<Label> best_pred;
    for (Index r = 0; r < N; ++r) best_pred.push_back(naive_sign(X, r, W, static_cast<Index>(best)));
    ASSERT_EQ(pred[1], best_pred);
    ASSERT_EQ(zero_one_loss(pred[1], y), losses[best]);
  }
}

TEST(Predict, IndependentOfThreadsAndBatching) {
  const auto W = std::make_shared<const FeatureMatrix>(gaussian_matrix({5, stream_tag::classifiers}, 300, 20));
  Dataset train;
  train.X = gaussian_matrix({5, stream_tag::train_features}, 1000, 20);
  train.y = teacher_labels(train.X, ones_teacher(20));
  const auto test = gaussian_matrix({5, stream_tag::test_features}, 1300, 20);

  const auto model = make_ensemble(W, train, Beta(12.0), Execution{1});
  const auto ref = predict(model, test, Execution{1});
  Execution tiny{8};
  tiny.memory_budget_bytes = 1;  // one tile of rows per batch
  EXPECT_EQ(predict(model, test, tiny), ref);
  EXPECT_EQ(predict(model, test, Execution{4}), ref);

  const Beta betas[] = {Beta(12.0)};
  EXPECT_EQ(predict_from_signs(compute_signs(test, *W, Execution{3}), model.losses, betas, Execution{3})[0], ref);
}

TEST(Predict, ValidatesModel) {
  EnsembleModel m;
  EXPECT_THROW(predict(m, FeatureMatrix(1, 1)), std::invalid_argument);
  m.W = std::make_shared<const FeatureMatrix>(FeatureMatrix::Ones(2, 3));
  m.losses = {0.1, 0.2};
  EXPECT_THROW(predict(m, FeatureMatrix::Ones(4, 2)), DimensionError);
  m.losses = {0.1};
  EXPECT_THROW(m.validate(), DimensionError);
}

TEST(Merge, SingleClassifierAndInfinity) {
  std::mt19937_64 rng(9);
  const auto X = integer_matrix(rng, 200, 6);
  const auto W = integer_matrix(rng, 40, 6);
  const auto y = random_labels(rng, 200);
  const auto losses = losses_from_signs(compute_signs(X, W, Execution{1}), y, Execution{1});
  const auto best = best_classifier(losses);
  const auto merged = merge(W, gibbs_weights(losses, Beta::infinity()));
  const auto count = std::count(losses.begin(), losses.end(), losses[best]);
  if (count == 1) {
    const auto p = merged.predict(X);
    for (Index r = 0; r < X.rows(); ++r) EXPECT_EQ(p[static_cast<std::size_t>(r)], naive_sign(X, r, W, static_cast<Index>(best)));
  }
  EXPECT_THROW(merge(W, GibbsWeights{{1.0}}), DimensionError);
}

TEST(Merge, WeightedSumInIndexOrder) {
  FeatureMatrix W(2, 2);
  W << 1, 2, 3, -4;
  const auto m = merge(W, GibbsWeights{{0.25, 0.75}});
  EXPECT_DOUBLE_EQ(m.w_ens[0], 2.5);
  EXPECT_DOUBLE_EQ(m.w_ens[1], -2.5);
}
