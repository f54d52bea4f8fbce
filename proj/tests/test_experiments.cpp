#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gibbs/csv.hpp"
#include "gibbs/experiments.hpp"
#include "gibbs/report.hpp"

using namespace gibbs;
namespace fs = std::filesystem;

namespace {

SyntheticConfig small_config() {
  SyntheticConfig c;
  c.d = 30;
  c.n = 200;
  c.N = 1500;
  c.grid.spec = {0.5, 500.0, 60, Spacing::log};
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Csv, NumberFormatting) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0), "1");
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  const double x = 0.10233520470972582;
  EXPECT_EQ(std::stod(format_number(x)), x);
}

TEST(Profile, InvariantsAndSentinel) {
  const auto c = small_config();
  const auto prof = synthetic_profile(c, Execution{2});
  ASSERT_EQ(prof.points.size(), 61u);
  prof.validate();
  EXPECT_TRUE(prof.points.back().beta.is_infinite());
  EXPECT_EQ(prof.points.back().train_loss, prof.best_single_train);
  EXPECT_EQ(prof.points.back().test_loss, prof.best_single_test);
  EXPECT_LE(prof.min_loss(Split::train), prof.best_single_train);
  EXPECT_EQ(prof.config["d"], 30);
  EXPECT_FALSE(prof.argmin().beta.is_infinite());

  const auto p = make_problem(c, Execution{1});
  const auto losses = classifier_losses(p.W, p.train, Execution{1});
  EXPECT_EQ(prof.best_single_train, *std::min_element(losses.begin(), losses.end()));
  EXPECT_EQ(prof.w_hash, hash_matrix(p.W));
}

TEST(Profile, ZeroBetaIsMajorityVote) {
  auto c = small_config();
  c.grid.spec = {0.0, 10.0, 11, Spacing::linear};
  const auto prof = synthetic_profile(c, Execution{1});
  const auto p = make_problem(c, Execution{1});
  const auto signs = compute_signs(p.test.X, p.W, Execution{1});
  std::size_t wrong = 0;
  for (Index r = 0; r < signs.rows(); ++r) {
    int votes = 0;
    for (Index i = 0; i < signs.cols(); ++i) votes += signs.sign(r, i);
    wrong += (votes >= 0 ? 1 : -1) != p.test.y[static_cast<std::size_t>(r)];
  }
  EXPECT_EQ(prof.points.front().test_loss, static_cast<double>(wrong) / static_cast<double>(signs.rows()));
}

TEST(Profile, ArgminTiesGoToLowestBeta) {
  LossProfile prof;
  for (double b : {1.0, 2.0, 3.0}) prof.points.push_back({Beta(b), 0.2, 0.3});
  prof.points.push_back({Beta::infinity(), 0.1, 0.3});
  EXPECT_EQ(prof.argmin().beta.value(), 1.0);
  EXPECT_EQ(prof.min_loss(), 0.1);
  prof.points.push_back({Beta(4.0), 0.2, 0.2});
  EXPECT_THROW(prof.validate(), std::logic_error);
}

TEST(Profile, ThreadCountDoesNotChangeCsv) {
  const auto dir = fs::temp_directory_path() / "gibbs_test_profile_csv";
  fs::remove_all(dir);
  const auto c = small_config();
  write_profile_csv(dir / "t1.csv", synthetic_profile(c, Execution{1}));
  write_profile_csv(dir / "t8.csv", synthetic_profile(c, Execution{8}));
  const auto a = slurp(dir / "t1.csv");
  EXPECT_EQ(a, slurp(dir / "t8.csv"));
  EXPECT_EQ(a.substr(0, 25), "beta,train_loss,test_loss");
  EXPECT_NE(a.find("\ninf,"), std::string::npos);
}

TEST(LossDistribution, ConcentratesWithDimension) {
  const auto low = loss_distribution(3, 2000, 2000, 1, Execution{2});
  const auto high = loss_distribution(300, 2000, 2000, 1, Execution{2});
  EXPECT_GT(low.stddev, high.stddev);
  for (const auto* dist : {&low, &high}) {
    EXPECT_NEAR(dist->mean, 0.5, 3 * dist->stddev / std::sqrt(2000.0));
    std::int64_t total = 0;
    for (auto h : dist->histogram) total += h;
    EXPECT_EQ(total, 2000);
  }
  EXPECT_THROW(loss_distribution(10, 99, 100, 1, Execution{1}), std::invalid_argument);
}

TEST(LossDistribution, BestClassifierIsWeakInHighDimension) {
  const auto dist = loss_distribution(500, 10000, 10000, 42, Execution{4});
  EXPECT_GE(dist.min, 0.4);
}

TEST(Perturbation, LargerEnsemblesClassifyBetter) {
  auto c = small_config();
  const std::vector<double> ns{50, 200, 800};
  const auto res = perturbation_sweep(Varied::n, ns, c, Execution{4});
  ASSERT_EQ(res.profiles.size(), 3u);
  EXPECT_EQ(res.varied, "n");
  EXPECT_GT(res.min_losses[0], res.min_losses[1]);
  EXPECT_GT(res.min_losses[1], res.min_losses[2]);
  ASSERT_TRUE(res.dispersion().has_value());
  EXPECT_THROW(perturbation_sweep(Varied::n, std::vector<double>{10}, c, Execution{1}), std::invalid_argument);
  EXPECT_THROW(perturbation_sweep(Varied::d, std::vector<double>{10, 2.5}, c, Execution{1}), std::invalid_argument);
}

TEST(TeacherInvariance, SharesDataAndClassifiers) {
  const auto c = small_config();
  const auto res = teacher_invariance(3, c, Execution{2});
  ASSERT_EQ(res.profiles.size(), 3u);
  EXPECT_EQ(res.profiles[0].w_hash, res.profiles[2].w_hash);
  EXPECT_NE(res.profiles[0].points[5].train_loss, res.profiles[1].points[5].train_loss);
  EXPECT_EQ(res.profiles[1].config["teacher_index"], 1);
  const auto one = teacher_invariance(1, c, Execution{2});
  EXPECT_FALSE(one.dispersion().has_value());
  EXPECT_THROW(teacher_invariance(0, c, Execution{1}), std::invalid_argument);
}

TEST(Overlay, BundlesPredictions) {
  auto c = small_config();
  c.grid.spec = {0.1, 1000.0, 400, Spacing::log};
  const auto prof = synthetic_profile(c, Execution{2});
  const auto o = overlay_prediction(prof, 30);
  EXPECT_NEAR(o.beta_closed, std::numbers::pi * std::sqrt(28.0), 1e-12);
  EXPECT_TRUE(o.theory_agrees);
  LossProfile tiny;
  tiny.points.push_back({Beta(1.0), 0.1, 0.1});
  EXPECT_THROW(overlay_prediction(tiny, 30), std::invalid_argument);
}

TEST(Mwe, MergedAndEnsembleAgreeOnSmallProblem) {
  SyntheticConfig c;
  c.d = 50;
  c.n = 2000;
  c.N = 3000;
  c.teacher = TeacherKind::ones;
  const auto r = run_mwe(c, std::nullopt, Execution{4});
  EXPECT_NEAR(r.beta, std::numbers::pi * std::sqrt(48.0), 1e-12);
  EXPECT_GT(r.test_acc, r.best_single_test_acc);
  EXPECT_NEAR(r.merged_test_acc, r.test_acc, 0.05);
}

TEST(Hash, DetectsSingleBitChange) {
  FeatureMatrix a = FeatureMatrix::Ones(3, 4);
  FeatureMatrix b = a;
  b(2, 3) = std::nextafter(1.0f, 2.0f);
  EXPECT_NE(hash_matrix(a), hash_matrix(b));
  EXPECT_NE(hash_matrix(FeatureMatrix::Ones(3, 4)), hash_matrix(FeatureMatrix::Ones(4, 3)));
}
