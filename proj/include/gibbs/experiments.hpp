#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gibbs/data.hpp"
#include "gibbs/ensemble.hpp"
#include "gibbs/mnist.hpp"
#include "gibbs/rng.hpp"
#include "gibbs/sign_matrix.hpp"
#include "gibbs/theory.hpp"

namespace gibbs {

/// Betas evaluated by a sweep; the infinity sentinel, when requested, comes last.
struct BetaGrid {
  GridSpec spec;
  bool include_inf = true;

  std::vector<Beta> betas() const {
    std::vector<Beta> out;
    for (double b : spec.values()) out.emplace_back(b);
    if (include_inf) out.push_back(Beta::infinity());
    return out;
  }
};

inline void to_json(nlohmann::json& j, const BetaGrid& g) {
  j = {{"min", g.spec.min},
       {"max", g.spec.max},
       {"points", g.spec.points},
       {"spacing", g.spec.spacing == Spacing::log ? "log" : "linear"},
       {"include_inf", g.include_inf}};
}

enum class Split { train, test };

struct ProfilePoint {
  Beta beta;
  double train_loss = 0;
  double test_loss = 0;

  double loss(Split s) const { return s == Split::train ? train_loss : test_loss; }
};

/// Ensemble train/test loss along a beta grid, for one quenched W.
struct LossProfile {
  std::vector<ProfilePoint> points;
  nlohmann::json config;
  std::uint64_t w_hash = 0;
  std::size_t best_classifier = 0;
  double best_single_train = 0;  // loss of the lowest-index best classifier
  double best_single_test = 0;

  void validate() const {
    for (std::size_t k = 1; k < points.size(); ++k)
      if (!(points[k - 1].beta < points[k].beta))
        throw std::logic_error("profile betas must be strictly increasing");
  }

  std::size_t finite_points() const {
    return static_cast<std::size_t>(
        std::count_if(points.begin(), points.end(), [](const ProfilePoint& p) { return !p.beta.is_infinite(); }));
  }

  /// Finite-beta point with the lowest loss on the split (ties: lowest beta).
  const ProfilePoint& argmin(Split split = Split::train) const {
    const ProfilePoint* best = nullptr;
    for (const auto& p : points) {
      if (p.beta.is_infinite()) continue;
      if (!best || p.loss(split) < best->loss(split)) best = &p;
    }
    if (!best) throw std::logic_error("profile has no finite beta");
    return *best;
  }

  double min_loss(Split split = Split::train) const {
    double m = 1.0;
    for (const auto& p : points) m = std::min(m, p.loss(split));
    return m;
  }
};

/// FNV-1a over the raw float bytes; identifies a quenched W.
inline std::uint64_t hash_matrix(const FeatureMatrix& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
  const auto size = static_cast<std::size_t>(m.size()) * sizeof(float);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  h ^= static_cast<std::uint64_t>(m.rows()) * 0x9E3779B97F4A7C15ULL;
  return h ^ static_cast<std::uint64_t>(m.cols());
}

/// Profile from precomputed signs. Per-classifier losses are taken from the
/// training split once and reused at every beta.
inline LossProfile beta_sweep(const SignMatrix& train_signs, std::span<const Label> train_y,
                              const SignMatrix& test_signs, std::span<const Label> test_y,
                              std::span<const Beta> betas, const Execution& exec) {
  if (betas.empty()) throw std::invalid_argument("beta_sweep: empty beta grid");
  if (train_signs.cols() != test_signs.cols()) throw DimensionError("train and test signs use different ensembles");
  LossProfile prof;
  const auto losses = losses_from_signs(train_signs, train_y, exec);
  const auto train = ensemble_losses(train_signs, train_y, losses, betas, exec);
  const auto test = ensemble_losses(test_signs, test_y, losses, betas, exec);
  for (std::size_t k = 0; k < betas.size(); ++k) prof.points.push_back({betas[k], train[k], test[k]});
  prof.validate();

  prof.best_classifier = best_classifier(losses);
  prof.best_single_train = losses[prof.best_classifier];
  std::size_t wrong = 0;
  const auto best = static_cast<Index>(prof.best_classifier);
  for (Index r = 0; r < test_signs.rows(); ++r) wrong += test_signs.sign(r, best) != test_y[static_cast<std::size_t>(r)];
  prof.best_single_test = static_cast<double>(wrong) / static_cast<double>(test_signs.rows());
  return prof;
}

inline LossProfile beta_sweep(const Dataset& train, const Dataset& test, const FeatureMatrix& W,
                              const BetaGrid& grid, const Execution& exec) {
  if (train.dim() != W.cols() || test.dim() != W.cols()) throw DimensionError("beta_sweep: dimension mismatch");
  const auto betas = grid.betas();
  LossProfile prof = beta_sweep(compute_signs(train.X, W, exec), train.y, compute_signs(test.X, W, exec), test.y,
                                betas, exec);
  prof.w_hash = hash_matrix(W);
  return prof;
}

// ---------------------------------------------------------------------------
// Synthetic teacher-student problems

enum class TeacherKind { ones, random };

struct SyntheticConfig {
  Index d = 100;
  Index n = 1000;
  Index N = 10000;
  std::uint64_t seed = 42;
  TeacherKind teacher = TeacherKind::random;
  std::uint64_t teacher_index = 0;
  BetaGrid grid;
};

inline nlohmann::json snapshot(const SyntheticConfig& c) {
  return {{"d", c.d},
          {"n", c.n},
          {"N", c.N},
          {"seed", c.seed},
          {"teacher", c.teacher == TeacherKind::ones ? "ones" : "random"},
          {"teacher_index", c.teacher_index},
          {"beta_grid", c.grid}};
}

inline std::vector<double> make_teacher(const SyntheticConfig& c) {
  if (c.teacher == TeacherKind::ones) return ones_teacher(static_cast<std::size_t>(c.d));
  return unit_teacher({c.seed, stream_tag::teacher + c.teacher_index}, static_cast<std::size_t>(c.d));
}

/// Train set, independently seeded test set of equal size, and quenched W.
struct SyntheticProblem {
  std::vector<double> teacher;
  Dataset train;
  Dataset test;
  FeatureMatrix W;
};

inline SyntheticProblem make_problem(const SyntheticConfig& c, const Execution& exec) {
  if (c.d < 1 || c.n < 1 || c.N < 1) throw std::invalid_argument("d, n and N must be positive");
  SyntheticProblem p;
  p.teacher = make_teacher(c);
  p.train = make_gaussian_dataset({c.seed, stream_tag::train_features}, c.N, c.d, p.teacher, exec.threads);
  p.test = make_gaussian_dataset({c.seed, stream_tag::test_features}, c.N, c.d, p.teacher, exec.threads);
  p.train.meta.split = "train";
  p.test.meta.split = "test";
  const std::string tid = c.teacher == TeacherKind::ones ? "ones" : "random:" + std::to_string(c.teacher_index);
  p.train.meta.teacher = p.test.meta.teacher = tid;
  p.W = gaussian_matrix({c.seed, stream_tag::classifiers}, c.n, c.d, exec.threads);
  return p;
}

inline LossProfile synthetic_profile(const SyntheticConfig& c, const Execution& exec) {
  const auto p = make_problem(c, exec);
  LossProfile prof = beta_sweep(p.train, p.test, p.W, c.grid, exec);
  prof.config = snapshot(c);
  return prof;
}

// ---------------------------------------------------------------------------
// Loss concentration across random classifiers

struct LossDistribution {
  std::vector<double> losses;
  std::vector<std::int64_t> histogram;  // 100 bins of width 0.01 over [0, 1]
  double mean = 0;
  double stddev = 0;
  double min = 0;

  static constexpr double bin_width = 0.01;
};

inline LossDistribution loss_distribution(Index d, Index n, Index N, std::uint64_t seed, const Execution& exec) {
  if (n < 100) throw std::invalid_argument("loss_distribution needs n >= 100");
  SyntheticConfig c;
  c.d = d;
  c.n = n;
  c.N = N;
  c.seed = seed;
  const auto teacher = make_teacher(c);
  const Dataset data = make_gaussian_dataset({seed, stream_tag::train_features}, N, d, teacher, exec.threads);
  const FeatureMatrix W = gaussian_matrix({seed, stream_tag::classifiers}, n, d, exec.threads);

  LossDistribution out;
  out.losses = classifier_losses(W, data, exec);
  out.histogram.assign(100, 0);
  double sum = 0.0;
  for (double l : out.losses) {
    const auto bin = std::min<std::size_t>(99, static_cast<std::size_t>(std::floor(l / LossDistribution::bin_width)));
    ++out.histogram[bin];
    sum += l;
  }
  const double cnt = static_cast<double>(out.losses.size());
  out.mean = sum / cnt;
  double ss = 0.0;
  for (double l : out.losses) ss += (l - out.mean) * (l - out.mean);
  out.stddev = std::sqrt(ss / (cnt - 1.0));
  out.min = *std::min_element(out.losses.begin(), out.losses.end());
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps over configurations

struct Dispersion {
  double max_min_ratio = 0;             // of the argmin betas
  double coefficient_of_variation = 0;  // sample stddev / mean of the argmin betas
  double min_loss_half_band = 0;        // (max - min) / 2 of the per-profile minimum loss
};

struct SweepResult {
  std::string varied;
  std::vector<double> values;
  std::vector<LossProfile> profiles;
  std::vector<double> argmin_betas;  // finite betas only
  std::vector<double> min_losses;
  Split split = Split::train;

  /// Absent for fewer than two profiles.
  std::optional<Dispersion> dispersion() const {
    if (argmin_betas.size() < 2) return std::nullopt;
    Dispersion disp;
    const auto [lo, hi] = std::minmax_element(argmin_betas.begin(), argmin_betas.end());
    disp.max_min_ratio = *hi / *lo;
    double mean = 0.0;
    for (double b : argmin_betas) mean += b;
    mean /= static_cast<double>(argmin_betas.size());
    double ss = 0.0;
    for (double b : argmin_betas) ss += (b - mean) * (b - mean);
    disp.coefficient_of_variation = std::sqrt(ss / static_cast<double>(argmin_betas.size() - 1)) / mean;
    const auto [llo, lhi] = std::minmax_element(min_losses.begin(), min_losses.end());
    disp.min_loss_half_band = (*lhi - *llo) / 2.0;
    return disp;
  }

  void add(double value, LossProfile prof) {
    values.push_back(value);
    argmin_betas.push_back(prof.argmin(split).beta.value());
    min_losses.push_back(prof.min_loss(split));
    profiles.push_back(std::move(prof));
  }
};

enum class Varied { d, n, N };

inline std::string to_string(Varied v) {
  switch (v) {
    case Varied::d: return "d";
    case Varied::n: return "n";
    case Varied::N: return "N";
  }
  return "?";
}

/// One profile per value of the varied quantity, the other two held at base.
/// Rows of X and W come from per-row streams, so e.g. the n=100 ensemble is the
/// first 100 classifiers of the n=10^4 one.
inline SweepResult perturbation_sweep(Varied varied, std::span<const double> values, const SyntheticConfig& base,
                                      const Execution& exec, Split split = Split::train) {
  if (values.size() < 2) throw std::invalid_argument("perturbation_sweep needs at least 2 values");
  SweepResult res;
  res.varied = to_string(varied);
  res.split = split;
  for (double v : values) {
    if (!(v >= 1.0) || v != std::floor(v)) throw std::invalid_argument("perturbation values must be positive integers");
    SyntheticConfig c = base;
    const auto iv = static_cast<Index>(v);
    switch (varied) {
      case Varied::d: c.d = iv; break;
      case Varied::n: c.n = iv; break;
      case Varied::N: c.N = iv; break;
    }
    res.add(v, synthetic_profile(c, exec));
  }
  return res;
}

/// Profiles for several teachers sharing one X (train and test) and one W.
inline SweepResult teacher_invariance(std::size_t num_teachers, const SyntheticConfig& base, const Execution& exec,
                                      Split split = Split::train) {
  if (num_teachers < 1) throw std::invalid_argument("teacher_invariance needs at least one teacher");
  SyntheticConfig c = base;
  c.teacher = TeacherKind::random;
  const FeatureMatrix Xtr = gaussian_matrix({c.seed, stream_tag::train_features}, c.N, c.d, exec.threads);
  const FeatureMatrix Xte = gaussian_matrix({c.seed, stream_tag::test_features}, c.N, c.d, exec.threads);
  const FeatureMatrix W = gaussian_matrix({c.seed, stream_tag::classifiers}, c.n, c.d, exec.threads);
  const SignMatrix str = compute_signs(Xtr, W, exec);
  const SignMatrix ste = compute_signs(Xte, W, exec);
  const std::uint64_t w_hash = hash_matrix(W);
  const auto betas = c.grid.betas();

  SweepResult res;
  res.varied = "teacher_seed";
  res.split = split;
  for (std::size_t k = 0; k < num_teachers; ++k) {
    c.teacher_index = k;
    const auto teacher = make_teacher(c);
    const auto ytr = teacher_labels(Xtr, teacher);
    const auto yte = teacher_labels(Xte, teacher);
    LossProfile prof = beta_sweep(str, ytr, ste, yte, betas, exec);
    prof.w_hash = w_hash;
    prof.config = snapshot(c);
    res.add(static_cast<double>(k), std::move(prof));
  }
  return res;
}

// ---------------------------------------------------------------------------

/// Empirical argmin beta next to both theoretical predictions.
struct Overlay {
  double d = 0;
  double argmin_beta_empirical = 0;
  double beta_closed = 0;
  double beta_grid = 0;
  bool theory_agrees = false;   // closed form and grid argmax within 2%
  bool within_factor_2 = false; // empirical argmin in [0.5, 2] x closed form
};

inline Overlay overlay_prediction(const LossProfile& profile, double d, Split split = Split::train,
                                  const GridSpec& grid = {}) {
  if (profile.finite_points() < 10) throw std::invalid_argument("overlay_prediction needs >= 10 finite betas");
  Overlay o;
  o.d = d;
  o.argmin_beta_empirical = profile.argmin(split).beta.value();
  const auto pred = beta_star_grid(d, grid);
  o.beta_closed = pred.beta_closed;
  o.beta_grid = pred.beta_grid;
  o.theory_agrees = !pred.degenerate && std::abs(pred.beta_grid - pred.beta_closed) <= 0.02 * pred.beta_closed;
  o.within_factor_2 =
      o.argmin_beta_empirical >= 0.5 * o.beta_closed && o.argmin_beta_empirical <= 2.0 * o.beta_closed;
  return o;
}

// ---------------------------------------------------------------------------
// Minimal working example and merging check

struct MweResult {
  double beta = 0;
  double train_acc = 0;
  double test_acc = 0;
  double merged_train_acc = 0;
  double merged_test_acc = 0;
  double best_single_train_acc = 0;
  double best_single_test_acc = 0;
};

/// Ensemble at one beta (default pi sqrt(d-2)) plus the merged perceptron.
inline MweResult run_mwe(const SyntheticConfig& c, std::optional<double> beta, const Execution& exec) {
  const auto p = make_problem(c, exec);
  auto W = std::make_shared<const FeatureMatrix>(p.W);
  MweResult r;
  r.beta = beta ? *beta : beta_star_closed_form(static_cast<double>(c.d));
  const SignMatrix str = compute_signs(p.train.X, *W, exec);
  const SignMatrix ste = compute_signs(p.test.X, *W, exec);
  const auto losses = losses_from_signs(str, p.train.y, exec);
  const Beta betas[] = {Beta(r.beta), Beta::infinity()};
  const auto tr = ensemble_losses(str, p.train.y, losses, betas, exec);
  const auto te = ensemble_losses(ste, p.test.y, losses, betas, exec);
  r.train_acc = 1.0 - tr[0];
  r.test_acc = 1.0 - te[0];
  r.best_single_train_acc = 1.0 - tr[1];
  r.best_single_test_acc = 1.0 - te[1];
  const auto merged = merge(*W, gibbs_weights(losses, Beta(r.beta)));
  r.merged_train_acc = 1.0 - zero_one_loss(merged.predict(p.train.X), p.train.y);
  r.merged_test_acc = 1.0 - zero_one_loss(merged.predict(p.test.X), p.test.y);
  return r;
}

// ---------------------------------------------------------------------------
// MNIST

struct TaskProfile {
  TaskKind task;
  LossProfile profile;
};

/// One profile per task, all sharing the same W (n random perceptrons over pixels).
inline std::vector<TaskProfile> mnist_profiles(const MnistSplit& train, const MnistSplit& test,
                                               std::span<const TaskKind> tasks, Index n, std::uint64_t seed,
                                               const BetaGrid& grid, const Execution& exec) {
  const Index d = train.X.cols();
  if (test.X.cols() != d) throw DimensionError("MNIST train and test image sizes differ");
  const FeatureMatrix W = gaussian_matrix({seed, stream_tag::classifiers}, n, d, exec.threads);
  const SignMatrix str = compute_signs(train.X, W, exec);
  const SignMatrix ste = compute_signs(test.X, W, exec);
  const auto betas = grid.betas();
  const std::uint64_t w_hash = hash_matrix(W);

  std::vector<TaskProfile> out;
  for (TaskKind kind : tasks) {
    LabelTask task{kind, std::nullopt};
    if (kind == TaskKind::random_teacher)
      task.teacher = unit_teacher({seed, stream_tag::teacher}, static_cast<std::size_t>(d));
    std::vector<Label> ytr, yte;
    if (task.teacher) {
      ytr = teacher_labels(train.X, *task.teacher);
      yte = teacher_labels(test.X, *task.teacher);
    } else {
      ytr.resize(train.digits.size());
      yte.resize(test.digits.size());
      std::transform(train.digits.begin(), train.digits.end(), ytr.begin(), [&](auto g) { return digit_label(g, kind); });
      std::transform(test.digits.begin(), test.digits.end(), yte.begin(), [&](auto g) { return digit_label(g, kind); });
    }
    LossProfile prof = beta_sweep(str, ytr, ste, yte, betas, exec);
    prof.w_hash = w_hash;
    prof.config = {{"source", "mnist"}, {"task", to_string(kind)}, {"n", n}, {"seed", seed}, {"d", d},
                   {"N_train", train.X.rows()}, {"N_test", test.X.rows()}, {"beta_grid", grid}};
    out.push_back({kind, std::move(prof)});
  }
  return out;
}

}  // namespace gibbs
