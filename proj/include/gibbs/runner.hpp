#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gibbs/config.hpp"
#include "gibbs/experiments.hpp"
#include "gibbs/mnist.hpp"
#include "gibbs/report.hpp"
#include "gibbs/theory.hpp"

namespace gibbs {

/// Dataset cache root: $GIBBS_ENSEMBLE_CACHE, else ./.gibbs_cache.
inline std::filesystem::path cache_root() {
  if (const char* env = std::getenv("GIBBS_ENSEMBLE_CACHE"); env && *env) return env;
  return ".gibbs_cache";
}

inline std::filesystem::path resolve_mnist_dir(const ExperimentConfig& cfg) {
  return cfg.mnist_dir.empty() ? cache_root() / "mnist" : cfg.mnist_dir;
}

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

namespace detail {

inline std::string list(const std::vector<double>& v, int digits) {
  std::string s = "[";
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + fixed(v[k], digits);
  return s + "]";
}

inline nlohmann::json profile_summary(const LossProfile& prof) {
  const auto& tr = prof.argmin(Split::train);
  return {{"argmin_beta", tr.beta.value()},
          {"train_loss_at_argmin", tr.train_loss},
          {"test_loss_at_argmin", tr.test_loss},
          {"best_single_train_loss", prof.best_single_train},
          {"best_single_test_loss", prof.best_single_test},
          {"w_hash", prof.w_hash}};
}

inline void run_mwe_like(const ExperimentConfig& cfg, const Execution& exec, std::ostream& os, nlohmann::json& result) {
  const MweResult r = run_mwe(cfg.synthetic(), cfg.beta, exec);
  CsvWriter csv(cfg.out / "accuracy.csv", {"predictor", "train_acc", "test_acc"});
  csv.row("ensemble", r.train_acc, r.test_acc);
  csv.row("merged", r.merged_train_acc, r.merged_test_acc);
  csv.row("best_single", r.best_single_train_acc, r.best_single_test_acc);
  result = {{"beta", r.beta},
            {"train_acc", r.train_acc},
            {"test_acc", r.test_acc},
            {"merged_train_acc", r.merged_train_acc},
            {"merged_test_acc", r.merged_test_acc},
            {"best_single_train_acc", r.best_single_train_acc},
            {"best_single_test_acc", r.best_single_test_acc}};
  if (cfg.experiment == "mwe") {
    os << "mwe: train_acc=" << fixed(r.train_acc) << " test_acc=" << fixed(r.test_acc) << " beta=" << fixed(r.beta, 3)
       << '\n';
  } else {
    os << "merge-check: ensemble_test_acc=" << fixed(r.test_acc) << " merged_test_acc=" << fixed(r.merged_test_acc)
       << " abs_diff=" << fixed(std::abs(r.test_acc - r.merged_test_acc)) << '\n';
  }
}

inline void run_sweep_like(const SweepResult& res, const ExperimentConfig& cfg, std::ostream& os,
                           nlohmann::json& result) {
  write_sweep_csv(cfg.out, res);
  result = {{"varied", res.varied}, {"values", res.values}, {"argmin_betas", res.argmin_betas},
            {"min_losses", res.min_losses}};
  os << cfg.experiment << ": varied=" << res.varied << " argmin_betas=" << list(res.argmin_betas, 3);
  if (const auto disp = res.dispersion()) {
    result["dispersion"] = to_json(*disp);
    os << " max_min_ratio=" << fixed(disp->max_min_ratio, 3) << " cv=" << fixed(disp->coefficient_of_variation, 3)
       << " min_loss_half_band=" << fixed(disp->min_loss_half_band);
  }
  os << '\n';
}

inline std::vector<TaskKind> mnist_tasks(TaskChoice c) {
  switch (c) {
    case TaskChoice::parity: return {TaskKind::parity};
    case TaskChoice::leq5: return {TaskKind::leq5};
    case TaskChoice::teacher: return {TaskKind::random_teacher};
    case TaskChoice::all: return {TaskKind::parity, TaskKind::leq5, TaskKind::random_teacher};
  }
  return {};
}

}  // namespace detail

/// Executes one resolved experiment: CSV artifacts, config.json and result.json
/// under cfg.out, plus a one-line summary per result on os.
inline void run_experiment(const ExperimentConfig& cfg, std::ostream& os) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out);
  const Execution exec{cfg.threads};
  nlohmann::json result;
  const std::string& e = cfg.experiment;

  if (e == "mwe" || e == "merge-check") {
    detail::run_mwe_like(cfg, exec, os, result);
  } else if (e == "loss-dist") {
    const auto dist = loss_distribution(cfg.d, cfg.n, cfg.N, cfg.seed, exec);
    write_histogram_csv(cfg.out / "histogram.csv", dist);
    CsvWriter losses(cfg.out / "losses.csv", {"classifier", "train_loss"});
    for (std::size_t i = 0; i < dist.losses.size(); ++i) losses.row(i, dist.losses[i]);
    result = {{"mean", dist.mean}, {"stddev", dist.stddev}, {"min", dist.min}};
    os << "loss-dist: mean=" << fixed(dist.mean) << " stddev=" << fixed(dist.stddev) << " min=" << fixed(dist.min)
       << '\n';
  } else if (e == "sweep") {
    const LossProfile prof = synthetic_profile(cfg.synthetic(), exec);
    write_profile_csv(cfg.out / "profile.csv", prof);
    result = detail::profile_summary(prof);
    const auto& best = prof.argmin(Split::train);
    os << "sweep: argmin_beta=" << fixed(best.beta.value(), 3) << " train_loss=" << fixed(best.train_loss)
       << " test_loss=" << fixed(best.test_loss) << " best_single_train_loss=" << fixed(prof.best_single_train);
    if (prof.finite_points() >= 10 && cfg.d >= 2) {
      const Overlay o = overlay_prediction(prof, static_cast<double>(cfg.d), Split::train);
      write_overlay_csv(cfg.out / "overlay.csv", o);
      result["beta_closed"] = o.beta_closed;
      result["beta_grid"] = o.beta_grid;
      os << " beta_closed=" << fixed(o.beta_closed, 3);
    }
    os << '\n';
  } else if (e == "perturb") {
    detail::run_sweep_like(perturbation_sweep(cfg.varied, cfg.values, cfg.synthetic(), exec), cfg, os, result);
  } else if (e == "teacher-inv") {
    detail::run_sweep_like(teacher_invariance(static_cast<std::size_t>(cfg.teachers), cfg.synthetic(), exec), cfg, os,
                           result);
  } else if (e == "mnist") {
    const auto dir = resolve_mnist_dir(cfg);
    const auto files = MnistFiles::in(dir);
    if (!files.present())
      throw IoError("MNIST IDX files not found in " + dir.string() + " (run fetch-mnist or pass --mnist-dir)");
    const auto train = load_mnist_idx(files.train_images, files.train_labels);
    const auto test = load_mnist_idx(files.test_images, files.test_labels);
    const auto tasks = detail::mnist_tasks(cfg.task);
    const auto profiles = mnist_profiles(train, test, tasks, cfg.n, cfg.seed, cfg.grid, exec);
    result = nlohmann::json::object();
    for (const auto& tp : profiles) {
      const std::string name = to_string(tp.task);
      write_profile_csv(cfg.out / ("profile_" + name + ".csv"), tp.profile);
      auto summary = detail::profile_summary(tp.profile);
      if (tp.profile.finite_points() >= 10) {
        const Overlay o = overlay_prediction(tp.profile, static_cast<double>(train.X.cols()), Split::train);
        write_overlay_csv(cfg.out / ("overlay_" + name + ".csv"), o);
        summary["beta_closed"] = o.beta_closed;
        summary["overlay_flagged"] = !o.within_factor_2;
      }
      result[name] = summary;
      const auto& best = tp.profile.argmin(Split::train);
      os << "mnist[" << name << "]: argmin_beta=" << fixed(best.beta.value(), 3)
         << " test_acc=" << fixed(1.0 - best.test_loss)
         << " best_single_test_acc=" << fixed(1.0 - tp.profile.best_single_test) << '\n';
    }
  } else if (e == "theory") {
    const double d = static_cast<double>(cfg.d);
    const auto pred = beta_star_grid(d, cfg.grid.spec);
    result = {{"d", d}, {"beta_closed", pred.beta_closed}, {"beta_grid", pred.beta_grid},
              {"degenerate", pred.degenerate}, {"skipped_points", pred.skipped_points}};
    if (!pred.degenerate) {
      CsvWriter csv(cfg.out / "xi.csv", {"beta", "log_xi", "clt_loss_proxy"});
      for (double b : cfg.grid.spec.values()) {
        if (!(b > 0.0)) continue;
        csv.row(b, log_xi(b, d), clt_loss_proxy(b, d, static_cast<double>(cfg.n)));
      }
    }
    os << "theory: d=" << cfg.d << " beta_closed=" << fixed(pred.beta_closed, 3)
       << " beta_grid=" << fixed(pred.beta_grid, 3) << (pred.degenerate ? " degenerate" : "") << '\n';
  } else if (e == "concentration") {
    const auto samples = static_cast<std::size_t>(cfg.samples);
    CsvWriter inv(cfg.out / "inverse_norm.csv",
                  {"d", "samples", "mean_inv_sq_norm", "stderr_inv_sq_norm", "exact_inv_sq_norm", "mean_inv_norm",
                   "fluctuation_ratio"});
    result["inverse_norm"] = nlohmann::json::array();
    for (std::size_t k = 0; k < cfg.dims.size(); ++k) {
      const auto dd = static_cast<std::size_t>(cfg.dims[k]);
      const auto s = inverse_norm_stats(dd, samples, {cfg.seed, stream_tag::monte_carlo + k}, cfg.threads);
      const double exact = 1.0 / (static_cast<double>(dd) - 2.0);
      inv.row(dd, samples, s.mean_inv_sq_norm, s.stderr_inv_sq_norm, exact, s.mean_inv_norm, s.fluctuation_ratio());
      result["inverse_norm"].push_back({{"d", dd}, {"z", (s.mean_inv_sq_norm - exact) / s.stderr_inv_sq_norm}});
      os << "concentration: d=" << dd << " E[1/|w|^2]=" << fixed(s.mean_inv_sq_norm, 6) << " exact=" << fixed(exact, 6)
         << " stderr=" << fixed(s.stderr_inv_sq_norm, 6) << '\n';
    }
    const auto gd = static_cast<std::size_t>(cfg.d);
    std::vector<double> u(gd, 0.0), v(gd, 0.0);
    u[0] = 1.0;
    v[0] = cfg.cos_angle;
    if (gd > 1) v[1] = std::sqrt(1.0 - cfg.cos_angle * cfg.cos_angle);
    const auto g = grothendieck_estimate(u, v, samples, {cfg.seed, stream_tag::monte_carlo + cfg.dims.size()},
                                         cfg.threads);
    const double exact = 2.0 / std::numbers::pi * std::asin(cfg.cos_angle);
    CsvWriter gcsv(cfg.out / "grothendieck.csv", {"d", "cos_angle", "samples", "estimate", "standard_error", "exact"});
    gcsv.row(gd, cfg.cos_angle, samples, g.estimate, g.standard_error, exact);
    result["grothendieck"] = {{"estimate", g.estimate}, {"standard_error", g.standard_error}, {"exact", exact}};
    os << "concentration: grothendieck cos=" << fixed(cfg.cos_angle, 3) << " estimate=" << fixed(g.estimate, 6)
       << " exact=" << fixed(exact, 6) << " stderr=" << fixed(g.standard_error, 6) << '\n';
  }

  write_json(cfg.out / "config.json", cfg.snapshot());
  write_json(cfg.out / "result.json", result);
}

}  // namespace gibbs
