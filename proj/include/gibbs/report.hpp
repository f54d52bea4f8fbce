#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "gibbs/csv.hpp"
#include "gibbs/experiments.hpp"

namespace gibbs {

namespace fs = std::filesystem;

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

/// beta,train_loss,test_loss with "inf" for the sentinel.
inline void write_profile_csv(const fs::path& path, const LossProfile& prof) {
  CsvWriter csv(path, {"beta", "train_loss", "test_loss"});
  for (const auto& p : prof.points) csv.row(p.beta.value(), p.train_loss, p.test_loss);
}

inline void write_sweep_csv(const fs::path& dir, const SweepResult& res) {
  CsvWriter profiles(dir / "profiles.csv", {res.varied, "beta", "train_loss", "test_loss"});
  for (std::size_t k = 0; k < res.profiles.size(); ++k)
    for (const auto& p : res.profiles[k].points) profiles.row(res.values[k], p.beta.value(), p.train_loss, p.test_loss);

  CsvWriter summary(dir / "argmin.csv", {res.varied, "argmin_beta", "min_loss", "best_single_train_loss"});
  for (std::size_t k = 0; k < res.profiles.size(); ++k)
    summary.row(res.values[k], res.argmin_betas[k], res.min_losses[k], res.profiles[k].best_single_train);
}

inline nlohmann::json to_json(const Dispersion& d) {
  return {{"max_min_ratio", d.max_min_ratio},
          {"coefficient_of_variation", d.coefficient_of_variation},
          {"min_loss_half_band", d.min_loss_half_band}};
}

inline void write_overlay_csv(const fs::path& path, const Overlay& o) {
  CsvWriter csv(path, {"d", "argmin_beta_empirical", "beta_closed", "beta_grid", "theory_agrees", "within_factor_2"});
  csv.row(o.d, o.argmin_beta_empirical, o.beta_closed, o.beta_grid, int{o.theory_agrees}, int{o.within_factor_2});
}

inline void write_histogram_csv(const fs::path& path, const LossDistribution& dist) {
  CsvWriter csv(path, {"bin_low", "bin_high", "count"});
  for (std::size_t b = 0; b < dist.histogram.size(); ++b)
    csv.row(static_cast<double>(b) / 100.0, static_cast<double>(b + 1) / 100.0, dist.histogram[b]);
}

}  // namespace gibbs
