#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <fstream>

#include "gibbs/config.hpp"

using namespace gibbs;
namespace fs = std::filesystem;

namespace {

fs::path write_toml(const std::string& name, const std::string& body) {
  const auto p = fs::temp_directory_path() / ("gibbs_test_" + name + ".toml");
  std::ofstream(p) << body;
  return p;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsDependOnExperiment) {
  const auto mwe = resolve_config("mwe", std::nullopt, {});
  EXPECT_EQ(mwe.d, 500);
  EXPECT_EQ(mwe.n, 20000);
  EXPECT_EQ(mwe.teacher, TeacherKind::ones);
  const auto mn = resolve_config("mnist", std::nullopt, {});
  EXPECT_EQ(mn.n, 100);
  EXPECT_EQ(mn.task, TaskChoice::parity);
}

TEST(Config, FlagsOverrideFileOverridesDefaults) {
  const auto path = write_toml("precedence", R"(
experiment = "sweep"
d = 64
n = 300
seed = 7
[beta_grid]
min = 1.0
max = 100
points = 50
spacing = "linear"
include_inf = false
[paths]
out = "from_file"
)");
  ConfigOverrides flags;
  flags.n = 999;
  flags.out = "from_flag";
  const auto cfg = resolve_config("sweep", path, flags);
  EXPECT_EQ(cfg.d, 64);
  EXPECT_EQ(cfg.n, 999);
  EXPECT_EQ(cfg.N, 10000);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.grid.spec.min, 1.0);
  EXPECT_EQ(cfg.grid.spec.max, 100.0);
  EXPECT_EQ(cfg.grid.spec.points, 50u);
  EXPECT_EQ(cfg.grid.spec.spacing, Spacing::linear);
  EXPECT_FALSE(cfg.grid.include_inf);
  EXPECT_EQ(cfg.out, "from_flag");
  const auto snap = cfg.snapshot();
  EXPECT_EQ(snap["n"], 999);
  EXPECT_EQ(snap["beta_grid"]["spacing"], "linear");
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_NE(error_of([] { resolve_config("sweep", fs::path("/nonexistent/x.toml"), {}); }).find("not found"),
            std::string::npos);
  EXPECT_NE(error_of([] { resolve_config("sweep", write_toml("badtype", "d = \"many\""), {}); }).find("d:"),
            std::string::npos);
  EXPECT_NE(error_of([] { resolve_config("sweep", write_toml("unknown", "dd = 3"), {}); }).find("dd"),
            std::string::npos);
  EXPECT_NE(error_of([] { resolve_config("sweep", write_toml("grid", "[beta_grid]\nmin = 5.0\nmax = 1.0"), {}); })
                .find("beta_grid"),
            std::string::npos);
  EXPECT_NE(error_of([] { resolve_config("sweep", write_toml("syntax", "d = = 3"), {}); }).find("config"),
            std::string::npos);
  EXPECT_NE(error_of([] { resolve_config("sweep", write_toml("other", "experiment = \"mwe\""), {}); })
                .find("experiment"),
            std::string::npos);
  ConfigOverrides bad;
  bad.N = 0;
  EXPECT_NE(error_of([&] { resolve_config("sweep", std::nullopt, bad); }).find("N:"), std::string::npos);
  ConfigOverrides task;
  task.task = "all";
  EXPECT_NE(error_of([&] { resolve_config("sweep", std::nullopt, task); }).find("task"), std::string::npos);
  EXPECT_NE(error_of([] { resolve_config("nope", std::nullopt, {}); }).find("experiment"), std::string::npos);
}

TEST(Config, PerturbAndConcentrationTables) {
  const auto path = write_toml("perturb", R"(
[perturb]
varied = "d"
values = [50, 200, 800]
[concentration]
samples = 5000
dims = [10, 20]
)");
  const auto cfg = resolve_config("perturb", path, {});
  EXPECT_EQ(cfg.varied, Varied::d);
  EXPECT_EQ(cfg.values, (std::vector<double>{50, 200, 800}));
  EXPECT_EQ(cfg.samples, 5000);
  EXPECT_EQ(cfg.dims, (std::vector<std::int64_t>{10, 20}));
  EXPECT_EQ(cfg.snapshot()["perturb"]["varied"], "d");
}

TEST(Config, ShippedExamplesResolve) {
  std::size_t seen = 0;
  for (const auto& entry : fs::directory_iterator(GIBBS_CONFIG_DIR)) {
    if (entry.path().extension() != ".toml") continue;
    const auto doc = toml::parse_file(entry.path().string());
    const auto experiment = doc["experiment"].value<std::string>();
    ASSERT_TRUE(experiment.has_value()) << entry.path();
    EXPECT_NO_THROW(resolve_config(*experiment, entry.path(), {})) << entry.path();
    ++seen;
  }
  EXPECT_GE(seen, 5u);
}
