#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "toml.hpp"

#include "gibbs/errors.hpp"
#include "gibbs/experiments.hpp"
#include "gibbs/parallel.hpp"

namespace gibbs {

inline constexpr std::array<std::string_view, 9> kExperiments = {
    "mwe", "loss-dist", "sweep", "perturb", "teacher-inv", "mnist", "theory", "concentration", "merge-check"};

/// Task selector. "all" is only meaningful for the mnist experiment.
enum class TaskChoice { teacher, parity, leq5, all };

inline std::string to_string(TaskChoice t) {
  switch (t) {
    case TaskChoice::teacher: return "teacher";
    case TaskChoice::parity: return "parity";
    case TaskChoice::leq5: return "leq5";
    case TaskChoice::all: return "all";
  }
  return "?";
}

inline TaskChoice parse_task(std::string_view s) {
  if (s == "teacher" || s == "random") return TaskChoice::teacher;
  if (s == "parity") return TaskChoice::parity;
  if (s == "leq5") return TaskChoice::leq5;
  if (s == "all") return TaskChoice::all;
  throw ConfigError("task: expected teacher|parity|leq5|all, got '" + std::string(s) + "'");
}

inline TeacherKind parse_teacher(std::string_view s) {
  if (s == "ones") return TeacherKind::ones;
  if (s == "random") return TeacherKind::random;
  throw ConfigError("teacher: expected ones|random, got '" + std::string(s) + "'");
}

inline Varied parse_varied(std::string_view s) {
  if (s == "d") return Varied::d;
  if (s == "n") return Varied::n;
  if (s == "N") return Varied::N;
  throw ConfigError("perturb.varied: expected d|n|N, got '" + std::string(s) + "'");
}

/// Fully resolved settings of one run.
struct ExperimentConfig {
  std::string experiment = "sweep";
  std::int64_t d = 100;
  std::int64_t n = 1000;
  std::int64_t N = 10000;
  std::uint64_t seed = 42;
  BetaGrid grid;
  TaskChoice task = TaskChoice::teacher;
  TeacherKind teacher = TeacherKind::random;
  std::uint64_t teacher_index = 0;
  std::filesystem::path out = "out";
  std::filesystem::path mnist_dir;
  unsigned threads = default_threads();

  std::optional<double> beta;               // mwe, merge-check; unset = pi sqrt(d-2)
  Varied varied = Varied::n;                // perturb
  std::vector<double> values{100, 1000, 10000};
  std::int64_t teachers = 10;               // teacher-inv
  std::int64_t samples = 1'000'000;         // concentration
  std::vector<std::int64_t> dims{10, 100};  // concentration
  double cos_angle = 0.5;                   // concentration

  void validate() const {
    if (std::find(kExperiments.begin(), kExperiments.end(), experiment) == kExperiments.end())
      throw ConfigError("experiment: unknown experiment '" + experiment + "'");
    if (d < 1) throw ConfigError("d: must be positive");
    if (n < 1) throw ConfigError("n: must be positive");
    if (N < 1) throw ConfigError("N: must be positive");
    if (threads < 1) throw ConfigError("threads: must be positive");
    try {
      grid.spec.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("beta_grid: ") + e.what());
    }
    if (beta && (!(*beta >= 0.0) || !std::isfinite(*beta))) throw ConfigError("beta: must be finite and >= 0");
    if (task == TaskChoice::all && experiment != "mnist") throw ConfigError("task: 'all' is only valid for mnist");
    if (experiment == "perturb" && values.size() < 2) throw ConfigError("perturb.values: needs at least 2 values");
    for (double v : values)
      if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("perturb.values: must be positive integers");
    if (teachers < 1) throw ConfigError("teachers: must be positive");
    if (samples < 1000) throw ConfigError("concentration.samples: must be >= 1000");
    for (auto k : dims)
      if (k < 3) throw ConfigError("concentration.dims: each d must be >= 3");
    if (!(cos_angle >= -1.0 && cos_angle <= 1.0)) throw ConfigError("concentration.cos_angle: must lie in [-1, 1]");
    if (out.empty()) throw ConfigError("out: output directory must be set");
  }

  SyntheticConfig synthetic() const {
    SyntheticConfig c;
    c.d = d;
    c.n = n;
    c.N = N;
    c.seed = seed;
    c.teacher = teacher;
    c.teacher_index = teacher_index;
    c.grid = grid;
    return c;
  }

  nlohmann::json snapshot() const {
    nlohmann::json j = {{"experiment", experiment},
                        {"d", d},
                        {"n", n},
                        {"N", N},
                        {"seed", seed},
                        {"beta_grid", grid},
                        {"task", to_string(task)},
                        {"teacher", teacher == TeacherKind::ones ? "ones" : "random"},
                        {"teacher_index", teacher_index},
                        {"out", out.string()},
                        {"mnist_dir", mnist_dir.string()},
                        {"threads", threads}};
    if (experiment == "mwe" || experiment == "merge-check")
      j["beta"] = beta ? nlohmann::json(*beta) : nlohmann::json(nullptr);
    if (experiment == "perturb") j["perturb"] = {{"varied", to_string(varied)}, {"values", values}};
    if (experiment == "teacher-inv") j["teachers"] = teachers;
    if (experiment == "concentration")
      j["concentration"] = {{"samples", samples}, {"dims", dims}, {"cos_angle", cos_angle}};
    return j;
  }
};

/// Per-experiment defaults, before any file or flag is applied.
inline ExperimentConfig defaults_for(std::string_view experiment) {
  ExperimentConfig c;
  c.experiment = std::string(experiment);
  if (experiment == "mwe" || experiment == "merge-check") {
    c.d = 500;
    c.n = 20000;
    c.N = 10000;
    c.teacher = TeacherKind::ones;
  } else if (experiment == "loss-dist") {
    c.d = 500;
    c.n = 10000;
    c.N = 10000;
  } else if (experiment == "teacher-inv") {
    c.N = 5000;
  } else if (experiment == "mnist") {
    c.n = 100;
    c.task = TaskChoice::parity;
  }
  return c;
}

/// Values supplied on the command line; unset fields leave the config alone.
struct ConfigOverrides {
  std::optional<std::int64_t> d, n, N;
  std::optional<std::uint64_t> seed;
  std::optional<double> beta_min, beta_max;
  std::optional<std::int64_t> beta_points;
  std::optional<bool> beta_log, include_inf;
  std::optional<std::string> task, teacher;
  std::optional<std::string> mnist_dir, out;
  std::optional<unsigned> threads;
  std::optional<double> beta;
  std::optional<std::string> varied;
  std::optional<std::vector<double>> values;
  std::optional<std::int64_t> teachers;
  std::optional<std::int64_t> samples;
};

namespace detail {

template <class T>
T toml_get(const toml::table& t, std::string_view key, std::string_view field) {
  if (auto v = t[key].value<T>()) return *v;
  throw ConfigError(std::string(field) + ": wrong type");
}

inline void reject_unknown(const toml::table& t, std::initializer_list<std::string_view> known, std::string_view where) {
  for (const auto& [key, _] : t) {
    if (std::find(known.begin(), known.end(), key.str()) == known.end())
      throw ConfigError(std::string(where) + std::string(key.str()) + ": unknown field");
  }
}

inline void apply_grid(const toml::table& t, BetaGrid& g) {
  reject_unknown(t, {"min", "max", "points", "spacing", "include_inf"}, "beta_grid.");
  if (t.contains("min")) g.spec.min = toml_get<double>(t, "min", "beta_grid.min");
  if (t.contains("max")) g.spec.max = toml_get<double>(t, "max", "beta_grid.max");
  if (t.contains("points")) {
    const auto p = toml_get<std::int64_t>(t, "points", "beta_grid.points");
    if (p < 2) throw ConfigError("beta_grid.points: needs at least 2 points");
    g.spec.points = static_cast<std::size_t>(p);
  }
  if (t.contains("spacing")) {
    const auto s = toml_get<std::string>(t, "spacing", "beta_grid.spacing");
    if (s == "log") g.spec.spacing = Spacing::log;
    else if (s == "linear") g.spec.spacing = Spacing::linear;
    else throw ConfigError("beta_grid.spacing: expected log|linear, got '" + s + "'");
  }
  if (t.contains("include_inf")) g.include_inf = toml_get<bool>(t, "include_inf", "beta_grid.include_inf");
}

}  // namespace detail

/// Layers a parsed TOML document over cfg. The "experiment" key, if present,
/// must agree with the experiment being run.
inline void apply_toml(const toml::table& doc, ExperimentConfig& cfg) {
  using detail::toml_get;
  detail::reject_unknown(doc,
                         {"experiment", "d", "n", "N", "seed", "threads", "beta", "task", "teacher", "teacher_index",
                          "beta_grid", "paths", "perturb", "teacher_inv", "concentration"},
                         "");
  if (doc.contains("experiment")) {
    const auto e = toml_get<std::string>(doc, "experiment", "experiment");
    if (e != cfg.experiment)
      throw ConfigError("experiment: file is for '" + e + "' but '" + cfg.experiment + "' was requested");
  }
  if (doc.contains("d")) cfg.d = toml_get<std::int64_t>(doc, "d", "d");
  if (doc.contains("n")) cfg.n = toml_get<std::int64_t>(doc, "n", "n");
  if (doc.contains("N")) cfg.N = toml_get<std::int64_t>(doc, "N", "N");
  if (doc.contains("seed")) {
    const auto s = toml_get<std::int64_t>(doc, "seed", "seed");
    if (s < 0) throw ConfigError("seed: must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(s);
  }
  if (doc.contains("threads")) {
    const auto t = toml_get<std::int64_t>(doc, "threads", "threads");
    if (t < 1) throw ConfigError("threads: must be positive");
    cfg.threads = static_cast<unsigned>(t);
  }
  if (doc.contains("beta")) cfg.beta = toml_get<double>(doc, "beta", "beta");
  if (doc.contains("task")) cfg.task = parse_task(toml_get<std::string>(doc, "task", "task"));
  if (doc.contains("teacher")) cfg.teacher = parse_teacher(toml_get<std::string>(doc, "teacher", "teacher"));
  if (doc.contains("teacher_index")) {
    const auto k = toml_get<std::int64_t>(doc, "teacher_index", "teacher_index");
    if (k < 0) throw ConfigError("teacher_index: must be non-negative");
    cfg.teacher_index = static_cast<std::uint64_t>(k);
  }
  auto table = [&](std::string_view key) -> const toml::table* {
    if (!doc.contains(key)) return nullptr;
    const auto* t = doc.get(key)->as_table();
    if (!t) throw ConfigError(std::string(key) + ": expected a table");
    return t;
  };
  if (const auto* g = table("beta_grid")) detail::apply_grid(*g, cfg.grid);
  if (const auto* p = table("paths")) {
    detail::reject_unknown(*p, {"out", "mnist_dir"}, "paths.");
    if (p->contains("out")) cfg.out = toml_get<std::string>(*p, "out", "paths.out");
    if (p->contains("mnist_dir")) cfg.mnist_dir = toml_get<std::string>(*p, "mnist_dir", "paths.mnist_dir");
  }
  if (const auto* p = table("perturb")) {
    detail::reject_unknown(*p, {"varied", "values"}, "perturb.");
    if (p->contains("varied")) cfg.varied = parse_varied(toml_get<std::string>(*p, "varied", "perturb.varied"));
    if (p->contains("values")) {
      const auto* arr = p->get("values")->as_array();
      if (!arr) throw ConfigError("perturb.values: expected an array");
      cfg.values.clear();
      for (const auto& e : *arr) {
        auto x = e.value<double>();
        if (!x) throw ConfigError("perturb.values: expected numbers");
        cfg.values.push_back(*x);
      }
    }
  }
  if (const auto* p = table("teacher_inv")) {
    detail::reject_unknown(*p, {"teachers"}, "teacher_inv.");
    if (p->contains("teachers")) cfg.teachers = toml_get<std::int64_t>(*p, "teachers", "teacher_inv.teachers");
  }
  if (const auto* p = table("concentration")) {
    detail::reject_unknown(*p, {"samples", "dims", "cos_angle"}, "concentration.");
    if (p->contains("samples")) cfg.samples = toml_get<std::int64_t>(*p, "samples", "concentration.samples");
    if (p->contains("cos_angle")) cfg.cos_angle = toml_get<double>(*p, "cos_angle", "concentration.cos_angle");
    if (p->contains("dims")) {
      const auto* arr = p->get("dims")->as_array();
      if (!arr) throw ConfigError("concentration.dims: expected an array");
      cfg.dims.clear();
      for (const auto& e : *arr) {
        auto x = e.value<std::int64_t>();
        if (!x) throw ConfigError("concentration.dims: expected integers");
        cfg.dims.push_back(*x);
      }
    }
  }
}

inline void apply_toml_file(const std::filesystem::path& path, ExperimentConfig& cfg) {
  if (!std::filesystem::exists(path)) throw ConfigError("config: file not found: " + path.string());
  toml::table doc;
  try {
    doc = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + std::string(e.description()));
  }
  apply_toml(doc, cfg);
}

inline void apply_overrides(const ConfigOverrides& o, ExperimentConfig& cfg) {
  if (o.d) cfg.d = *o.d;
  if (o.n) cfg.n = *o.n;
  if (o.N) cfg.N = *o.N;
  if (o.seed) cfg.seed = *o.seed;
  if (o.beta_min) cfg.grid.spec.min = *o.beta_min;
  if (o.beta_max) cfg.grid.spec.max = *o.beta_max;
  if (o.beta_points) {
    if (*o.beta_points < 2) throw ConfigError("beta-points: needs at least 2 points");
    cfg.grid.spec.points = static_cast<std::size_t>(*o.beta_points);
  }
  if (o.beta_log) cfg.grid.spec.spacing = *o.beta_log ? Spacing::log : Spacing::linear;
  if (o.include_inf) cfg.grid.include_inf = *o.include_inf;
  if (o.task) cfg.task = parse_task(*o.task);
  if (o.teacher) cfg.teacher = parse_teacher(*o.teacher);
  if (o.mnist_dir) cfg.mnist_dir = *o.mnist_dir;
  if (o.out) cfg.out = *o.out;
  if (o.threads) cfg.threads = *o.threads;
  if (o.beta) cfg.beta = *o.beta;
  if (o.varied) cfg.varied = parse_varied(*o.varied);
  if (o.values) cfg.values = *o.values;
  if (o.teachers) cfg.teachers = *o.teachers;
  if (o.samples) cfg.samples = *o.samples;
}

/// defaults < file < flags, then validation.
inline ExperimentConfig resolve_config(std::string_view experiment, const std::optional<std::filesystem::path>& file,
                                       const ConfigOverrides& flags) {
  if (std::find(kExperiments.begin(), kExperiments.end(), experiment) == kExperiments.end())
    throw ConfigError("experiment: unknown experiment '" + std::string(experiment) + "'");
  ExperimentConfig cfg = defaults_for(experiment);
  if (file) apply_toml_file(*file, cfg);
  apply_overrides(flags, cfg);
  cfg.validate();
  return cfg;
}

}  // namespace gibbs
