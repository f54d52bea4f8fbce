#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "gibbs/config.hpp"
#include "gibbs/data.hpp"
#include "gibbs/errors.hpp"
#include "gibbs/mnist.hpp"
#include "gibbs/mnist_fetch.hpp"
#include "gibbs/runner.hpp"

namespace {

enum ExitCode : int { kOk = 0, kInternal = 1, kConfig = 2, kIo = 3, kDomain = 4 };

namespace fs = std::filesystem;

/// Registers the shared experiment flags; each sets its override only when given.
void add_experiment_flags(CLI::App& cmd, gibbs::ConfigOverrides& o, std::optional<std::string>& config_path) {
  auto opt = [&cmd](const char* name, auto& slot, const char* help) {
    cmd.add_option_function<typename std::decay_t<decltype(slot)>::value_type>(
        name, [&slot](const auto& v) { slot = v; }, help);
  };
  opt("--d", o.d, "Input dimension");
  opt("--n", o.n, "Number of random classifiers");
  opt("--N", o.N, "Samples per split");
  opt("--seed", o.seed, "Master seed");
  opt("--beta-min", o.beta_min, "Smallest grid beta");
  opt("--beta-max", o.beta_max, "Largest grid beta");
  opt("--beta-points", o.beta_points, "Number of grid points");
  cmd.add_flag_function(
      "--beta-log,!--beta-linear", [&o](std::int64_t c) { o.beta_log = c > 0; }, "Log (default) or linear beta grid");
  cmd.add_flag_function(
      "--include-inf,!--no-include-inf", [&o](std::int64_t c) { o.include_inf = c > 0; },
      "Append the beta=inf point (default on)");
  opt("--task", o.task, "teacher|parity|leq5 (mnist also accepts all)");
  opt("--teacher", o.teacher, "ones|random");
  opt("--mnist-dir", o.mnist_dir, "Directory with raw MNIST IDX files");
  opt("--out", o.out, "Output directory");
  opt("--threads", o.threads, "Worker threads (results do not depend on it)");
  opt("--beta", o.beta, "Inverse temperature for mwe/merge-check (default pi*sqrt(d-2))");
  opt("--varied", o.varied, "perturb: d|n|N");
  cmd.add_option_function<std::vector<double>>(
      "--values", [&o](const std::vector<double>& v) { o.values = v; }, "perturb: values of the varied quantity")
      ->delimiter(',');
  opt("--teachers", o.teachers, "teacher-inv: number of teachers");
  opt("--samples", o.samples, "concentration: Monte-Carlo samples");
  cmd.add_option_function<std::string>(
      "--config", [&config_path](const std::string& p) { config_path = p; }, "TOML config file (flags override it)");
}

int run_main(int argc, char** argv) {
  CLI::App app{"Gibbs-weighted ensembles of random perceptrons"};
  app.require_subcommand(1);

  std::string experiment;
  gibbs::ConfigOverrides overrides;
  std::optional<std::string> config_path;
  auto* run = app.add_subcommand("run", "Run an experiment and write CSV/JSON artifacts");
  run->add_option("experiment", experiment, "mwe|loss-dist|sweep|perturb|teacher-inv|mnist|theory|concentration|merge-check")
      ->required();
  add_experiment_flags(*run, overrides, config_path);

  std::int64_t gd = 100, gN = 10000;
  std::uint64_t gseed = 42;
  std::string gteacher = "random", gsplit = "train", gsource = "synthetic", gtask = "parity", gmnist;
  std::optional<std::string> gout;
  unsigned gthreads = gibbs::default_threads();
  auto* gen = app.add_subcommand("gen-data", "Write a dataset to the cache");
  gen->add_option("--source", gsource, "synthetic|mnist")->check(CLI::IsMember({"synthetic", "mnist"}));
  gen->add_option("--d", gd, "Input dimension (synthetic)");
  gen->add_option("--N", gN, "Number of samples (synthetic)");
  gen->add_option("--seed", gseed, "Master seed");
  gen->add_option("--teacher", gteacher, "ones|random (synthetic)");
  gen->add_option("--split", gsplit, "train|test")->check(CLI::IsMember({"train", "test"}));
  gen->add_option("--task", gtask, "parity|leq5|teacher (mnist)");
  gen->add_option("--mnist-dir", gmnist, "Directory with raw MNIST IDX files");
  gen->add_option_function<std::string>("--out", [&gout](const std::string& p) { gout = p; },
                                        "Output directory (default: the cache root)");
  gen->add_option("--threads", gthreads, "Worker threads");

  std::string mirror(gibbs::kDefaultMnistMirror);
  std::optional<std::string> fetch_dir;
  auto* fetch = app.add_subcommand("fetch-mnist", "Download and verify the MNIST IDX files");
  fetch->add_option("--mirror", mirror, "Base URL holding the *.gz IDX files");
  fetch->add_option_function<std::string>("--mnist-dir", [&fetch_dir](const std::string& p) { fetch_dir = p; },
                                          "Target directory (default: <cache>/mnist)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  if (*run) {
    std::optional<fs::path> file;
    if (config_path) file = *config_path;
    const auto cfg = gibbs::resolve_config(experiment, file, overrides);
    gibbs::run_experiment(cfg, std::cout);
    return kOk;
  }

  if (*gen) {
    const fs::path out_dir = gout ? fs::path(*gout) : gibbs::cache_root();
    const gibbs::Execution exec{gthreads};
    gibbs::Dataset ds;
    std::string stem;
    if (gsource == "synthetic") {
      gibbs::SyntheticConfig c;
      c.d = gd;
      c.N = gN;
      c.seed = gseed;
      c.teacher = gibbs::parse_teacher(gteacher);
      if (gd < 1 || gN < 1) throw gibbs::ConfigError("d, N: must be positive");
      const auto teacher = gibbs::make_teacher(c);
      const auto tag = gsplit == "train" ? gibbs::stream_tag::train_features : gibbs::stream_tag::test_features;
      ds = gibbs::make_gaussian_dataset({gseed, tag}, gN, gd, teacher, exec.threads);
      ds.meta.split = gsplit;
      ds.meta.teacher = gteacher;
      stem = "synthetic_d" + std::to_string(gd) + "_N" + std::to_string(gN) + "_seed" + std::to_string(gseed) + "_" +
             gteacher + "_" + gsplit;
    } else {
      const fs::path dir = gmnist.empty() ? gibbs::cache_root() / "mnist" : fs::path(gmnist);
      const auto files = gibbs::MnistFiles::in(dir);
      if (!files.present()) throw gibbs::IoError("MNIST IDX files not found in " + dir.string());
      auto split = gsplit == "train" ? gibbs::load_mnist_idx(files.train_images, files.train_labels)
                                     : gibbs::load_mnist_idx(files.test_images, files.test_labels);
      const auto choice = gibbs::parse_task(gtask);
      gibbs::LabelTask task = choice == gibbs::TaskChoice::parity ? gibbs::LabelTask::parity()
                              : choice == gibbs::TaskChoice::leq5
                                  ? gibbs::LabelTask::leq5()
                                  : gibbs::LabelTask::random_teacher(gibbs::unit_teacher(
                                        {gseed, gibbs::stream_tag::teacher}, static_cast<std::size_t>(split.X.cols())));
      if (choice == gibbs::TaskChoice::all) throw gibbs::ConfigError("task: gen-data needs a single task");
      ds = gibbs::apply_task(split.digits, std::move(split.X), task);
      ds.meta.split = gsplit;
      ds.meta.seed = gseed;
      stem = "mnist_" + gibbs::to_string(task.kind) + "_" + gsplit;
    }
    gibbs::save_dataset(ds, out_dir / stem);
    std::cout << "gen-data: wrote " << (out_dir / stem).string() << ".dsbin N=" << ds.size() << " d=" << ds.dim()
              << '\n';
    return kOk;
  }

  if (*fetch) {
    const fs::path dir = fetch_dir ? fs::path(*fetch_dir) : gibbs::cache_root() / "mnist";
    gibbs::fetch_mnist(mirror, dir);
    std::cout << "fetch-mnist: files ready in " << dir.string() << '\n';
    return kOk;
  }
  return kConfig;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_main(argc, argv);
  } catch (const gibbs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const gibbs::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const gibbs::DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return kDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  }
}
