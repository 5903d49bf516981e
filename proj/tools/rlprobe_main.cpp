// rlprobe: train, sweep, evaluate and report generalization experiments.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rlprobe/agents.hpp"
#include "rlprobe/config.hpp"
#include "rlprobe/digest.hpp"
#include "rlprobe/harness.hpp"
#include "rlprobe/image.hpp"
#include "rlprobe/registry.hpp"
#include "rlprobe/report.hpp"
#include "rlprobe/selftest.hpp"

namespace fs = std::filesystem;
using namespace rlprobe;

namespace {

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kConfig = 2,
  kIncompatible = 3,
  kData = 4,
  kIo = 5,
  kTraining = 6,
  kSelftest = 7,
  kInterrupted = 130,
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SelftestFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::atomic<bool> g_cancel{false};

extern "C" void on_sigint(int) { g_cancel.store(true); }

template <typename F>
auto io(F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
}

void fail(int code, const std::string& kind, const std::string& msg) {
  std::string escaped;
  for (char c : msg) {
    if (c == '"' || c == '\\') escaped += '\\';
    escaped += c == '\n' ? ' ' : c;
  }
  std::cerr << "error: code=" << code << " kind=" << kind << " msg=\"" << escaped << "\"\n";
}

// Options shared by the commands that build a RunConfig. Only flags given on
// the command line reach the override map, so file values survive.
struct ConfigFlags {
  std::optional<std::string> config;
  std::map<std::string, std::optional<std::string>> values;
  std::vector<std::string> sets;

  void add(CLI::App* app) {
    app->add_option("--config", config, "TOML config file")->check(CLI::ExistingFile);
    const std::vector<std::pair<std::string, std::string>> table = {
        {"--env", "env"},
        {"--agent", "agent"},
        {"--train-seeds", "train_seeds"},
        {"--test-seeds", "test_seeds"},
        {"--episodes", "episodes"},
        {"--steps", "steps"},
        {"--eval-every", "eval_every"},
        {"--runs", "runs"},
        {"--jobs", "jobs"},
        {"--seed", "seed"},
        {"--out", "out"},
        {"--gamma", "gamma"},
        {"--lr", "lr"},
        {"--hidden", "hidden"},
        {"--k-bins", "wrappers.k_bins"},
        {"--p-rand", "wrappers.p_rand"},
        {"--sigma2", "wrappers.sigma2"},
        {"--init-mult", "wrappers.init_mult"},
        {"--data-dir", "data.dir"},
        {"--window", "data.window"},
        {"--label-noise", "data.label_noise"},
    };
    for (const auto& [flag, key] : table) app->add_option(flag, values[key], key);
    app->add_option("--set", sets, "key=value override for any config key");
  }

  RunConfig resolve() const {
    std::map<std::string, std::string> flags;
    for (const auto& [k, v] : values)
      if (v) flags[k] = *v;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
      flags[s.substr(0, eq)] = s.substr(eq + 1);
    }
    std::optional<fs::path> path;
    if (config) path = *config;
    return load_config(path, flags);
  }
};

void write_outputs(const RunConfig& cfg, const SweepOutput& out) {
  const fs::path dir = cfg.out;
  io([&] {
    fs::create_directories(dir);
    std::ofstream toml(dir / "config.toml");
    toml << to_toml(cfg);
    if (!toml) throw std::runtime_error((dir / "config.toml").string() + ": write failed");
    write_metrics(out.log, dir / "metrics.csv");
    write_trajectories(out.trajectories, dir / "trajectories.csv");
    for (std::size_t i = 0; i < out.jobs.size() && i < out.policies.size(); ++i)
      save_policy(out.policies[i], dir / ("policy-" + out.jobs[i].run_id + ".bin"));
    const auto marker = dir / "INCOMPLETE";
    if (out.incomplete) {
      std::ofstream(marker) << "interrupted before every run finished\n";
    } else {
      fs::remove(marker);
    }
  });
}

int finish(const RunConfig& cfg, const SweepOutput& out) {
  write_outputs(cfg, out);
  if (!out.incomplete) std::cout << summary_table(summarize_cells(out.log));
  std::cout << "wrote " << out.log.size() << " records to " << (fs::path(cfg.out) / "metrics.csv").string()
            << (out.incomplete ? " (incomplete)" : "") << "\n";
  return out.incomplete ? kInterrupted : kOk;
}

int cmd_train(const ConfigFlags& flags) {
  const auto cfg = flags.resolve();
  return finish(cfg, run_cell(cfg, &g_cancel));
}

int cmd_sweep(const ConfigFlags& flags, const std::string& kind) {
  const auto cfg = flags.resolve();
  if (kind == "seeds") return finish(cfg, run_seed_sweep(cfg, &g_cancel));
  if (kind == "random-reward") return finish(cfg, run_random_reward_sweep(cfg, &g_cancel));
  const auto axis = kind == "noise" ? RobustAxis::kSigma2 : RobustAxis::kInitMult;
  SweepOutput out;
  const auto table = run_robustness_sweep(cfg, axis, &g_cancel, &out);
  write_outputs(cfg, out);
  if (out.incomplete) return kInterrupted;
  const auto text = table.to_text();
  io([&] {
    std::ofstream f(fs::path(cfg.out) / "robustness.txt");
    f << text;
    if (!f) throw std::runtime_error("robustness.txt: write failed");
  });
  std::cout << text;
  return kOk;
}

int cmd_eval(const ConfigFlags& flags, const std::string& checkpoint, const std::string& axis_name_) {
  const auto cfg = flags.resolve();
  const auto policy = io([&] { return load_policy(checkpoint); });
  const auto factory = env_factory(cfg.env, cfg.data);
  policy.check_compatible(factory()->spec());
  const auto protocol = make_protocol(cfg.train_seeds, cfg.test_seeds);
  MetricsLog log;
  const std::vector<std::pair<RobustAxis, std::vector<double>>> axes =
      axis_name_ == "sigma2"      ? std::vector<std::pair<RobustAxis, std::vector<double>>>{{RobustAxis::kSigma2,
                                                                                           cfg.sweep.sigma2}}
      : axis_name_ == "init-mult" ? std::vector<std::pair<RobustAxis, std::vector<double>>>{{RobustAxis::kInitMult,
                                                                                           cfg.sweep.init_mult}}
                                  : std::vector<std::pair<RobustAxis, std::vector<double>>>{
                                        {RobustAxis::kSigma2, cfg.sweep.sigma2},
                                        {RobustAxis::kInitMult, cfg.sweep.init_mult}};
  const std::string run_id = fs::path(checkpoint).stem().string();
  for (const auto& [axis, levels] : axes) {
    const auto row = robustness_row(policy, factory, protocol.test_seeds(), axis, levels, &log, run_id,
                                    cell_snapshot(cfg));
    std::cout << axis_name(axis) << ":";
    for (std::size_t i = 0; i < levels.size(); ++i) std::cout << " " << format_double(levels[i]) << "=" << row[i];
    std::cout << "\n";
  }
  io([&] {
    fs::create_directories(cfg.out);
    write_metrics(log, fs::path(cfg.out) / "eval-metrics.csv");
  });
  return kOk;
}

int cmd_report(const std::string& input, const std::string& out_dir) {
  const auto log = io([&] { return read_metrics(fs::path(input)); });
  const auto files = io([&] { return emit_report(log, out_dir); });
  for (const auto& c : files.charts) std::cout << c.string() << "\n";
  std::cout << files.summary.string() << "\n";
  return kOk;
}

int cmd_fetch_data(const std::string& data_dir, const std::string& which) {
  const auto root = resolve_data_dir(data_dir);
  bool missing = false;
  auto check = [&](const std::string& name, const std::vector<std::string>& files,
                   const std::vector<fs::path>& dirs) {
    for (const auto& f : files) {
      std::optional<fs::path> found;
      for (const auto& d : dirs)
        if (fs::is_regular_file(d / f)) {
          found = d / f;
          break;
        }
      if (!found) {
        std::cout << name << " missing " << f << "\n";
        missing = true;
        continue;
      }
      std::cout << name << " " << found->string() << " sha256=" << sha256_file(*found) << "\n";
    }
  };
  if (which == "mnist" || which == "all") check("mnist", mnist_file_names(), {root / "mnist", root});
  if (which == "cifar10" || which == "all")
    check("cifar10", cifar10_file_names(), {root / "cifar-10-batches-bin", root});
  if (missing)
    throw DatasetError(DatasetError::Kind::kMissingFile, "dataset files missing under " + root.string());
  if (which == "mnist" || which == "all") {
    const auto pair = load_mnist(root);
    std::cout << "mnist train=" << pair.train.size() << " test=" << pair.test.size() << "\n";
  }
  if (which == "cifar10" || which == "all") {
    const auto pair = load_cifar10(root);
    std::cout << "cifar10 train=" << pair.train.size() << " test=" << pair.test.size() << "\n";
  }
  return kOk;
}

int cmd_selftest() {
  bool ok = true;
  for (const auto& r : run_selftest()) {
    std::cout << (r.ok ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    ok = ok && r.ok;
  }
  if (!ok) throw SelftestFailed("one or more checks failed");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rlprobe: generalization experiments for deep RL"};
  app.require_subcommand(1);

  ConfigFlags train_flags, sweep_flags, eval_flags;
  auto* train = app.add_subcommand("train", "train one cell (all runs) and log train/test returns");
  train_flags.add(train);

  std::string sweep_kind = "seeds";
  auto* sweep = app.add_subcommand("sweep", "run a sweep over the plan in [sweep]");
  sweep_flags.add(sweep);
  sweep->add_option("--kind", sweep_kind, "seeds | random-reward | noise | multiplier")
      ->check(CLI::IsMember({"seeds", "random-reward", "noise", "multiplier"}));

  std::string checkpoint, axis = "both";
  auto* eval = app.add_subcommand("eval", "robustness table for a saved policy");
  eval_flags.add(eval);
  eval->add_option("--checkpoint", checkpoint, "policy file written by train")->required()->check(CLI::ExistingFile);
  eval->add_option("--axis", axis, "sigma2 | init-mult | both")->check(CLI::IsMember({"sigma2", "init-mult", "both"}));

  std::string report_in = "runs/metrics.csv", report_out = "runs/report";
  auto* report = app.add_subcommand("report", "SVG charts and summary table from a metrics CSV");
  report->add_option("--in", report_in, "metrics CSV");
  report->add_option("--out", report_out, "output directory");

  std::string data_dir, dataset = "all";
  auto* fetch = app.add_subcommand("fetch-data", "check dataset files and print their SHA-256");
  fetch->add_option("--data-dir", data_dir, "dataset root (default $RLPROBE_DATA_DIR, then ./data)");
  fetch->add_option("--dataset", dataset, "mnist | cifar10 | all")->check(CLI::IsMember({"mnist", "cifar10", "all"}));

  auto* selftest = app.add_subcommand("selftest", "gradient checks, wrapper transparency and the gap oracle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail(kConfig, "usage", e.what());
    return kConfig;
  }

  std::signal(SIGINT, on_sigint);
  try {
    if (*train) return cmd_train(train_flags);
    if (*sweep) return cmd_sweep(sweep_flags, sweep_kind);
    if (*eval) return cmd_eval(eval_flags, checkpoint, axis);
    if (*report) return cmd_report(report_in, report_out);
    if (*fetch) return cmd_fetch_data(data_dir, dataset);
    if (*selftest) return cmd_selftest();
  } catch (const ConfigError& e) {
    fail(kConfig, "config", e.what());
    return kConfig;
  } catch (const IncompatibleConfig& e) {
    fail(kIncompatible, "incompatible", e.what());
    return kIncompatible;
  } catch (const Unsupported& e) {
    fail(kIncompatible, "unsupported", e.what());
    return kIncompatible;
  } catch (const DatasetError& e) {
    fail(kData, "data", e.what());
    return kData;
  } catch (const IoError& e) {
    fail(kIo, "io", e.what());
    return kIo;
  } catch (const TrainingError& e) {
    fail(kTraining, "training", e.what());
    return kTraining;
  } catch (const SelftestFailed& e) {
    fail(kSelftest, "selftest", e.what());
    return kSelftest;
  } catch (const std::exception& e) {
    fail(kOther, "internal", e.what());
    return kOther;
  }
  return kOther;
}
