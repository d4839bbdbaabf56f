#include <chrono>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "rndecomp/rndecomp.hpp"

namespace {

int run_config(const std::string& path, rndecomp::RunKind kind, bool timing) {
  const auto config = rndecomp::load_config(path);
  const auto rows = rndecomp::run_experiment(config, {kind, timing});
  std::cout << rndecomp::metrics_csv(rows, timing);
  std::cerr << "wrote " << config.out_dir << "/metrics.csv\n";
  return 0;
}

int run_checks() {
  const auto start = std::chrono::steady_clock::now();
  int failed = 0;
  for (const auto& r : rndecomp::run_invariant_suite()) {
    std::printf("%s  %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    failed += r.passed ? 0 : 1;
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%d failed, %.1f s\n", failed, s);
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Range-nullspace decomposition experiments for linear inverse problems"};
  app.set_version_flag("--version", std::string("rn-decomp ") + rndecomp::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  bool timing = false;
  auto* run = app.add_subcommand("run", "Train and evaluate the mechanisms listed in a config");
  run->add_option("config", config_path, "Config file")->required();
  run->add_flag("--timing", timing, "Write wall-clock inference time into metrics.csv");
  auto* ablate = app.add_subcommand("ablate", "Run the four-way projector ablation for a config");
  ablate->add_option("config", config_path, "Config file")->required();
  ablate->add_flag("--timing", timing, "Write wall-clock inference time into metrics.csv");
  auto* check = app.add_subcommand("check", "Run the invariant suite");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return run_config(config_path, rndecomp::RunKind::run, timing);
    if (*ablate) return run_config(config_path, rndecomp::RunKind::ablate, timing);
    if (*check) return run_checks();
  } catch (const std::exception& e) {
    std::cerr << "rn-decomp: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
