// lyap: batch experiments on random matrix products. Every run writes
// report.json plus CSV tables into --out; outputs depend only on the config
// and the effective seed, never on worker count or timing. run_meta.json
// carries the wall clock and worker count and is the only timing-bearing file.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "lyap/experiments.hpp"
#include "lyap/io.hpp"

namespace fs = std::filesystem;

#ifndef LYAP_CONFIG_DIR
#define LYAP_CONFIG_DIR "configs"
#endif

namespace {

int list_templates() {
  const fs::path dir(LYAP_CONFIG_DIR);
  std::vector<std::pair<std::string, std::string>> rows;
  if (fs::exists(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".json")
        rows.emplace_back(e.path().stem().string(), fs::absolute(e.path()).string());
  std::sort(rows.begin(), rows.end());
  for (const auto& [name, path] : rows) std::cout << name << "\t" << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "lyap: Lyapunov spectra, stationary measures, and drift diagnostics "
      "for products of random matrices"};
  std::string experiment;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed_opt;
  int workers = 1;
  bool list = false;

  app.add_flag("--list", list, "list bundled experiment templates and exit");
  app.add_option("experiment", experiment,
                 "experiment name: spectrum | stationary | kifer | ltheta | "
                 "example32 | sweep | drift | repeller | margulis-check");
  app.add_option("--config", config_path, "path to a JSON config");
  app.add_option("--seed", seed_opt, "seed override (env LYAP_SEED wins over this)");
  app.add_option("--out", out_dir, "output directory (created if missing)");
  app.add_option("--workers", workers, "worker threads for trial loops (default 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 3;
  }

  if (list) return list_templates();
  if (experiment.empty() || config_path.empty()) {
    std::cerr << "usage: lyap <experiment> --config <path> [--seed N] [--out DIR]"
                 " [--workers K]\n       lyap --list\n";
    return 3;
  }

  std::optional<std::uint64_t> seed_override = seed_opt;
  if (const char* env = std::getenv("LYAP_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') {
      std::cerr << "LYAP_SEED is not an unsigned integer: " << env << "\n";
      return 3;
    }
    seed_override = v;
  }

  nlohmann::json config;
  try {
    config = lyap::load_json_file(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  }

  const auto t0 = std::chrono::steady_clock::now();
  lyap::ExperimentResult result;
  try {
    result = lyap::run_experiment(experiment, config, seed_override, workers);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "experiment failed: " << e.what() << "\n";
    return 2;
  }
  const double elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
          .count();

  try {
    fs::create_directories(out_dir);
    lyap::write_json_file((fs::path(out_dir) / "report.json").string(), result.report);
    for (const auto& [stem, table] : result.tables)
      lyap::write_csv((fs::path(out_dir) / (stem + ".csv")).string(), table.header,
                      table.rows);
    for (const auto& [stem, doc] : result.extra_json)
      lyap::write_json_file((fs::path(out_dir) / (stem + ".json")).string(), doc);
    const nlohmann::json meta{
        {"experiment", experiment}, {"workers", workers}, {"elapsed_ms", elapsed_ms}};
    lyap::write_json_file((fs::path(out_dir) / "run_meta.json").string(), meta);
  } catch (const std::exception& e) {
    std::cerr << "output error: " << e.what() << "\n";
    return 3;
  }

  if (!result.failures.empty()) {
    std::cerr << experiment << ": " << result.failures.size() << " check(s) failed:\n";
    for (const auto& f : result.failures) std::cerr << "  " << f << "\n";
    return 2;
  }
  std::cout << experiment << ": all checks passed; outputs in "
            << fs::absolute(out_dir).string() << "\n";
  return 0;
}
