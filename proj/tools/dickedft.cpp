// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cli/commands.hpp"
#include "cli/config.hpp"

namespace {

const std::vector<std::pair<std::string, std::string>> kSubcommands{
    {"spectrum", "Low-lying spectrum of H(v, j)"},
    {"curve", "F(sigma, xi) along a magnetization grid for several couplings"},
    {"functional", "Lieb and Levy-Lieb functionals at one density pair"},
    {"adiabatic", "Adiabatic-connection integrals at xi = 0"},
    {"regular-set", "Irregular hyperplanes and components of the regular set"},
    {"diagnose", "Residual checks of exact identities"},
    {"hk-scan", "Injectivity scan of the potential-to-density map"},
};

}  // namespace

int main(int argc, char** argv) {
  using namespace dickedft;
  CLI::App app{"Density functionals of the multi-mode Dicke model"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::vector<std::string> formats;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory (config output.dir wins)");
  app.add_option("--seed", seed, "Random seed (config seed wins)");
  app.add_option("--threads", threads, "Worker threads (config threads wins)")
      ->check(CLI::PositiveNumber);
  app.add_option("--format", formats, "Formats to write: csv, json, svg")
      ->delimiter(',')
      ->check(CLI::IsMember({"csv", "json", "svg"}));
  for (const auto& [name, help] : kSubcommands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    cli::RunConfig cfg = config_path.empty() ? cli::RunConfig{} : cli::load_config(config_path);
    if (!cfg.seed && seed) cfg.seed = *seed;
    if (!cfg.threads && threads) cfg.threads = *threads;
    if (!cfg.output.dir) cfg.output.dir = out_dir.empty() ? std::string(".") : out_dir;
    if (!cfg.output.formats && !formats.empty()) cfg.output.formats = formats;

    const auto t0 = std::chrono::steady_clock::now();
    const cli::CommandOutput out = cli::run_command(command, cfg);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& p : cli::write_outputs(command, out, cfg, wall)) {
      std::cout << p.string() << "\n";
    }
    return static_cast<int>(out.exit_code);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kNumerical);
  }
}
