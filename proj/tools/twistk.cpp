// Command-line front end: twistk <solve|ladder|sweep|threshold|perturb|verify> [options]

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "twistk/runner.hpp"

namespace {

using namespace twistk;

std::vector<int> parse_sizes(const std::string& text) {
  std::vector<int> sizes;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::size_t used = 0;
    const int v = std::stoi(part, &used);
    if (used != part.size()) throw std::invalid_argument(part);
    sizes.push_back(v);
  }
  return sizes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Twisted constant scalar curvature solver on flat complex tori"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path, out_dir, grid_text;
  std::uint64_t seed = 0;
  double tol = 0.0;
  int threads = 0;

  const std::pair<const char*, ScenarioKind> commands[] = {
      {"solve", ScenarioKind::single_solve},          {"ladder", ScenarioKind::ladder_study},
      {"sweep", ScenarioKind::continuity_sweep},      {"threshold", ScenarioKind::threshold},
      {"perturb", ScenarioKind::twist_perturbation},  {"verify", ScenarioKind::verify_suite}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, kind] : commands) {
    auto* sub = app.add_subcommand(name, std::string("run a ") + to_string(kind) + " scenario");
    sub->add_option("--config", config_path, "YAML run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--grid", grid_text, "grid sizes N1,N2[,N3,N4]");
    sub->add_option("--tol", tol, "Newton residual tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--threads", threads, "worker threads (TWISTK_THREADS overrides)")->check(CLI::PositiveNumber);
    subs.push_back(sub);
  }
  CLI11_PARSE(app, argc, argv);

  ScenarioKind kind = ScenarioKind::single_solve;
  CLI::App* active = nullptr;
  for (std::size_t i = 0; i < subs.size(); ++i)
    if (subs[i]->parsed()) {
      kind = commands[i].second;
      active = subs[i];
    }

  try {
    std::optional<std::vector<int>> sizes;
    if (!grid_text.empty()) {
      try {
        sizes = parse_sizes(grid_text);
      } catch (const std::exception&) {
        std::cerr << "error: --grid expects comma-separated integers, got '" << grid_text << "'\n";
        return 2;
      }
      if (sizes->size() != 2 && sizes->size() != 4) {
        std::cerr << "error: --grid needs 2 (n = 1) or 4 (n = 2) sizes\n";
        return 2;
      }
    }

    RunConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      std::stringstream text;
      text << in.rdbuf();
      cfg = parse_config(text.str(), kind);
    } else {
      cfg = default_config(kind, sizes ? static_cast<int>(sizes->size()) / 2 : 1);
    }
    if (sizes) cfg.grid = *sizes;
    if (active->count("--out")) cfg.output = out_dir;
    if (active->count("--seed")) cfg.seed = seed;
    if (active->count("--tol")) cfg.solver.newton_tolerance = tol;
    if (active->count("--threads")) cfg.threads = threads;
    if (const char* env = std::getenv("TWISTK_THREADS")) {
      try {
        cfg.threads = std::stoi(env);
      } catch (const std::exception&) {
        std::cerr << "error: TWISTK_THREADS must be an integer\n";
        return 2;
      }
    }
    validate_config(cfg);

    const auto outcome = run_scenario(cfg);
    std::cout << to_string(cfg.scenario) << ": " << outcome.message << " (exit " << outcome.exit_code
              << ", output " << outcome.directory.string() << ")\n";
    return outcome.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << (config_path.empty() ? std::string("options") : config_path) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
