// Command-line front end.
//
//   sadi run <config.json> [--out DIR] [--seeds s1,s2,...] [--jobs K]
//   sadi validate <config.json>
//   sadi diagnose <checkpoint.csv>
//
// Exit codes: 0 success, 1 invalid config, 2 escape in strict mode, 3 I/O error.

#include "sadi/experiment.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int kOk = 0;
constexpr int kInvalidConfig = 1;
constexpr int kEscaped = 2;
constexpr int kIoError = 3;

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sadi::IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw sadi::ConfigError(std::string("unparseable document: ") + e.what());
  }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) throw sadi::ConfigError("--seeds: empty list");
  return seeds;
}

int cmd_validate(const std::string& path) {
  const auto violations = sadi::validate_config(load_json(path));
  for (const auto& v : violations) std::cout << "violation: " << v << "\n";
  if (!violations.empty()) return kInvalidConfig;
  std::cout << "ok\n";
  return kOk;
}

int cmd_run(const std::string& path, const std::string& out, const std::string& seeds, int jobs) {
  const auto doc = load_json(path);
  const auto violations = sadi::validate_config(doc);
  if (!violations.empty()) {
    for (const auto& v : violations) std::cerr << "violation: " << v << "\n";
    return kInvalidConfig;
  }
  const auto cfg = sadi::parse_config(doc);
  sadi::RunRequest request;
  if (!out.empty()) request.output_dir = out;
  if (!seeds.empty()) request.seeds = parse_seed_list(seeds);
  request.jobs = jobs;
  const auto report = sadi::run_experiment(cfg, request);
  for (const auto& run : report.runs) {
    std::cout << "seed " << run.seed << ": " << (run.status.escaped ? "escaped" : "completed") << " after "
              << run.steps << " steps";
    if (run.nash_distance_inf) std::cout << ", nash distance " << *run.nash_distance_inf;
    std::cout << "\n";
  }
  std::cout << "bounded fraction " << report.bounded_fraction() << "\n";
  if (cfg.strict_boundedness && report.any_escaped()) return kEscaped;
  return kOk;
}

int cmd_diagnose(const std::string& path) {
  const auto diag = sadi::diagnose_checkpoint(path);
  std::cout << diag.to_json().dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic approximation with differential inclusions: runs and diagnostics"};
  app.require_subcommand(1);

  std::string config_path, out_dir, seeds, checkpoint_path;
  int jobs = 1;

  auto* run = app.add_subcommand("run", "Run an experiment and write artifacts");
  run->add_option("config", config_path, "Experiment configuration (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--seeds", seeds, "Comma-separated seed list (overrides the config)");
  run->add_option("--jobs", jobs, "Concurrent seeds")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Check a configuration against the step and noise assumptions");
  validate->add_option("config", config_path, "Experiment configuration (JSON)")->required();

  auto* diagnose = app.add_subcommand("diagnose", "Recompute diagnostics from a checkpoint file");
  diagnose->add_option("checkpoint", checkpoint_path, "checkpoint_<N>.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalidConfig;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir, seeds, jobs);
    if (*validate) return cmd_validate(config_path);
    if (*diagnose) return cmd_diagnose(checkpoint_path);
  } catch (const sadi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const sadi::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  }
  return kOk;
}
