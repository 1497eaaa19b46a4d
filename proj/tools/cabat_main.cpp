// Command-line front end: scenario presets, calibration, marginal estimand
// ascertainment, full simulation runs and report generation.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "cabat/runner.hpp"

namespace {

using namespace cabat;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int replicates = 0;
  int workers = 0;
};

ScenarioConfig load(const CommonOpts& opts) {
  ScenarioConfig cfg = parse_config(opts.config_path);
  if (opts.seed_set) cfg.seed = opts.seed;
  if (opts.replicates > 0) cfg.replicates = opts.replicates;
  return cfg;
}

int effective_workers(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void cmd_calibrate(const CommonOpts& opts) {
  ScenarioConfig cfg = load(opts);
  if (cfg.dgm.endpoint != Endpoint::binary) {
    std::cout << "scenario " << cfg.scenario_id
              << ": beta0_star = " << cfg.dgm.beta0_star
              << " (no calibration needed for this endpoint)\n";
    return;
  }
  Rng rng(derive_stream(cfg.seed, 0x02));
  const auto res = calibrate_intercept(cfg.dgm, rng, cfg.mc.calibration_datasets,
                                       cfg.mc.calibration_size);
  std::cout << "scenario_id=" << cfg.scenario_id
            << " beta0_star=" << res.beta0_star << " mc_se=" << res.mc_se
            << " datasets=" << res.datasets << '\n';
}

void cmd_ascertain(const CommonOpts& opts) {
  ScenarioConfig cfg = load(opts);
  Rng rng(derive_stream(cfg.seed, 0x03));
  for (const auto& eff : cfg.effects) {
    const auto res = ascertain_marginal_estimand(
        cfg.dgm, eff.phi_star, rng, cfg.mc.ascertain_datasets,
        cfg.mc.ascertain_size, cfg.design.tte_horizon);
    std::cout << "scenario_id=" << cfg.scenario_id
              << " phi_star=" << eff.phi_star << " gamma_M=" << res.gamma
              << " mc_se=" << res.mc_se << " skipped=" << res.datasets_skipped
              << '\n';
  }
}

void cmd_simulate(const CommonOpts& opts) {
  ScenarioConfig cfg = load(opts);
  const int workers = effective_workers(opts.workers);
  std::cerr << "simulating " << cfg.scenario_id << ": " << cfg.replicates
            << " replicates x " << cfg.effects.size() << " effects x "
            << cfg.models.size() << " models on " << workers << " workers\n";
  const ScenarioRun run = run_scenario(cfg, workers);
  const auto files = write_outputs(run, opts.out_dir, slurp(opts.config_path));
  for (const auto& f : files) std::cerr << "wrote " << f << '\n';
}

void cmd_reaggregate(const CommonOpts& opts, bool full_report) {
  ScenarioConfig cfg = load(opts);
  const std::string results_path = opts.out_dir + "/results.csv";
  std::ifstream in(results_path);
  if (!in) throw RuntimeFailure("no results at '" + results_path + "'");
  const ScenarioRun run = read_results_csv(cfg, in);
  const auto ocs = scenario_opchar(run);
  if (full_report) {
    std::ofstream p(opts.out_dir + "/report_power.csv", std::ios::binary);
    write_report_power_csv(cfg, ocs, p);
    std::ofstream l(opts.out_dir + "/report_rmse_bias.csv", std::ios::binary);
    write_report_long_csv(run, l);
    std::cerr << "wrote report_power.csv and report_rmse_bias.csv\n";
  } else {
    std::ofstream o(opts.out_dir + "/opchar.csv", std::ios::binary);
    write_opchar_csv(cfg, ocs, o);
    std::cerr << "wrote opchar.csv\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian adaptive trial simulator with covariate adjustment"};
  app.require_subcommand(1);

  CommonOpts opts;
  const auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", opts.config_path, "scenario config (json)")
        ->required();
    sub->add_option("--seed", opts.seed, "master seed override")
        ->each([&](const std::string&) { opts.seed_set = true; });
    sub->add_option("--replicates", opts.replicates, "replicate count override");
    sub->add_option("--workers", opts.workers, "worker threads (default: cores)");
    if (needs_out) {
      sub->add_option("--out", opts.out_dir, "output directory");
    }
  };

  auto* calibrate = app.add_subcommand("calibrate", "calibrate the DGM intercept");
  add_common(calibrate, false);
  auto* ascertain =
      app.add_subcommand("ascertain", "ascertain marginal estimand values");
  add_common(ascertain, false);
  auto* simulate = app.add_subcommand("simulate", "run a full scenario");
  add_common(simulate, true);
  auto* opchar =
      app.add_subcommand("opchar", "re-aggregate stored replicate results");
  add_common(opchar, true);
  auto* report = app.add_subcommand("report", "emit figure-ready report CSVs");
  add_common(report, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (calibrate->parsed()) {
      cmd_calibrate(opts);
    } else if (ascertain->parsed()) {
      cmd_ascertain(opts);
    } else if (simulate->parsed()) {
      cmd_simulate(opts);
    } else if (opchar->parsed()) {
      cmd_reaggregate(opts, false);
    } else if (report->parsed()) {
      cmd_reaggregate(opts, true);
    }
  } catch (const cabat::ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 3;
  }
  return 0;
}
