#pragma once

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dfmt/experiment.hpp"
#include "dfmt/verify.hpp"

namespace dfmt {

struct SingleRun {
  Plan plan;
  RunRecord record;
};

// Executes one planner run and writes the plan JSON (and optional SVG) into
// out_dir. Deterministic for a fixed (scenario, config, seed).
inline SingleRun run_single(const ProblemInstance& problem, const PlannerConfig& cfg,
                            std::uint64_t seed, const std::string& variant,
                            const std::string& out_dir, const std::string& svg_path,
                            const std::string& planner = "dfmt",
                            bool zero_walltime = false) {
  SingleRun run;
  run.plan = planner == "dprm" ? dprm_star(problem, cfg, seed) : dfmt_star(problem, cfg, seed);
  run.record = make_record(run.plan, variant, cfg.N, seed, zero_walltime);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ostringstream name;
    name << "plan_" << variant << "_N" << cfg.N << "_s" << seed << ".json";
    std::ofstream out(std::filesystem::path(out_dir) / name.str());
    out << plan_to_json(run.plan, variant, cfg.N, seed).dump(2) << '\n';
  }
  if (!svg_path.empty()) {
    std::ofstream svg(svg_path);
    svg << emit_svg(run.plan, problem, {-1, -1}, cfg.variant, cfg.fixed_tau);
  }
  return run;
}

// Exit codes: 0 planner success, 1 planner failure (still records the run),
// 2 configuration/scenario errors.
inline int cli_run(std::vector<std::string> args) {
  CLI::App app{"optimal steering and sampling-based planning for linear affine systems"};
  app.require_subcommand(1);

  // ---- plan
  auto* plan_cmd = app.add_subcommand("plan", "run a single planner instance");
  std::string scenario_path, variant_text = "optimal", cache_path, svg_path;
  std::string out_dir = ".", planner = "dfmt";
  int N = 1000;
  std::uint64_t seed = 0;
  double eta = 0.5, steer_tol = 1e-6;
  std::optional<double> radius_override;
  std::optional<double> dt_override, tau_max_override;
  int goal_samples = -1;
  bool zero_walltime = false;
  plan_cmd->add_option("scenario", scenario_path, "scenario JSON file")->required();
  plan_cmd->add_option("--n", N, "sample count");
  plan_cmd->add_option("--seed", seed, "rng seed");
  plan_cmd->add_option("--variant", variant_text, "optimal | fixed:TAU");
  plan_cmd->add_option("--eta", eta, "radius inflation parameter");
  plan_cmd->add_option("--radius", [&radius_override](const std::vector<std::string>& v) {
    radius_override = std::stod(v[0]);
    return true;
  }, "override the connection radius");
  plan_cmd->add_option("--cache", cache_path, "neighbor cache file (enables caching)");
  plan_cmd->add_option("--svg", svg_path, "write an SVG rendering here");
  plan_cmd->add_option("--out", out_dir, "output directory for the plan JSON");
  plan_cmd->add_option("--planner", planner, "dfmt | dprm")
      ->check(CLI::IsMember({"dfmt", "dprm"}));
  plan_cmd->add_option("--goal-samples", goal_samples, "goal-region augmentation count");
  plan_cmd->add_option("--steer-tol", steer_tol, "steering relative tolerance");
  plan_cmd->add_option("--dt", [&dt_override](const std::vector<std::string>& v) {
    dt_override = std::stod(v[0]);
    return true;
  }, "collision resolution cap");
  plan_cmd->add_option("--tau-max", [&tau_max_override](const std::vector<std::string>& v) {
    tau_max_override = std::stod(v[0]);
    return true;
  }, "steering horizon override");
  plan_cmd->add_flag("--zero-walltime", zero_walltime,
                     "record wall_ms as 0 (reproducible records)");

  // ---- sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "run a Monte-Carlo experiment grid");
  std::string experiment_path;
  sweep_cmd->add_option("experiment", experiment_path, "experiment JSON file")->required();

  // ---- verify
  auto* verify_cmd = app.add_subcommand("verify", "run a property suite");
  std::string suite;
  verify_cmd->add_option("suite", suite, "spectral | steering | exhaustivity")
      ->required()
      ->check(CLI::IsMember({"spectral", "steering", "exhaustivity"}));

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (const char* env_out = std::getenv("DFMT_OUT_DIR")) {
    out_dir = env_out;
  }

  try {
    if (plan_cmd->parsed()) {
      const ProblemInstance problem = load_scenario(scenario_path);
      const VariantSpec vs = parse_variant(variant_text);
      PlannerConfig cfg;
      cfg.N = N;
      cfg.eta = eta;
      cfg.radius_override = radius_override;
      cfg.variant = vs.kind;
      cfg.fixed_tau = vs.fixed_tau;
      cfg.goal_samples = goal_samples;
      cfg.steer_tol = steer_tol;
      if (dt_override) cfg.collision_dt = *dt_override;
      if (tau_max_override) cfg.tau_max = *tau_max_override;
      if (!cache_path.empty()) {
        cfg.cache_neighbors = true;
        cfg.cache_path = cache_path;
      }
      const auto run =
          run_single(problem, cfg, seed, vs.label(), out_dir, svg_path, planner, zero_walltime);
      std::cout << csv_header() << '\n' << to_csv(run.record) << '\n';
      return run.plan.success ? 0 : 1;
    }
    if (sweep_cmd->parsed()) {
      ExperimentSpec spec = load_experiment(experiment_path);
      if (const char* env_out = std::getenv("DFMT_OUT_DIR")) spec.out_dir = env_out;
      const auto result = run_sweep(spec);
      int failures = 0;
      for (const auto& rec : result.records)
        if (!rec.success) ++failures;
      std::cout << "sweep: " << result.records.size() << " runs, " << failures
                << " failures, results in " << spec.out_dir << '\n';
      return 0;
    }
    // verify
    SuiteReport rep;
    if (suite == "spectral") rep = spectral_suite();
    else if (suite == "steering") rep = steering_suite();
    else rep = exhaustivity_suite();
    std::cout << suite << " suite:\n" << rep.text;
    std::cout << (rep.pass ? "PASS" : "FAIL") << '\n';
    return rep.pass ? 0 : 1;
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace dfmt
