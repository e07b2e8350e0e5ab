#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dfmt/neighbor_cache.hpp"
#include "dfmt/planner.hpp"
#include "dfmt/scenario.hpp"
#include "dfmt/svg.hpp"

namespace dfmt {

struct VariantSpec {
  Variant kind = Variant::OptimalTau;
  double fixed_tau = 1.0;
  bool cache = false;

  std::string label() const { return variant_label(kind, fixed_tau, cache); }
};

// "optimal" or "fixed:NUMBER", with an optional "+cache" suffix.
inline VariantSpec parse_variant(std::string text) {
  VariantSpec v;
  if (auto pos = text.find("+cache"); pos != std::string::npos) {
    v.cache = true;
    text.erase(pos, 6);
  }
  if (text == "optimal") {
    v.kind = Variant::OptimalTau;
  } else if (text.rfind("fixed:", 0) == 0) {
    v.kind = Variant::FixedTau;
    v.fixed_tau = std::stod(text.substr(6));
    if (!(v.fixed_tau > 0.0)) throw std::invalid_argument("variant: fixed tau must be positive");
  } else {
    throw std::invalid_argument("variant: expected 'optimal' or 'fixed:TAU', got '" + text + "'");
  }
  return v;
}

struct RunRecord {
  std::string variant;
  int N = 0;
  std::uint64_t seed = 0;
  bool success = false;
  double cost = 0.0;  // meaningful iff success
  double wall_ms = 0.0;
  std::uint64_t steer_calls = 0;
  std::uint64_t collision_checks = 0;
  bool cache_hit = false;
};

inline std::string csv_header() {
  return "variant,N,seed,success,cost,wall_ms,steer_calls,collision_checks,cache_hit";
}

// 17 significant digits so doubles survive a parse round trip.
inline std::string to_csv(const RunRecord& r) {
  std::ostringstream out;
  out << r.variant << ',' << r.N << ',' << r.seed << ',' << (r.success ? 1 : 0) << ',';
  if (r.success) out << format_double(r.cost);
  out << ',' << format_double(r.wall_ms) << ',' << r.steer_calls << ','
      << r.collision_checks << ',' << (r.cache_hit ? 1 : 0);
  return out.str();
}

inline nlohmann::json plan_to_json(const Plan& plan, const std::string& variant, int N,
                                   std::uint64_t seed) {
  nlohmann::json j;
  j["success"] = plan.success;
  j["variant"] = variant;
  j["N"] = N;
  j["seed"] = seed;
  j["radius"] = plan.stats.radius;
  j["waypoints"] = plan.waypoints;
  if (plan.success) {
    j["cost"] = plan.cost;
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : plan.trajectory.segments) {
      nlohmann::json seg;
      seg["tau"] = s.tau_star;
      seg["cost"] = s.cost;
      seg["x0"] = std::vector<double>(s.x0.data(), s.x0.data() + s.x0.size());
      seg["x1"] = std::vector<double>(s.x1.data(), s.x1.data() + s.x1.size());
      seg["d"] = std::vector<double>(s.d.data(), s.d.data() + s.d.size());
      segs.push_back(std::move(seg));
    }
    j["segments"] = std::move(segs);
    j["duration"] = plan.trajectory.duration;
  }
  j["stats"] = {{"steer_calls", plan.stats.steer_calls},
                {"collision_checks", plan.stats.collision_checks},
                {"edges_evaluated", plan.stats.edges_evaluated}};
  return j;
}

struct ExperimentSpec {
  std::string scenario_path;
  std::vector<int> Ns;
  std::vector<std::uint64_t> seeds;
  std::vector<VariantSpec> variants;
  double eta = 0.5;
  std::optional<double> radius_override;
  std::string out_dir = ".";
  int threads = 0;  // 0: hardware concurrency
  bool zero_walltime = false;
  int goal_samples = -1;
  double steer_tol = 1e-6;
  std::string cache_dir;  // where per-cell neighbor caches live
  std::string planner = "dfmt";
};

inline ExperimentSpec load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("experiment: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError("experiment: parse failure in '" + path + "': " + e.what());
  }
  ExperimentSpec spec;
  try {
    spec.scenario_path = j.at("scenario").get<std::string>();
    for (const auto& n : j.at("N")) spec.Ns.push_back(n.get<int>());
    for (const auto& s : j.at("seeds")) spec.seeds.push_back(s.get<std::uint64_t>());
    for (const auto& v : j.at("variants")) {
      if (v.is_string()) {
        spec.variants.push_back(parse_variant(v.get<std::string>()));
      } else {
        VariantSpec vs;
        const std::string kind = v.at("kind").get<std::string>();
        if (kind == "fixed") {
          vs.kind = Variant::FixedTau;
          vs.fixed_tau = v.at("tau").get<double>();
        } else if (kind != "optimal") {
          throw ScenarioError("experiment: unknown variant kind '" + kind + "'");
        }
        if (v.contains("cache")) vs.cache = v.at("cache").get<bool>();
        spec.variants.push_back(vs);
      }
    }
    if (j.contains("eta")) spec.eta = j.at("eta").get<double>();
    if (j.contains("radius_override") && !j.at("radius_override").is_null())
      spec.radius_override = j.at("radius_override").get<double>();
    if (j.contains("out_dir")) spec.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("threads")) spec.threads = j.at("threads").get<int>();
    if (j.contains("zero_walltime")) spec.zero_walltime = j.at("zero_walltime").get<bool>();
    if (j.contains("goal_samples")) spec.goal_samples = j.at("goal_samples").get<int>();
    if (j.contains("steer_tol")) spec.steer_tol = j.at("steer_tol").get<double>();
    if (j.contains("cache_dir")) spec.cache_dir = j.at("cache_dir").get<std::string>();
    if (j.contains("planner")) spec.planner = j.at("planner").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("experiment: ") + e.what());
  }
  if (spec.Ns.empty() || spec.seeds.empty() || spec.variants.empty())
    throw ScenarioError("experiment: N, seeds and variants must be nonempty");
  if (spec.planner != "dfmt" && spec.planner != "dprm")
    throw ScenarioError("experiment: planner must be 'dfmt' or 'dprm'");
  return spec;
}

inline PlannerConfig config_for(const ExperimentSpec& spec, const VariantSpec& variant,
                                int N, std::uint64_t seed,
                                const LinearAffineSystem& sys) {
  PlannerConfig cfg;
  cfg.N = N;
  cfg.eta = spec.eta;
  cfg.radius_override = spec.radius_override;
  cfg.variant = variant.kind;
  cfg.fixed_tau = variant.fixed_tau;
  cfg.goal_samples = spec.goal_samples;
  cfg.steer_tol = spec.steer_tol;
  if (variant.cache) {
    cfg.cache_neighbors = true;
    if (!spec.cache_dir.empty()) {
      std::filesystem::create_directories(spec.cache_dir);
      std::ostringstream name;
      name << system_hash(sys) << "_N" << N << "_s" << seed << "_"
           << variant_label(variant.kind, variant.fixed_tau, false) << ".json";
      cfg.cache_path = (std::filesystem::path(spec.cache_dir) / name.str()).string();
    }
  }
  return cfg;
}

inline RunRecord make_record(const Plan& plan, const std::string& variant, int N,
                             std::uint64_t seed, bool zero_walltime) {
  RunRecord rec;
  rec.variant = variant;
  rec.N = N;
  rec.seed = seed;
  rec.success = plan.success;
  rec.cost = plan.cost;
  rec.wall_ms = zero_walltime ? 0.0 : plan.stats.wall_ms;
  rec.steer_calls = plan.stats.steer_calls;
  rec.collision_checks = plan.stats.collision_checks;
  rec.cache_hit = plan.stats.cache_hit;
  return rec;
}

struct SweepResult {
  std::vector<RunRecord> records;  // deterministic cell order
  std::string detail_csv;
  std::string aggregate_csv;
};

// Runs every (variant, N, seed) cell, in parallel, and assembles the CSVs in
// deterministic cell order once all cells are done. Cell failures (planner
// returning failure) are recorded, not fatal.
inline SweepResult run_sweep(const ExperimentSpec& spec) {
  const ProblemInstance problem = load_scenario(spec.scenario_path);

  struct Cell {
    VariantSpec variant;
    int N;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const auto& variant : spec.variants)
    for (int N : spec.Ns)
      for (std::uint64_t seed : spec.seeds) cells.push_back({variant, N, seed});

  std::vector<RunRecord> records(cells.size());
  std::atomic<std::size_t> next{0};
  const unsigned n_threads = spec.threads > 0
                                 ? static_cast<unsigned>(spec.threads)
                                 : std::max(1u, std::thread::hardware_concurrency());
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      const PlannerConfig cfg =
          config_for(spec, cell.variant, cell.N, cell.seed, problem.sys);
      const Plan plan = spec.planner == "dprm" ? dprm_star(problem, cfg, cell.seed)
                                               : dfmt_star(problem, cfg, cell.seed);
      records[i] =
          make_record(plan, cell.variant.label(), cell.N, cell.seed, spec.zero_walltime);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  SweepResult result;
  result.records = std::move(records);
  std::ostringstream detail;
  detail << csv_header() << '\n';
  for (const auto& rec : result.records) detail << to_csv(rec) << '\n';
  result.detail_csv = detail.str();

  // aggregate rows per (variant, N), in cell order
  std::ostringstream agg;
  agg << "variant,N,runs,successes,success_rate,mean_cost,stderr_cost\n";
  for (const auto& variant : spec.variants) {
    for (int N : spec.Ns) {
      int runs = 0, succ = 0;
      double sum = 0.0, sumsq = 0.0;
      for (const auto& rec : result.records) {
        if (rec.variant != variant.label() || rec.N != N) continue;
        ++runs;
        if (rec.success) {
          ++succ;
          sum += rec.cost;
          sumsq += rec.cost * rec.cost;
        }
      }
      agg << variant.label() << ',' << N << ',' << runs << ',' << succ << ','
          << format_double(runs ? static_cast<double>(succ) / runs : 0.0) << ',';
      if (succ > 0) {
        const double mean = sum / succ;
        agg << format_double(mean) << ',';
        if (succ > 1) {
          const double var = (sumsq - succ * mean * mean) / (succ - 1);
          agg << format_double(std::sqrt(std::max(var, 0.0) / succ));
        }
      } else {
        agg << ',';
      }
      agg << '\n';
    }
  }
  result.aggregate_csv = agg.str();

  if (!spec.out_dir.empty()) {
    std::filesystem::create_directories(spec.out_dir);
    std::ofstream(std::filesystem::path(spec.out_dir) / "runs.csv") << result.detail_csv;
    std::ofstream(std::filesystem::path(spec.out_dir) / "aggregate.csv")
        << result.aggregate_csv;
  }
  return result;
}

}  // namespace dfmt
