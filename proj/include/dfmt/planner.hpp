#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dfmt/neighbor_cache.hpp"
#include "dfmt/rng.hpp"
#include "dfmt/steering.hpp"
#include "dfmt/system.hpp"
#include "dfmt/world.hpp"

namespace dfmt {

inline double unit_ball_volume(int n) {
  return std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

// Connection-cost threshold
//   r_N = (1+eta)^{1/Dt} (C_mu^-1 Dt^-1 6^{n+D/2} 2^{n/2} mu_free)^{1/Dt} (log N / N)^{1/Dt}
// with Dt = (n+D)/2.
inline double radius_threshold(const ControllabilityInfo& info, double mu_free,
                               double C_mu, double eta, std::uint64_t N) {
  if (N < 2) throw std::invalid_argument("radius_threshold: N must be >= 2");
  const int n = static_cast<int>(info.exponents.size());
  const double Dt = info.Dtilde;
  const double inner = (1.0 / C_mu) * (1.0 / Dt) * std::pow(6.0, n + 0.5 * info.D) *
                       std::pow(2.0, 0.5 * n) * mu_free;
  const double nd = static_cast<double>(N);
  return std::pow(1.0 + eta, 1.0 / Dt) * std::pow(inner, 1.0 / Dt) *
         std::pow(std::log(nd) / nd, 1.0 / Dt);
}

// inf over a log-spaced tau grid in (0, tau_mu] of zeta_n sqrt(det G(tau)) / tau^{D/2}
// (finite and positive by the small-time determinant scaling of G).
inline double estimate_C_mu(const SteeringKernel& kernel, double tau_mu,
                            int grid_points = 32) {
  if (!(tau_mu > 0.0)) throw std::invalid_argument("estimate_C_mu: tau_mu must be positive");
  const auto info = controllability_info(kernel.system());
  const int n = kernel.system().n();
  const double zeta = unit_ball_volume(n);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_points; ++i) {
    const double tau = tau_mu * std::pow(1e-3, 1.0 - static_cast<double>(i) / (grid_points - 1));
    const auto& s = kernel.slice(tau);
    if (!s.chol_ok) continue;
    const double sqrt_det = s.L.diagonal().prod();
    const double ratio = zeta * sqrt_det / std::pow(tau, 0.5 * info.D);
    if (std::isfinite(ratio) && ratio > 0.0) best = std::min(best, ratio);
  }
  if (!std::isfinite(best)) throw GramianError("estimate_C_mu: no usable grid point");
  return best;
}

enum class Variant { OptimalTau, FixedTau };

inline std::string variant_label(Variant v, double fixed_tau, bool cache) {
  std::string s = v == Variant::OptimalTau ? "optimal" : "fixed:" + std::to_string(fixed_tau);
  if (cache) s += "+cache";
  return s;
}

struct PlannerConfig {
  int N = 1000;
  double eta = 0.5;
  std::optional<double> radius_override;
  double tau_max = -1.0;       // <= 0: take the scenario value
  double collision_dt = -1.0;  // <= 0: take the scenario value (upper cap, see below)
  Variant variant = Variant::OptimalTau;
  double fixed_tau = 1.0;
  bool cache_neighbors = false;
  std::string cache_path;
  double cost_cap = 1e6;
  int goal_samples = -1;  // < 0: max(1, N/100)
  double steer_tol = 1e-6;
  double tau_mu = 1.0;  // horizon for the C_mu estimate in the Theorem-2 radius
  bool gramian_pruning = true;
  bool collect_diagnostics = false;
};

struct PlanStats {
  std::uint64_t steer_calls = 0;      // exact pair-cost computations
  std::uint64_t collision_checks = 0; // geometric segment checks
  std::uint64_t edges_evaluated = 0;  // argmin candidates considered
  double wall_ms = 0.0;
  bool cache_hit = false;
  double radius = 0.0;
};

struct PlanGraph {
  std::vector<Eigen::VectorXd> vertices;  // index 0 = x_init
  struct Edge {
    int from;
    int to;
    double cost;
  };
  std::vector<Edge> edges;
  std::vector<int> parent;           // -1 = none
  std::vector<double> cost_to_come;  // +inf = unreached
};

struct Plan {
  bool success = false;
  std::vector<int> waypoints;
  Trajectory trajectory;
  double cost = 0.0;
  PlanStats stats;
  PlanGraph graph;
  std::vector<double> pop_costs;  // diagnostics (wavefront order), optional
};

// Deterministic vertex set: x_init, then N free samples, then the goal-region
// augmentation samples. Streams are derived from the seed so the set does not
// depend on planner variant or configuration order.
inline std::vector<Eigen::VectorXd> build_vertex_set(const ProblemInstance& p,
                                                     const PlannerConfig& cfg,
                                                     std::uint64_t seed) {
  const Rng root(seed);
  Rng free_rng = root.derive(1);
  Rng goal_rng = root.derive(2);
  std::vector<Eigen::VectorXd> V;
  V.reserve(cfg.N + 2);
  V.push_back(p.x_init);
  auto free_samples = sample_free(p, cfg.N, free_rng);
  V.insert(V.end(), free_samples.begin(), free_samples.end());
  const int g = cfg.goal_samples >= 0 ? cfg.goal_samples : std::max(1, cfg.N / 100);
  if (g > 0) {
    auto goal_samples = sample_goal(p, g, goal_rng);
    V.insert(V.end(), goal_samples.begin(), goal_samples.end());
  }
  return V;
}

// Memoized exact connection costs between vertices. A pair is Unreachable
// (+inf) when the threshold scan rejects it beyond the guard band or steering
// exceeds the cost cap; otherwise the stored value is the tol-accurate c*.
// Membership (c* < r) and edge weights always come from the same values, so
// planner decisions are self-consistent.
class PairCostTable {
 public:
  PairCostTable(const SteeringKernel& kernel, const std::vector<Eigen::VectorXd>& V,
                double radius, double tau_max, double tol, Variant variant,
                double fixed_tau)
      : kernel_(kernel), V_(V), radius_(radius), tau_max_(tau_max), tol_(tol),
        variant_(variant), fixed_tau_(fixed_tau) {}

  static constexpr double kUnreachable = std::numeric_limits<double>::infinity();

  // Switch to a fully precomputed adjacency (neighbor cache); absent pairs
  // are unreachable by construction.
  void set_complete(const NeighborCache* cache) { complete_ = cache; }
  bool complete() const { return complete_ != nullptr; }

  double cost(int i, int j) {
    if (complete_) {
      const auto& row = complete_->forward[i];
      auto it = std::lower_bound(row.begin(), row.end(), j,
                                 [](const auto& e, int v) { return e.first < v; });
      return it != row.end() && it->first == j ? it->second : kUnreachable;
    }
    const std::uint64_t key = pack(i, j);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    const double c = compute(i, j);
    memo_.emplace(key, c);
    return c;
  }

  bool member(int i, int j) { return cost(i, j) < radius_; }

  // Resolve a scan verdict into membership, keeping values consistent with cost().
  bool resolve(int i, int j, ScanVerdict v) {
    if (v == ScanVerdict::No) {
      memo_.try_emplace(pack(i, j), kUnreachable);
      return false;
    }
    return member(i, j);
  }

  bool known(int i, int j, double* out) const {
    if (complete_) {
      *out = const_cast<PairCostTable*>(this)->cost(i, j);
      return true;
    }
    auto it = memo_.find(pack(i, j));
    if (it == memo_.end()) return false;
    *out = it->second;
    return true;
  }

  SteeringResult steer(int i, int j) const {
    if (variant_ == Variant::FixedTau) return kernel_.fixed_time_steer(V_[i], V_[j], fixed_tau_);
    return kernel_.optimal_steer(V_[i], V_[j], tau_max_, tol_);
  }

  std::uint64_t exact_evals() const { return exact_evals_; }
  double radius() const { return radius_; }

 private:
  static std::uint64_t pack(int i, int j) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32) |
           static_cast<std::uint32_t>(j);
  }

  double compute(int i, int j) {
    ++exact_evals_;
    try {
      if (variant_ == Variant::FixedTau) {
        const double c = kernel_.cost_fixed_time(V_[i], V_[j], fixed_tau_);
        return c <= kernel_.options().cost_cap ? c : kUnreachable;
      }
      const ScanVerdict v = kernel_.threshold_scan(V_[i], V_[j], radius_, tau_max_);
      if (v == ScanVerdict::No) return kUnreachable;
      return kernel_.optimal_steer(V_[i], V_[j], tau_max_, tol_).cost;
    } catch (const SteerError&) {
      return kUnreachable;
    } catch (const GramianError&) {
      return kUnreachable;
    }
  }

  const SteeringKernel& kernel_;
  const std::vector<Eigen::VectorXd>& V_;
  double radius_;
  double tau_max_;
  double tol_;
  Variant variant_;
  double fixed_tau_;
  const NeighborCache* complete_ = nullptr;
  std::unordered_map<std::uint64_t, double> memo_;
  std::uint64_t exact_evals_ = 0;
};

// Full directed adjacency below the radius over a vertex set, using the same
// scan/refine decision path as the lazy planner, so cached and uncached runs
// produce identical near sets and edge weights.
inline NeighborCache build_neighbor_cache(const SteeringKernel& kernel,
                                          const std::vector<Eigen::VectorXd>& V,
                                          double radius, double tau_max, double tol,
                                          Variant variant, double fixed_tau) {
  NeighborCache cache;
  cache.system_hash = system_hash(kernel.system());
  cache.radius = radius;
  cache.variant = variant_label(variant, fixed_tau, false);
  PairCostTable table(kernel, V, radius, tau_max, tol, variant, fixed_tau);
  const int total = static_cast<int>(V.size());
  Eigen::MatrixXd Vmat(kernel.system().n(), total);
  for (int i = 0; i < total; ++i) Vmat.col(i) = V[i];
  std::vector<ScanVerdict> verdicts;
  cache.forward.resize(total);
  for (int i = 0; i < total; ++i) {
    kernel.scan_forward(V[i], Vmat, radius, tau_max, verdicts);
    for (int j = 0; j < total; ++j) {
      if (j == i) continue;
      if (table.resolve(i, j, verdicts[j])) cache.forward[i].push_back({j, table.cost(i, j)});
    }
  }
  return cache;
}

// Near^{+/-}[V, x, r]: indices of V whose optimal connection cost from/to x is
// below r. Exact up to the steering tolerance; identical with pruning on/off.
inline std::vector<int> near(const SteeringKernel& kernel,
                             const std::vector<Eigen::VectorXd>& V,
                             const Eigen::VectorXd& x, double r, Direction dir,
                             double tau_max = -1.0, double tol = 1e-9) {
  if (!(r > 0.0)) throw std::invalid_argument("near: r must be positive");
  if (V.empty()) return {};
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd others(n, V.size());
  for (std::size_t k = 0; k < V.size(); ++k) others.col(k) = V[k];
  std::vector<ScanVerdict> verdicts;
  if (dir == Direction::Forward) {
    kernel.scan_forward(x, others, r, tau_max, verdicts);
  } else {
    kernel.scan_backward(x, others, r, tau_max, verdicts);
  }
  std::vector<int> out;
  for (std::size_t k = 0; k < V.size(); ++k) {
    bool in = verdicts[k] == ScanVerdict::Yes;
    if (verdicts[k] == ScanVerdict::Borderline) {
      try {
        const auto& from = dir == Direction::Forward ? x : V[k];
        const auto& to = dir == Direction::Forward ? V[k] : x;
        in = kernel.optimal_steer(from, to, tau_max, tol).cost < r;
      } catch (const SteerError&) {
        in = false;
      } catch (const GramianError&) {
        in = false;
      }
    }
    if (in) out.push_back(static_cast<int>(k));
  }
  return out;
}

namespace detail {

// Collision sampling step: at most the configured cap and at most tau/32,
// quantized to cap / 2^j so slice times are shared across edges.
inline double collision_step(double tau_star, double cap) {
  if (tau_star <= 32.0 * cap) {
    const int j = std::max(0, static_cast<int>(std::ceil(std::log2(32.0 * cap / tau_star))));
    return cap / std::exp2(j);
  }
  return cap;
}

struct PlannerContext {
  const ProblemInstance& p;
  const SteeringKernel& kernel;
  PairCostTable& table;
  double dt_cap;
  PlanStats& stats;

  bool edge_collision_free(const SteeringResult& res) {
    ++stats.collision_checks;
    return collision_free(p, kernel, res, collision_step(res.tau_star, dt_cap));
  }
};

}  // namespace detail

inline double resolve_radius(const ProblemInstance& p, const SteeringKernel& kernel,
                             const PlannerConfig& cfg) {
  if (cfg.radius_override) return *cfg.radius_override;
  const auto info = controllability_info(p.sys);
  const double C_mu = estimate_C_mu(kernel, cfg.tau_mu);
  return radius_threshold(info, free_volume(p), C_mu, cfg.eta,
                          static_cast<std::uint64_t>(cfg.N));
}

inline SteerOptions steer_options_for(const ProblemInstance& p, const PlannerConfig& cfg) {
  SteerOptions opt;
  opt.tau_max = cfg.tau_max > 0.0 ? cfg.tau_max : p.tau_max;
  opt.cost_cap = cfg.cost_cap;
  opt.default_tol = cfg.steer_tol;
  opt.gramian_pruning = cfg.gramian_pruning;
  return opt;
}

namespace detail {

// Loads a matching neighbor cache or builds (and persists) one. Returns
// whether the cache came from disk.
inline bool attach_cache(const SteeringKernel& kernel, const std::vector<Eigen::VectorXd>& V,
                         const PlannerConfig& cfg, std::uint64_t seed, double radius,
                         double tau_max, std::optional<NeighborCache>& storage,
                         PairCostTable& table) {
  const std::string hash = system_hash(kernel.system());
  const std::string label = variant_label(cfg.variant, cfg.fixed_tau, false);
  bool from_disk = false;
  if (!cfg.cache_path.empty()) {
    auto loaded = NeighborCache::load(cfg.cache_path);
    if (loaded && loaded->matches(hash, cfg.N, seed, radius, label)) {
      storage = std::move(*loaded);
      from_disk = true;
    }
  }
  if (!storage) {
    storage = build_neighbor_cache(kernel, V, radius, tau_max, cfg.steer_tol,
                                   cfg.variant, cfg.fixed_tau);
    storage->N = cfg.N;
    storage->seed = seed;
    if (!cfg.cache_path.empty()) storage->save(cfg.cache_path);
  }
  table.set_complete(&*storage);
  return from_disk;
}

}  // namespace detail

namespace detail {

inline Plan extract_plan(const ProblemInstance& p, const PairCostTable& table,
                         PlanGraph graph, int terminal, PlanStats stats,
                         std::vector<double> pop_costs) {
  Plan plan;
  plan.stats = stats;
  plan.pop_costs = std::move(pop_costs);
  plan.graph = std::move(graph);
  if (terminal < 0) return plan;
  plan.success = true;
  for (int v = terminal; v != -1; v = plan.graph.parent[v]) plan.waypoints.push_back(v);
  std::reverse(plan.waypoints.begin(), plan.waypoints.end());
  std::vector<SteeringResult> segments;
  for (std::size_t k = 0; k + 1 < plan.waypoints.size(); ++k) {
    segments.push_back(table.steer(plan.waypoints[k], plan.waypoints[k + 1]));
  }
  plan.trajectory = make_trajectory(std::move(segments));
  plan.cost = plan.graph.cost_to_come[terminal];
  return plan;
}

}  // namespace detail

// Differential Fast Marching Tree over a sampled vertex set. Follows the
// algorithm listing exactly: unexplored set W, cost-ordered wavefront H
// (including the vertex being expanded until the end of its iteration),
// X_near = Near+(z) inside W, parent argmin over Near-(x) inside H, a single
// collision check per candidate edge, failure as a value when H drains.
//
// The argmin over Near-(x) /\ H is maintained incrementally: relaxed when a
// vertex enters H, recomputed lazily for vertices whose best parent left H.
// Both paths use the same memoized pair costs and (value, index) tie-break,
// so the result is identical to re-scanning H at every iteration.
inline Plan dfmt_star(const ProblemInstance& p, const PlannerConfig& cfg,
                      std::uint64_t seed) {
  const auto t_start = std::chrono::steady_clock::now();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  SteeringKernel kernel(p.sys, steer_options_for(p, cfg));
  const double tau_max = kernel.options().tau_max;
  const double r = resolve_radius(p, kernel, cfg);
  std::vector<Eigen::VectorXd> V = build_vertex_set(p, cfg, seed);
  const int total = static_cast<int>(V.size());
  PairCostTable table(kernel, V, r, tau_max, cfg.steer_tol, cfg.variant, cfg.fixed_tau);

  PlanStats stats;
  stats.radius = r;
  const double dt_cap = cfg.collision_dt > 0.0 ? cfg.collision_dt : p.collision_dt;
  detail::PlannerContext ctx{p, kernel, table, dt_cap, stats};

  std::optional<NeighborCache> cache;
  if (cfg.cache_neighbors) {
    stats.cache_hit = detail::attach_cache(kernel, V, cfg, seed, r, tau_max, cache, table);
  }

  Eigen::MatrixXd Vmat(p.sys.n(), total);
  for (int i = 0; i < total; ++i) Vmat.col(i) = V[i];

  std::vector<char> in_W(total, 1), in_H(total, 0), stale(total, 0);
  std::vector<double> cost_to_come(total, kInf), best_val(total, kInf);
  std::vector<int> parent(total, -1), best_parent(total, -1);
  in_W[0] = 0;
  cost_to_come[0] = 0.0;
  in_H[0] = 1;
  std::set<std::pair<double, int>> H;  // (cost_to_come, index)
  H.insert({0.0, 0});

  PlanGraph graph;
  graph.vertices = V;
  std::vector<double> pop_costs;

  // Candidate relaxation when y joins H: try to improve best(x) for every
  // unexplored x that y could possibly beat. cost(y) alone prunes exactly
  // (connection costs are positive). Pairs without a memoized cost go through
  // a batched threshold scan first so hopeless ones are settled cheaply.
  std::vector<int> scratch, unknown_pairs;
  std::vector<ScanVerdict> verdicts;
  auto try_improve = [&](int y, int x, double cy) {
    const double c = table.cost(y, x);
    ++stats.edges_evaluated;
    if (c >= table.radius()) return;
    const double v = cy + c;
    if (v < best_val[x] || (v == best_val[x] && y < best_parent[x])) {
      best_val[x] = v;
      best_parent[x] = y;
    }
  };
  auto relax_from = [&](int y) {
    const double cy = cost_to_come[y];
    if (table.complete()) {
      for (const auto& [x, c] : cache->forward[y]) {
        if (!in_W[x] || stale[x] || cy >= best_val[x]) continue;
        ++stats.edges_evaluated;
        const double v = cy + c;
        if (v < best_val[x] || (v == best_val[x] && y < best_parent[x])) {
          best_val[x] = v;
          best_parent[x] = y;
        }
      }
      return;
    }
    scratch.clear();
    unknown_pairs.clear();
    for (int x = 0; x < total; ++x) {
      if (!in_W[x] || stale[x] || cy >= best_val[x]) continue;
      double c;
      if (table.known(y, x, &c)) {
        if (c < table.radius()) try_improve(y, x, cy);
      } else {
        unknown_pairs.push_back(x);
      }
    }
    if (unknown_pairs.empty()) return;
    Eigen::MatrixXd targets(p.sys.n(), unknown_pairs.size());
    for (std::size_t k = 0; k < unknown_pairs.size(); ++k)
      targets.col(k) = Vmat.col(unknown_pairs[k]);
    kernel.scan_forward(V[y], targets, r, tau_max, verdicts);
    for (std::size_t k = 0; k < unknown_pairs.size(); ++k) {
      if (table.resolve(y, unknown_pairs[k], verdicts[k])) try_improve(y, unknown_pairs[k], cy);
    }
  };

  // Full recomputation of best(x) over the current wavefront (early exit once
  // remaining cost_to_come values cannot beat the best found).
  auto repair = [&](int x) {
    double best = kInf;
    int arg = -1;
    for (const auto& [cy, y] : H) {
      if (cy >= best) break;
      const double c = table.cost(y, x);
      ++stats.edges_evaluated;
      if (c >= table.radius()) continue;
      const double v = cy + c;
      if (v < best || (v == best && y < arg)) {
        best = v;
        arg = y;
      }
    }
    best_val[x] = best;
    best_parent[x] = arg;
    stale[x] = 0;
  };

  std::unordered_set<std::uint64_t> failed_edges;
  auto edge_key = [](int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  };

  relax_from(0);
  int z = 0;
  int terminal = -1;
  std::vector<int> x_near;
  std::vector<int> unknown;

  while (true) {
    if (in_goal(p, V[z])) {
      terminal = z;
      break;
    }
    if (cfg.collect_diagnostics) pop_costs.push_back(cost_to_come[z]);

    // X_near = Near+(V \ {z}, z, r) /\ W
    x_near.clear();
    if (table.complete()) {
      for (const auto& [x, c] : cache->forward[z]) {
        if (in_W[x]) x_near.push_back(x);
      }
    } else {
      unknown.clear();
      for (int x = 0; x < total; ++x) {
        if (!in_W[x]) continue;
        double c;
        if (table.known(z, x, &c)) {
          if (c < r) x_near.push_back(x);
        } else {
          unknown.push_back(x);
        }
      }
      if (!unknown.empty()) {
        Eigen::MatrixXd targets(p.sys.n(), unknown.size());
        for (std::size_t k = 0; k < unknown.size(); ++k) targets.col(k) = Vmat.col(unknown[k]);
        kernel.scan_forward(V[z], targets, r, tau_max, verdicts);
        for (std::size_t k = 0; k < unknown.size(); ++k) {
          if (table.resolve(z, unknown[k], verdicts[k])) x_near.push_back(unknown[k]);
        }
        std::sort(x_near.begin(), x_near.end());
      }
    }

    std::vector<int> h_new;
    for (int x : x_near) {
      if (stale[x]) repair(x);
      const int y = best_parent[x];
      if (y < 0) continue;  // no wavefront member reaches x inside the radius
      if (failed_edges.count(edge_key(y, x))) continue;
      const SteeringResult res = table.steer(y, x);
      if (ctx.edge_collision_free(res)) {
        parent[x] = y;
        cost_to_come[x] = best_val[x];
        graph.edges.push_back({y, x, table.cost(y, x)});
        in_W[x] = 0;
        h_new.push_back(x);
      } else {
        failed_edges.insert(edge_key(y, x));
      }
    }

    // H <- (H u H_new) \ {z}
    H.erase({cost_to_come[z], z});
    in_H[z] = 0;
    for (int x = 0; x < total; ++x) {
      if (in_W[x] && best_parent[x] == z) stale[x] = 1;
    }
    for (int x : h_new) {
      in_H[x] = 1;
      H.insert({cost_to_come[x], x});
    }
    for (int x : h_new) relax_from(x);

    if (H.empty()) break;  // algorithm failure, reported as a value
    z = H.begin()->second;
  }

  graph.parent = parent;
  graph.cost_to_come = cost_to_come;
  stats.steer_calls = table.exact_evals();
  Plan plan = detail::extract_plan(p, table, std::move(graph), terminal, stats,
                                   std::move(pop_costs));
  plan.stats.wall_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t_start)
                           .count();
  return plan;
}

// DPRM*: the full directed graph of collision-free connections cheaper than
// r_N over the same vertex set, searched with Dijkstra from x_init; the best
// goal vertex wins.
inline Plan dprm_star(const ProblemInstance& p, const PlannerConfig& cfg,
                      std::uint64_t seed) {
  const auto t_start = std::chrono::steady_clock::now();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  SteeringKernel kernel(p.sys, steer_options_for(p, cfg));
  const double tau_max = kernel.options().tau_max;
  const double r = resolve_radius(p, kernel, cfg);
  std::vector<Eigen::VectorXd> V = build_vertex_set(p, cfg, seed);
  const int total = static_cast<int>(V.size());
  PairCostTable table(kernel, V, r, tau_max, cfg.steer_tol, cfg.variant, cfg.fixed_tau);

  PlanStats stats;
  stats.radius = r;
  const double dt_cap = cfg.collision_dt > 0.0 ? cfg.collision_dt : p.collision_dt;
  detail::PlannerContext ctx{p, kernel, table, dt_cap, stats};

  std::optional<NeighborCache> cache;
  if (cfg.cache_neighbors) {
    stats.cache_hit = detail::attach_cache(kernel, V, cfg, seed, r, tau_max, cache, table);
  }

  Eigen::MatrixXd Vmat(p.sys.n(), total);
  for (int i = 0; i < total; ++i) Vmat.col(i) = V[i];

  PlanGraph graph;
  graph.vertices = V;
  std::vector<std::vector<std::pair<int, double>>> adj(total);
  std::vector<ScanVerdict> verdicts;
  for (int i = 0; i < total; ++i) {
    std::vector<std::pair<int, double>> row;
    if (table.complete()) {
      row = cache->forward[i];
    } else {
      kernel.scan_forward(V[i], Vmat, r, tau_max, verdicts);
      for (int j = 0; j < total; ++j) {
        if (j == i) continue;
        if (table.resolve(i, j, verdicts[j])) row.push_back({j, table.cost(i, j)});
      }
    }
    for (const auto& [j, c] : row) {
      if (j == i) continue;
      const SteeringResult res = table.steer(i, j);
      if (ctx.edge_collision_free(res)) {
        adj[i].push_back({j, c});
        graph.edges.push_back({i, j, c});
      }
    }
  }

  std::vector<double> dist(total, kInf);
  std::vector<int> parent(total, -1);
  dist[0] = 0.0;
  std::set<std::pair<double, int>> queue;
  queue.insert({0.0, 0});
  while (!queue.empty()) {
    const auto [d, u] = *queue.begin();
    queue.erase(queue.begin());
    for (const auto& [v, w] : adj[u]) {
      const double nd = d + w;
      if (nd < dist[v]) {
        queue.erase({dist[v], v});
        dist[v] = nd;
        parent[v] = u;
        queue.insert({nd, v});
      }
    }
  }

  int terminal = -1;
  for (int j = 0; j < total; ++j) {
    if (!in_goal(p, V[j]) || !std::isfinite(dist[j])) continue;
    if (terminal < 0 || dist[j] < dist[terminal]) terminal = j;
  }

  graph.parent = parent;
  graph.cost_to_come = dist;
  stats.steer_calls = table.exact_evals();
  Plan plan = detail::extract_plan(p, table, std::move(graph), terminal, stats, {});
  plan.stats.wall_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t_start)
                           .count();
  return plan;
}

// Re-checks a returned plan end to end: chained endpoints, collision-free at
// half the planning resolution, terminal state inside the goal, cost equal to
// the segment sum.
inline bool validate_plan(const ProblemInstance& p, const Plan& plan,
                          double dt_cap = -1.0, std::string* why = nullptr) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (!plan.success) return fail("plan unsuccessful");
  SteeringKernel kernel(p.sys, {});
  if (plan.trajectory.segments.empty()) {
    return in_goal(p, p.x_init) ? true : fail("empty trajectory outside goal");
  }
  const double cap = dt_cap > 0.0 ? dt_cap : 0.5 * p.collision_dt;
  double total = 0.0;
  for (std::size_t k = 0; k < plan.trajectory.segments.size(); ++k) {
    const auto& seg = plan.trajectory.segments[k];
    if (k > 0) {
      const auto& prev = plan.trajectory.segments[k - 1];
      if ((prev.x1 - seg.x0).lpNorm<Eigen::Infinity>() != 0.0) return fail("segments not chained");
    }
    if (!collision_free(p, kernel, seg, detail::collision_step(seg.tau_star, cap)))
      return fail("segment in collision at validation resolution");
    total += seg.cost;
  }
  if ((plan.trajectory.segments.front().x0 - p.x_init).lpNorm<Eigen::Infinity>() != 0.0)
    return fail("trajectory does not start at x_init");
  if (!in_goal(p, plan.trajectory.segments.back().x1)) return fail("terminal state not in goal");
  if (std::abs(total - plan.cost) > 1e-9 * std::max(1.0, plan.cost))
    return fail("cost does not match segment sum");
  return true;
}

}  // namespace dfmt
