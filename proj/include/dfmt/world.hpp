#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfmt/rng.hpp"
#include "dfmt/steering.hpp"
#include "dfmt/system.hpp"

namespace dfmt {

struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Eigen::VectorXd& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
  bool strictly_contains(const Eigen::VectorXd& x) const {
    return (x.array() > lo.array()).all() && (x.array() < hi.array()).all();
  }
  double volume() const { return (hi - lo).prod(); }
};

// Axis-aligned box over the position coordinates only; in state space it is
// a cylinder (velocities unconstrained by obstacles).
struct Obstacle {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct RejectionStall : std::runtime_error {
  explicit RejectionStall(const std::string& what) : std::runtime_error(what) {}
};

struct ProblemInstance {
  LinearAffineSystem sys;
  Box bounds;                     // full state-space limits
  std::vector<int> position_dims; // coordinates the obstacles live in
  std::vector<Obstacle> obstacles;
  Eigen::VectorXd x_init;
  Box goal;                       // open goal region
  double tau_max = 10.0;          // scenario-level steering horizon
  double collision_dt = 5e-3;     // default collision resolution

  Eigen::VectorXd position_of(const Eigen::VectorXd& x) const {
    Eigen::VectorXd p(position_dims.size());
    for (std::size_t i = 0; i < position_dims.size(); ++i) p[i] = x[position_dims[i]];
    return p;
  }
};

// Free space is closed: bounds faces and obstacle boundaries are free,
// strict obstacle interiors are not.
inline bool state_free(const ProblemInstance& p, const Eigen::VectorXd& x) {
  if (!p.bounds.contains(x)) return false;
  for (const auto& obs : p.obstacles) {
    bool inside = true;
    for (std::size_t i = 0; i < p.position_dims.size(); ++i) {
      const double v = x[p.position_dims[i]];
      if (!(v > obs.lo[i] && v < obs.hi[i])) {
        inside = false;
        break;
      }
    }
    if (inside) return false;
  }
  return true;
}

inline bool in_goal(const ProblemInstance& p, const Eigen::VectorXd& x) {
  return p.goal.strictly_contains(x);
}

// N i.i.d. uniform samples from the free space by rejection on the bounds
// box. Deterministic given the generator state.
inline std::vector<Eigen::VectorXd> sample_free(const ProblemInstance& p, int N, Rng& rng) {
  if (N < 1) throw std::invalid_argument("sample_free: N must be >= 1");
  std::vector<Eigen::VectorXd> out;
  out.reserve(N);
  const int n = p.bounds.dim();
  Eigen::VectorXd x(n);
  std::uint64_t draws = 0, accepts = 0;
  while (static_cast<int>(out.size()) < N) {
    for (int i = 0; i < n; ++i) x[i] = rng.uniform(p.bounds.lo[i], p.bounds.hi[i]);
    ++draws;
    if (state_free(p, x)) {
      ++accepts;
      out.push_back(x);
    }
    if (draws >= 1000000 && static_cast<double>(accepts) < 1e-4 * static_cast<double>(draws)) {
      throw RejectionStall("sample_free: acceptance rate below 1e-4 over 1e6 draws");
    }
  }
  return out;
}

// Uniform samples from goal-intersect-free (used for goal-augmented vertex sets).
inline std::vector<Eigen::VectorXd> sample_goal(const ProblemInstance& p, int N, Rng& rng) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(N);
  const int n = p.goal.dim();
  Eigen::VectorXd x(n);
  std::uint64_t draws = 0;
  while (static_cast<int>(out.size()) < N) {
    for (int i = 0; i < n; ++i) x[i] = rng.uniform(p.goal.lo[i], p.goal.hi[i]);
    ++draws;
    if (in_goal(p, x) && state_free(p, x)) out.push_back(x);
    if (draws > 1000000 && out.empty()) {
      throw RejectionStall("sample_goal: goal region appears to have no free interior");
    }
  }
  return out;
}

// Samples the steering segment on the grid {0, dt, 2dt, ..., tau*} (final
// point always included) and checks every sample against the free space. The
// closing sample at tau* is the declared endpoint x1: the trajectory formula
// telescopes to it exactly, and evaluating it numerically can push a state
// sitting on a closed bounds face epsilon outside.
inline bool collision_free(const ProblemInstance& p, const SteeringKernel& kernel,
                           const SteeringResult& r, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("collision_free: dt must be positive");
  if (r.tau_star == 0.0) return state_free(p, r.x0);
  const auto steps = static_cast<std::int64_t>(std::floor(r.tau_star / dt));
  for (std::int64_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (t >= r.tau_star) break;
    if (!state_free(p, kernel.state_at(r, t))) return false;
  }
  return state_free(p, r.x1);
}

namespace detail {
// Intersection volume of a set of position boxes, clipped to the position
// projection of the bounds.
inline double clipped_intersection(const ProblemInstance& p,
                                   const std::vector<const Obstacle*>& members) {
  double vol = 1.0;
  for (std::size_t i = 0; i < p.position_dims.size(); ++i) {
    double lo = p.bounds.lo[p.position_dims[i]];
    double hi = p.bounds.hi[p.position_dims[i]];
    for (const Obstacle* o : members) {
      lo = std::max(lo, o->lo[i]);
      hi = std::min(hi, o->hi[i]);
    }
    if (hi <= lo) return 0.0;
    vol *= hi - lo;
  }
  return vol;
}
}  // namespace detail

// Lebesgue volume of the free space: bounds volume minus the obstacle
// cylinders, inclusion-exclusion over overlaps (exact for boxes).
inline double free_volume(const ProblemInstance& p) {
  const int n = p.bounds.dim();
  double nonpos_vol = 1.0;
  std::vector<bool> is_pos(n, false);
  for (int d : p.position_dims) is_pos[d] = true;
  for (int i = 0; i < n; ++i) {
    if (!is_pos[i]) nonpos_vol *= p.bounds.hi[i] - p.bounds.lo[i];
  }
  double pos_vol = 1.0;
  for (int d : p.position_dims) pos_vol *= p.bounds.hi[d] - p.bounds.lo[d];

  const std::size_t k = p.obstacles.size();
  if (k > 24) throw std::invalid_argument("free_volume: too many obstacles for inclusion-exclusion");
  double occupied = 0.0;
  for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
    std::vector<const Obstacle*> members;
    for (std::size_t j = 0; j < k; ++j)
      if (mask & (1u << j)) members.push_back(&p.obstacles[j]);
    const double v = detail::clipped_intersection(p, members);
    occupied += (members.size() % 2 == 1 ? v : -v);
  }
  return (pos_vol - occupied) * nonpos_vol;
}

}  // namespace dfmt
