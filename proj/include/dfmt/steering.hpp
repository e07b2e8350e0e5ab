#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dfmt/gramian.hpp"
#include "dfmt/matrix_exp.hpp"
#include "dfmt/system.hpp"

namespace dfmt {

enum class SteerKind { OptimalTime, FixedTime };
enum class Direction { Forward, Backward };

struct SteerError : std::runtime_error {
  enum class Code { NoConnection, OutOfDomain };
  Code code;
  SteerError(Code c, const std::string& what) : std::runtime_error(what), code(c) {}
};

// Optimal (or fixed-time) connection between two states. d is the closed-form
// coefficient G(tau)^-1 (x1 - xbar(tau)); control and state curves are
// reconstructed from it on demand.
struct SteeringResult {
  Eigen::VectorXd x0;
  Eigen::VectorXd x1;
  double tau_star = 0.0;
  double cost = 0.0;
  Eigen::VectorXd d;
  SteerKind kind = SteerKind::OptimalTime;
};

struct Trajectory {
  std::vector<SteeringResult> segments;
  double duration = 0.0;
  double cost = 0.0;
};

inline Trajectory make_trajectory(std::vector<SteeringResult> segments) {
  Trajectory traj;
  traj.segments = std::move(segments);
  for (const auto& s : traj.segments) {
    traj.duration += s.tau_star;
    traj.cost += s.cost;
  }
  return traj;
}

struct SteerOptions {
  double tau_min = 1e-4;
  double tau_max = 10.0;
  int grid_points = 64;       // coarse log-spaced grid for the tau search
  double cost_cap = 1e6;      // above this a pair counts as unconnectable
  double default_tol = 1e-6;  // relative cost accuracy of optimal_steer
  bool gramian_pruning = true;
  // Guard band for threshold scans: a pair whose grid minimum exceeds
  // r * (1 + borderline_margin) is rejected without refinement.
  double borderline_margin = 0.25;
  double exp_norm_cap = 50.0;
};

// Tri-state answer of a threshold scan.
enum class ScanVerdict : std::uint8_t { No = 0, Yes = 1, Borderline = 2 };

// Steering solver for a fixed system. Precomputes Gramian/transition tables
// on a log-spaced tau grid and memoizes every time slice it ever touches, so
// repeated queries (planner inner loops, collision sampling on a shared dt
// grid) stay cheap. Not internally synchronized: share a kernel across
// threads only after warm-up, or give each worker its own.
class SteeringKernel {
 public:
  struct TimeSlice {
    double t = 0.0;
    Eigen::MatrixXd G;
    Eigen::MatrixXd L;  // valid iff chol_ok
    bool chol_ok = false;
    Eigen::MatrixXd exp_at;
    Eigen::MatrixXd exp_neg_at;
    Eigen::VectorXd drift;  // int_0^t exp(As) c ds
    double lambda_max = 0.0;
  };

  explicit SteeringKernel(LinearAffineSystem sys, SteerOptions opt = {})
      : sys_(std::move(sys)), opt_(opt) {
    const auto rep = validate(sys_);
    if (!rep.ok()) throw std::invalid_argument("SteeringKernel: invalid system: " + rep.detail);
    m_inv_bt_ = sys_.R.llt().solve(sys_.B.transpose());
    bbt_weighted_ = sys_.B * m_inv_bt_;
    grid_taus_ = log_grid(opt_.tau_min, opt_.tau_max, opt_.grid_points);
    for (double t : grid_taus_) slice(t);  // warm the memo
  }

  const LinearAffineSystem& system() const { return sys_; }
  const SteerOptions& options() const { return opt_; }
  const std::vector<double>& grid_taus() const { return grid_taus_; }

  const TimeSlice& slice(double t) const {
    if (!(t > 0.0)) throw std::invalid_argument("SteeringKernel::slice: t must be positive");
    const std::uint64_t key = std::bit_cast<std::uint64_t>(t);
    auto it = memo_.find(key);
    if (it != memo_.end()) return *it->second;
    auto s = std::make_unique<TimeSlice>(make_slice(t));
    const TimeSlice& ref = *s;
    memo_.emplace(key, std::move(s));
    return ref;
  }

  // Eq. (6): c(tau) = tau + ||x1 - xbar(tau)||^2_{G(tau)^-1}. +inf when the
  // slice is numerically rank-deficient or the value is not finite.
  double cost_fixed_time(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1,
                         double tau) const {
    if (!(tau > 0.0)) throw std::invalid_argument("cost_fixed_time: tau must be positive");
    return cost_at(slice(tau), x0, x1);
  }

  SteeringResult fixed_time_steer(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1,
                                  double tau) const {
    if (!(tau > 0.0)) throw std::invalid_argument("fixed_time_steer: tau must be positive");
    return result_at(slice(tau), x0, x1, SteerKind::FixedTime);
  }

  // Minimizes Eq. (6) over (0, tau_max]: coarse log grid, bracket the best
  // point, golden-section down to relative cost accuracy tol.
  SteeringResult optimal_steer(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1,
                               double tau_max = -1.0, double tol = -1.0) const {
    if (tau_max <= 0.0) tau_max = opt_.tau_max;
    if (tol <= 0.0) tol = opt_.default_tol;

    if ((x1 - x0).lpNorm<Eigen::Infinity>() == 0.0) {
      const double eq_scale = 1.0 + x0.lpNorm<Eigen::Infinity>();
      if ((sys_.A * x0 + sys_.c).lpNorm<Eigen::Infinity>() <= 1e-12 * eq_scale) {
        SteeringResult res;
        res.x0 = x0;
        res.x1 = x1;
        res.d = Eigen::VectorXd::Zero(sys_.n());
        return res;  // equilibrium self-steer: zero cost, zero duration
      }
    }

    const std::vector<double>& taus = taus_for(tau_max);
    double best_c = std::numeric_limits<double>::infinity();
    int best_i = -1;
    for (int i = 0; i < static_cast<int>(taus.size()); ++i) {
      const double c = cost_at(slice(taus[i]), x0, x1);
      ++cost_evals_;
      if (c < best_c) {
        best_c = c;
        best_i = i;
      }
    }
    if (!(best_c <= opt_.cost_cap)) {
      throw SteerError(SteerError::Code::NoConnection,
                       "optimal_steer: no connection below cost cap");
    }
    double lo = taus[static_cast<std::size_t>(std::max(best_i - 1, 0))];
    double hi = taus[std::min<std::size_t>(best_i + 1, taus.size() - 1)];
    double best_tau = taus[best_i];
    golden_refine(x0, x1, lo, hi, tol, best_tau, best_c);
    return result_at(slice(best_tau), x0, x1, SteerKind::OptimalTime);
  }

  // Eq. (5): u(t) = R^-1 B^T exp(A^T (tau*-t)) d.
  Eigen::VectorXd control_at(const SteeringResult& r, double t) const {
    check_domain(r, t, "control_at");
    if (r.tau_star == 0.0) return Eigen::VectorXd::Zero(sys_.m());
    const double remain = r.tau_star - t;
    if (remain == 0.0) return m_inv_bt_ * r.d;
    return m_inv_bt_ * (slice(remain).exp_at.transpose() * r.d);
  }

  // Eq. (7): x(t) = xbar(t) + G(t) exp(A^T (tau*-t)) d, with
  // exp(A^T(tau*-t)) = exp(-At)^T exp(A tau*)^T so all slices sit on shared
  // time points (collision grids reuse them across edges).
  Eigen::VectorXd state_at(const SteeringResult& r, double t) const {
    check_domain(r, t, "state_at");
    if (t == 0.0 || r.tau_star == 0.0) return r.x0;
    const TimeSlice& st = slice(t);
    const Eigen::VectorXd w = slice(r.tau_star).exp_at.transpose() * r.d;
    return st.exp_at * r.x0 + st.drift + st.G * (st.exp_neg_at.transpose() * w);
  }

  // Membership in the forward/backward reachable set at cost threshold r.
  // Failures along the way count as unreachable.
  bool reachable(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double r,
                 Direction dir, double tau_max = -1.0) const {
    if (!(r > 0.0)) return false;
    const Eigen::VectorXd& from = dir == Direction::Forward ? x : y;
    const Eigen::VectorXd& to = dir == Direction::Forward ? y : x;
    try {
      double gmin = 0.0;
      const ScanVerdict v = threshold_scan(from, to, r, tau_max, &gmin);
      if (v == ScanVerdict::Yes) return true;
      if (v == ScanVerdict::No) return false;
      return optimal_steer(from, to, tau_max, 1e-9).cost < r;
    } catch (const SteerError&) {
      return false;
    } catch (const GramianError&) {
      return false;
    }
  }

  // Single-pair threshold scan over the tau grid (largest tau first; a pair
  // passing at any grid point is certainly reachable since the grid value
  // upper-bounds c*). grid_min_out reports the best grid cost seen.
  ScanVerdict threshold_scan(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1,
                             double r, double tau_max = -1.0,
                             double* grid_min_out = nullptr) const {
    if (tau_max <= 0.0) tau_max = opt_.tau_max;
    const std::vector<double>& taus = taus_for(tau_max);
    const double reject_above = r * (1.0 + opt_.borderline_margin);
    double gmin = std::numeric_limits<double>::infinity();
    ScanVerdict verdict = ScanVerdict::No;
    for (int i = static_cast<int>(taus.size()) - 1; i >= 0; --i) {
      const double tau = taus[i];
      if (tau >= reject_above) continue;  // c(tau) >= tau
      const TimeSlice& s = slice(tau);
      if (!s.chol_ok) continue;
      const Eigen::VectorXd diff = x1 - (s.exp_at * x0 + s.drift);
      if (opt_.gramian_pruning &&
          diff.squaredNorm() > (reject_above - tau) * s.lambda_max) {
        continue;
      }
      const double c = tau + s.L.triangularView<Eigen::Lower>().solve(diff).squaredNorm();
      ++cost_evals_;
      if (std::isfinite(c)) gmin = std::min(gmin, c);
      if (gmin < r) {
        verdict = ScanVerdict::Yes;
        break;
      }
    }
    if (verdict != ScanVerdict::Yes && gmin <= reject_above) verdict = ScanVerdict::Borderline;
    if (grid_min_out) *grid_min_out = gmin;
    return verdict;
  }

  // Batched forward scan: verdicts for x -> targets.col(k), all k. Same
  // decision rule as threshold_scan, vectorized over candidates with the
  // per-tau zero-input response hoisted out of the inner loop.
  void scan_forward(const Eigen::VectorXd& x, const Eigen::MatrixXd& targets, double r,
                    double tau_max, std::vector<ScanVerdict>& verdicts,
                    std::vector<double>* grid_min = nullptr) const {
    scan_batch(x, targets, r, tau_max, /*forward=*/true, verdicts, grid_min);
  }

  // Batched backward scan: verdicts for sources.col(k) -> x.
  void scan_backward(const Eigen::VectorXd& x, const Eigen::MatrixXd& sources, double r,
                     double tau_max, std::vector<ScanVerdict>& verdicts,
                     std::vector<double>* grid_min = nullptr) const {
    scan_batch(x, sources, r, tau_max, /*forward=*/false, verdicts, grid_min);
  }

  std::uint64_t cost_evals() const { return cost_evals_; }

 private:
  static std::vector<double> log_grid(double lo, double hi, int points) {
    std::vector<double> g;
    if (hi <= lo || points < 2) {
      g.push_back(hi > 0 ? hi : lo);
      return g;
    }
    g.reserve(points);
    const double ratio = std::log(hi / lo) / (points - 1);
    for (int i = 0; i < points; ++i) g.push_back(lo * std::exp(ratio * i));
    g.back() = hi;
    return g;
  }

  TimeSlice make_slice(double t) const {
    TimeSlice s;
    s.t = t;
    const int n = sys_.n();
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    Z.topLeftCorner(n, n) = -sys_.A;
    Z.topRightCorner(n, n) = bbt_weighted_;
    Z.bottomRightCorner(n, n) = sys_.A.transpose();
    const Eigen::MatrixXd F = matrix_exponential(Z, t, opt_.exp_norm_cap);
    s.exp_at = F.bottomRightCorner(n, n).transpose();
    s.G = s.exp_at * F.topRightCorner(n, n);
    s.G = (0.5 * (s.G + s.G.transpose())).eval();
    s.exp_neg_at = matrix_exponential(-sys_.A, t, opt_.exp_norm_cap);
    s.drift = drift_integral(sys_, t, opt_.exp_norm_cap);
    Eigen::LLT<Eigen::MatrixXd> llt(s.G);
    s.chol_ok = llt.info() == Eigen::Success;
    if (s.chol_ok) s.L = llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.G, Eigen::EigenvaluesOnly);
    s.lambda_max = es.eigenvalues().maxCoeff();
    return s;
  }

  double cost_at(const TimeSlice& s, const Eigen::VectorXd& x0,
                 const Eigen::VectorXd& x1) const {
    if (!s.chol_ok) throw GramianError("cost: Gramian not positive definite at t = " +
                                       std::to_string(s.t));
    const Eigen::VectorXd diff = x1 - (s.exp_at * x0 + s.drift);
    const double q = s.L.triangularView<Eigen::Lower>().solve(diff).squaredNorm();
    const double c = s.t + q;
    return std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
  }

  SteeringResult result_at(const TimeSlice& s, const Eigen::VectorXd& x0,
                           const Eigen::VectorXd& x1, SteerKind kind) const {
    if (!s.chol_ok) throw GramianError("steer: Gramian not positive definite at t = " +
                                       std::to_string(s.t));
    SteeringResult res;
    res.x0 = x0;
    res.x1 = x1;
    res.tau_star = s.t;
    res.kind = kind;
    const Eigen::VectorXd diff = x1 - (s.exp_at * x0 + s.drift);
    const Eigen::VectorXd y = s.L.triangularView<Eigen::Lower>().solve(diff);
    res.d = s.L.transpose().triangularView<Eigen::Upper>().solve(y);
    res.cost = s.t + y.squaredNorm();
    if (!(res.cost <= opt_.cost_cap)) {
      throw SteerError(SteerError::Code::NoConnection, "steer: cost above cap");
    }
    return res;
  }

  void golden_refine(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1, double lo,
                     double hi, double tol, double& best_tau, double& best_c) const {
    constexpr double kInvPhi = 0.6180339887498949;
    const double stop_rel = 0.25 * std::sqrt(std::max(tol, 1e-16));
    auto eval = [&](double tau) {
      const double c = cost_at(slice(tau), x0, x1);
      ++cost_evals_;
      if (c < best_c || (c == best_c && tau < best_tau)) {
        best_c = c;
        best_tau = tau;
      }
      return c;
    };
    double a = lo, b = hi;
    double x1g = b - kInvPhi * (b - a);
    double x2g = a + kInvPhi * (b - a);
    double f1 = eval(x1g);
    double f2 = eval(x2g);
    int guard = 0;
    while (b - a > stop_rel * (0.5 * (a + b)) && b - a > 1e-14 && ++guard < 200) {
      if (f1 <= f2) {
        b = x2g;
        x2g = x1g;
        f2 = f1;
        x1g = b - kInvPhi * (b - a);
        f1 = eval(x1g);
      } else {
        a = x1g;
        x1g = x2g;
        f1 = f2;
        x2g = a + kInvPhi * (b - a);
        f2 = eval(x2g);
      }
    }
  }

  void check_domain(const SteeringResult& r, double t, const char* who) const {
    if (t < -1e-12 || t > r.tau_star + 1e-12) {
      throw SteerError(SteerError::Code::OutOfDomain,
                       std::string(who) + ": t outside [0, tau*]");
    }
  }

  const std::vector<double>& taus_for(double tau_max) const {
    if (tau_max == opt_.tau_max) return grid_taus_;
    auto it = alt_grids_.find(tau_max);
    if (it != alt_grids_.end()) return it->second;
    std::vector<double> taus;
    for (double t : grid_taus_)
      if (t <= tau_max) taus.push_back(t);
    if (taus.empty() || taus.back() < tau_max) taus.push_back(tau_max);
    return alt_grids_.emplace(tau_max, std::move(taus)).first->second;
  }

  void scan_batch(const Eigen::VectorXd& x, const Eigen::MatrixXd& others, double r,
                  double tau_max, bool forward, std::vector<ScanVerdict>& verdicts,
                  std::vector<double>* grid_min) const {
    if (tau_max <= 0.0) tau_max = opt_.tau_max;
    const std::vector<double>& taus = taus_for(tau_max);
    const int K = static_cast<int>(others.cols());
    const int n = sys_.n();
    verdicts.assign(K, ScanVerdict::No);
    std::vector<double> gmin(K, std::numeric_limits<double>::infinity());
    std::vector<int> active(K);
    for (int k = 0; k < K; ++k) active[k] = k;
    const double reject_above = r * (1.0 + opt_.borderline_margin);

    Eigen::VectorXd base(n), diff(n), sol(n);
    Eigen::MatrixXd mapped;
    for (int i = static_cast<int>(taus.size()) - 1; i >= 0 && !active.empty(); --i) {
      const double tau = taus[i];
      if (tau >= reject_above) continue;
      const TimeSlice& s = slice(tau);
      if (!s.chol_ok) continue;
      const double prune_budget = (reject_above - tau) * s.lambda_max;
      if (forward) {
        base = s.exp_at * x + s.drift;  // xbar of the source
      } else {
        base = x - s.drift;
        mapped.noalias() = s.exp_at * others(Eigen::all, active);
      }
      std::size_t w = 0;
      for (std::size_t a = 0; a < active.size(); ++a) {
        const int k = active[a];
        if (forward) {
          diff = others.col(k) - base;
        } else {
          diff = base - mapped.col(a);
        }
        if (opt_.gramian_pruning && diff.squaredNorm() > prune_budget) {
          active[w++] = k;
          continue;
        }
        sol = s.L.triangularView<Eigen::Lower>().solve(diff);
        ++cost_evals_;
        const double c = tau + sol.squaredNorm();
        if (std::isfinite(c) && c < gmin[k]) gmin[k] = c;
        if (gmin[k] < r) {
          verdicts[k] = ScanVerdict::Yes;  // settled, drop from active set
        } else {
          active[w++] = k;
        }
      }
      active.resize(w);
    }
    for (int k : active) {
      if (gmin[k] <= reject_above) verdicts[k] = ScanVerdict::Borderline;
    }
    if (grid_min) *grid_min = std::move(gmin);
  }

  LinearAffineSystem sys_;
  SteerOptions opt_;
  Eigen::MatrixXd m_inv_bt_;      // R^-1 B^T
  Eigen::MatrixXd bbt_weighted_;  // B R^-1 B^T
  std::vector<double> grid_taus_;
  mutable std::unordered_map<std::uint64_t, std::unique_ptr<TimeSlice>> memo_;
  mutable std::map<double, std::vector<double>> alt_grids_;
  mutable std::uint64_t cost_evals_ = 0;
};

}  // namespace dfmt
