#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dfmt/planner.hpp"
#include "dfmt/rng.hpp"
#include "dfmt/steering.hpp"
#include "dfmt/system.hpp"
#include "dfmt/world.hpp"

namespace dfmt {

struct SuiteReport {
  bool pass = true;
  std::string text;
};

namespace detail {

inline double lsq_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int intervals) {
  if (intervals % 2 != 0) ++intervals;
  const double h = (b - a) / intervals;
  double acc = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h);
  return acc * (h / 3.0);
}

}  // namespace detail

// Small-time spectral scaling of the Gramian for the planar double
// integrator: eigenvalue slopes 2e_i+1 = {1,1,3,3}, determinant slope D = 8,
// minimum-eigenvalue slope 2 nu - 1 = 3, measured by log-log regression over
// 8 points in [1e-3, 1e-2].
inline SuiteReport spectral_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto sys = double_integrator(2);
  std::vector<double> log_t, log_det, log_min;
  std::vector<std::vector<double>> log_lam(4);
  for (int i = 0; i < 8; ++i) {
    const double t = 1e-3 * std::pow(10.0, i / 7.0);
    const auto g = gramian(sys, t);
    const auto lam = spectrum(g);
    log_t.push_back(std::log(t));
    for (int k = 0; k < 4; ++k) log_lam[k].push_back(std::log(lam[k]));
    log_det.push_back(std::log(g.G.determinant()));
    log_min.push_back(std::log(lam[3]));
  }
  SuiteReport rep;
  std::ostringstream out;
  const double want[4] = {1, 1, 3, 3};
  for (int k = 0; k < 4; ++k) {
    const double s = detail::lsq_slope(log_t, log_lam[k]);
    const bool ok = std::abs(s - want[k]) < 0.05;
    rep.pass &= ok;
    out << "  eigenvalue " << k + 1 << " slope " << s << " (want " << want[k]
        << " +- 0.05) " << (ok ? "ok" : "FAIL") << '\n';
  }
  const double sd = detail::lsq_slope(log_t, log_det);
  const double sm = detail::lsq_slope(log_t, log_min);
  const bool det_ok = std::abs(sd - 8.0) < 0.1;
  const bool min_ok = std::abs(sm - 3.0) < 0.05;
  rep.pass &= det_ok && min_ok;
  out << "  det slope " << sd << " (want 8 +- 0.1) " << (det_ok ? "ok" : "FAIL") << '\n';
  out << "  min-eigenvalue slope " << sm << " (want 3 +- 0.05) "
      << (min_ok ? "ok" : "FAIL") << '\n';
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  out << "  runtime " << ms << " ms\n";
  rep.text = out.str();
  return rep;
}

// Closed-form 1D double-integrator rest-to-rest battery: the optimal arrival
// time and cost, endpoint reproduction, quadrature recomputation of the cost,
// and the dynamics residual of the explicit state curve.
inline SuiteReport steering_suite() {
  SuiteReport rep;
  std::ostringstream out;
  SteeringKernel kernel(double_integrator(1), {});
  const Eigen::Vector2d x0(0, 0), x1(1, 0);
  const auto res = kernel.optimal_steer(x0, x1, 10.0, 1e-12);
  const double sqrt6 = std::sqrt(6.0);

  auto check = [&](const char* name, double got, double want, double tol) {
    const bool ok = std::abs(got - want) <= tol;
    rep.pass &= ok;
    out << "  " << name << " = " << got << " (want " << want << " +- " << tol << ") "
        << (ok ? "ok" : "FAIL") << '\n';
  };
  check("tau*", res.tau_star, sqrt6, 1e-5);
  check("cost", res.cost, 4.0 / 3.0 * sqrt6, 1e-5);
  check("|x(0) - x0|", (kernel.state_at(res, 0.0) - x0).norm(), 0.0, 1e-8);
  check("|x(tau*) - x1|", (kernel.state_at(res, res.tau_star) - x1).norm(), 0.0, 1e-8);

  const auto integrand = [&](double t) {
    const Eigen::VectorXd u = kernel.control_at(res, t);
    return 1.0 + u.dot(kernel.system().R * u);
  };
  const double quad = detail::simpson(integrand, 0.0, res.tau_star, 4096);
  const bool quad_ok = std::abs(quad - res.cost) <= 1e-6 * res.cost;
  rep.pass &= quad_ok;
  out << "  quadrature cost rel err = " << std::abs(quad - res.cost) / res.cost
      << " (want <= 1e-6) " << (quad_ok ? "ok" : "FAIL") << '\n';

  const auto& sys = kernel.system();
  double worst = 0.0;
  const double h = 1e-6;
  for (int i = 1; i < 100; ++i) {
    const double t = res.tau_star * i / 100.0;
    const Eigen::VectorXd xdot =
        (kernel.state_at(res, t + h) - kernel.state_at(res, t - h)) / (2 * h);
    const Eigen::VectorXd want_dx =
        sys.A * kernel.state_at(res, t) + sys.B * kernel.control_at(res, t) + sys.c;
    worst = std::max(worst, (xdot - want_dx).norm() / (1.0 + want_dx.norm()));
  }
  const bool dyn_ok = worst <= 1e-5;
  rep.pass &= dyn_ok;
  out << "  dynamics residual = " << worst << " (want <= 1e-5) "
      << (dyn_ok ? "ok" : "FAIL") << '\n';
  rep.text = out.str();
  return rep;
}

// ---------------------------------------------------------------------------
// Trajectory-tracing probe. Searches a sample set for waypoints that
// (epsilon, r_N, p_N)-trace a fixed reference trajectory: stations are spaced
// along the reference at cost intervals r_N/2, candidate waypoints are the
// samples inside a weighted ball around each station, and a dynamic program
// picks the cheapest chain with per-edge cost below r_N. The found chain is
// then checked against all three trace conditions.

struct TraceProbeConfig {
  double eta = 0.5;        // radius inflation used in r_N
  double epsilon = 0.5;    // admissible relative cost increase
  double C_p = 0.3;        // deviation bound p_N = C_p r_N
  double ball_scale = 1.2; // candidate ball radius relative to the tiling ball
  int beam = 12;           // candidates kept per station
  int trials = 200;
};

struct TraceProbeResult {
  double r_N = 0.0;
  double p_N = 0.0;
  double ref_cost = 0.0;
  int stations = 0;
  int successes = 0;
  int trials = 0;
  double rate() const { return trials ? static_cast<double>(successes) / trials : 0.0; }
};

inline TraceProbeResult trace_probe(const ProblemInstance& world,
                                    const SteeringKernel& kernel,
                                    const Trajectory& reference, int N,
                                    std::uint64_t seed, const TraceProbeConfig& pc) {
  TraceProbeResult out;
  const auto info = controllability_info(world.sys);
  const double C_mu = estimate_C_mu(kernel, 1.0);
  const double r =
      radius_threshold(info, free_volume(world), C_mu, pc.eta, static_cast<std::uint64_t>(N));
  out.r_N = r;
  out.p_N = pc.C_p * r;
  out.ref_cost = reference.cost;
  out.trials = pc.trials;

  // dense reference samples (shared across trials)
  std::vector<Eigen::VectorXd> ref_pts;
  for (const auto& seg : reference.segments) {
    for (int s = 0; s < 64; ++s) {
      ref_pts.push_back(kernel.state_at(seg, seg.tau_star * s / 64.0));
    }
  }
  ref_pts.push_back(reference.segments.back().x1);

  // stations at cost spacing r/2 along the reference
  std::vector<Eigen::VectorXd> stations;
  stations.push_back(ref_pts.front());
  std::size_t cursor = 0;
  while (cursor + 1 < ref_pts.size()) {
    std::size_t next = cursor + 1;
    bool found = false;
    for (; next < ref_pts.size(); ++next) {
      const double c = kernel.optimal_steer(stations.back(), ref_pts[next], -1, 1e-6).cost;
      if (c >= r / 2.0) {
        found = true;
        break;
      }
    }
    if (!found) break;
    stations.push_back(ref_pts[next]);
    cursor = next;
  }
  if ((stations.back() - ref_pts.back()).norm() > 0.0) stations.push_back(ref_pts.back());
  out.stations = static_cast<int>(stations.size());

  const double tau_ball = r / 6.0;
  const auto& ball_slice = kernel.slice(tau_ball);
  const double rho = pc.ball_scale * (1.0 / 6.0) * std::sqrt(r / 2.0);

  const int n = world.sys.n();
  Rng root(seed);
  for (int trial = 0; trial < pc.trials; ++trial) {
    Rng rng = root.derive(trial + 1);
    const auto samples = sample_free(world, N, rng);
    Eigen::MatrixXd S(n, samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) S.col(i) = samples[i];

    // candidate lists per station (station 0 is the reference start itself,
    // which belongs to the vertex set by construction)
    std::vector<std::vector<int>> cands(stations.size());
    bool gap = false;
    for (std::size_t k = 1; k < stations.size() && !gap; ++k) {
      Eigen::MatrixXd diff = S.colwise() - stations[k];
      const Eigen::MatrixXd sol =
          ball_slice.L.triangularView<Eigen::Lower>().solve(diff);
      std::vector<std::pair<double, int>> dist;
      for (int i = 0; i < sol.cols(); ++i) {
        const double d = sol.col(i).norm();
        if (d <= rho) dist.push_back({d, i});
      }
      std::sort(dist.begin(), dist.end());
      if (dist.empty()) {
        gap = true;
        break;
      }
      for (std::size_t b = 0; b < dist.size() && b < static_cast<std::size_t>(pc.beam); ++b) {
        cands[k].push_back(dist[b].second);
      }
    }
    if (gap) continue;

    // DP over stations, per-edge cost <= r enforced
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> dp(stations.size());
    std::vector<std::vector<int>> back(stations.size());
    dp[0] = {0.0};
    back[0] = {-1};
    std::vector<Eigen::VectorXd> prev_states = {stations[0]};
    bool dead = false;
    std::vector<std::vector<Eigen::VectorXd>> cand_states(stations.size());
    cand_states[0] = {stations[0]};
    for (std::size_t k = 1; k < stations.size(); ++k) {
      dp[k].assign(cands[k].size(), inf);
      back[k].assign(cands[k].size(), -1);
      for (int i : cands[k]) cand_states[k].push_back(samples[i]);
      for (std::size_t j = 0; j < cand_states[k].size(); ++j) {
        for (std::size_t i = 0; i < cand_states[k - 1].size(); ++i) {
          if (dp[k - 1][i] == inf) continue;
          double c;
          try {
            c = kernel.optimal_steer(cand_states[k - 1][i], cand_states[k][j], -1, 1e-6).cost;
          } catch (const SteerError&) {
            continue;
          }
          if (c > r) continue;
          if (dp[k - 1][i] + c < dp[k][j]) {
            dp[k][j] = dp[k - 1][i] + c;
            back[k][j] = static_cast<int>(i);
          }
        }
      }
      if (*std::min_element(dp[k].begin(), dp[k].end()) == inf) {
        dead = true;
        break;
      }
    }
    if (dead) continue;

    // best chain into the last station
    const auto& last = dp.back();
    const std::size_t jbest =
        std::min_element(last.begin(), last.end()) - last.begin();
    if (last[jbest] > (1.0 + pc.epsilon) * reference.cost) continue;

    std::vector<Eigen::VectorXd> chain(stations.size());
    int j = static_cast<int>(jbest);
    for (int k = static_cast<int>(stations.size()) - 1; k >= 0; --k) {
      chain[k] = cand_states[k][j];
      j = back[k][j];
    }

    // deviation condition: every point of the chained trajectory stays within
    // p_N of the reference
    double worst_dev = 0.0;
    bool dev_ok = true;
    for (std::size_t k = 0; k + 1 < chain.size() && dev_ok; ++k) {
      const auto seg = kernel.optimal_steer(chain[k], chain[k + 1], -1, 1e-6);
      for (int s = 0; s <= 32 && dev_ok; ++s) {
        const Eigen::VectorXd x = kernel.state_at(seg, seg.tau_star * s / 32.0);
        double best = inf;
        for (const auto& rp : ref_pts) best = std::min(best, (x - rp).norm());
        worst_dev = std::max(worst_dev, best);
        if (best > out.p_N) dev_ok = false;
      }
    }
    if (!dev_ok) continue;
    ++out.successes;
  }
  return out;
}

// Free-world exhaustivity battery: the probability of tracing a fixed
// reference trajectory must grow with the sample count and clear 0.9 at the
// largest size.
inline SuiteReport exhaustivity_suite(std::uint64_t seed = 2027,
                                      const std::vector<int>& Ns = {1000, 4000, 16000},
                                      TraceProbeConfig pc = {}) {
  ProblemInstance world;
  world.sys = double_integrator(2);
  world.bounds.lo = Eigen::Vector4d(0, 0, -0.5, -0.5);
  world.bounds.hi = Eigen::Vector4d(1, 1, 0.5, 0.5);
  world.position_dims = {0, 1};
  world.x_init = Eigen::Vector4d(0.15, 0.15, 0, 0);
  world.goal.lo = Eigen::Vector4d(0.7, 0.7, -0.5, -0.5);
  world.goal.hi = Eigen::Vector4d(0.9, 0.9, 0.5, 0.5);
  world.tau_max = 10.0;
  SteeringKernel kernel(world.sys, {SteerOptions{.tau_max = world.tau_max}});

  // fixed strongly-clear reference: a gentle S-curve through the interior
  const std::vector<Eigen::Vector4d> knots = {
      {0.15, 0.15, 0.0, 0.0},  {0.5, 0.25, 0.15, 0.05}, {0.8, 0.5, 0.05, 0.15},
      {0.5, 0.75, -0.15, 0.05}, {0.2, 0.8, 0.0, 0.0}};
  std::vector<SteeringResult> segs;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    segs.push_back(kernel.optimal_steer(knots[i], knots[i + 1], -1, 1e-9));
  }
  const Trajectory reference = make_trajectory(std::move(segs));

  SuiteReport rep;
  std::ostringstream out;
  out << "  reference cost " << reference.cost << " over " << reference.segments.size()
      << " segments\n";
  std::vector<double> rates;
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    const auto res = trace_probe(world, kernel, reference, Ns[i], seed + 31 * i, pc);
    rates.push_back(res.rate());
    out << "  N = " << Ns[i] << ": success " << res.successes << "/" << res.trials
        << " (rate " << res.rate() << ", r_N " << res.r_N << ", stations "
        << res.stations << ")\n";
  }
  for (std::size_t i = 0; i + 1 < rates.size(); ++i) {
    if (rates[i + 1] < rates[i]) {
      rep.pass = false;
      out << "  FAIL: rate not nondecreasing between N = " << Ns[i] << " and " << Ns[i + 1]
          << '\n';
    }
  }
  if (rates.back() <= 0.9) {
    rep.pass = false;
    out << "  FAIL: final rate " << rates.back() << " <= 0.9\n";
  }
  rep.text = out.str();
  return rep;
}

}  // namespace dfmt
