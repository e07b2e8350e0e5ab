#include <catch2/catch_amalgamated.hpp>

#include "dfmt/rng.hpp"
#include "dfmt/steering.hpp"
#include "dfmt/system.hpp"
#include "oracles.hpp"
#include "pair_gen.hpp"

using namespace dfmt;

namespace {

const double kSqrt6 = std::sqrt(6.0);

SteeringKernel& di1_kernel() {
  static SteeringKernel k(double_integrator(1), {});
  return k;
}

SteeringKernel& di2_kernel() {
  static SteeringKernel k(double_integrator(2), {});
  return k;
}

// Random pair on the 2D double integrator with prescribed fixed-time cost:
// pick tau, put x1 on the reachable ellipsoid shell so c(tau) = target.
std::pair<Eigen::VectorXd, Eigen::VectorXd> pair_with_cost(Rng& rng, double target,
                                                           double tau_frac) {
  const auto& kernel = di2_kernel();
  Eigen::VectorXd x0(4);
  x0 << rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(-0.3, 0.3),
      rng.uniform(-0.3, 0.3);
  const double tau = tau_frac * target;
  const auto& s = kernel.slice(tau);
  Eigen::VectorXd w(4);
  for (int i = 0; i < 4; ++i) w[i] = rng.normal();
  w *= std::sqrt(target - tau) / w.norm();
  const Eigen::VectorXd x1 = s.exp_at * x0 + s.drift + s.L * w;
  return {x0, x1};
}

}  // namespace

TEST_CASE("fixed-time cost: coasting is free except for time") {
  const auto sys = double_integrator(1);
  const auto& kernel = di1_kernel();
  Eigen::Vector2d x0(0.2, 0.5);
  const double tau = 0.9;
  const Eigen::VectorXd x1 = zero_input_response(sys, x0, tau);
  REQUIRE(kernel.cost_fixed_time(x0, x1, tau) == Catch::Approx(tau).margin(1e-12));
}

TEST_CASE("fixed-time cost: 1D double integrator analytic form") {
  const auto& kernel = di1_kernel();
  Eigen::Vector2d x0(0, 0), x1(1, 0);
  // c(tau) = tau + 12/tau^3
  REQUIRE(kernel.cost_fixed_time(x0, x1, 1.0) == Catch::Approx(13.0).epsilon(1e-10));
  REQUIRE(kernel.cost_fixed_time(x0, x1, kSqrt6) ==
          Catch::Approx(4.0 / 3.0 * kSqrt6).epsilon(1e-10));
}

TEST_CASE("optimal steering matches the closed-form 1D minimizer") {
  const auto& kernel = di1_kernel();
  Eigen::Vector2d x0(0, 0), x1(1, 0);
  const auto res = kernel.optimal_steer(x0, x1, 10.0, 1e-12);
  REQUIRE(std::abs(res.tau_star - kSqrt6) < 1e-5);
  REQUIRE(std::abs(res.cost - 4.0 / 3.0 * kSqrt6) < 1e-5);

  // brute grid scan oracle at 1e-4 steps
  double best = std::numeric_limits<double>::infinity();
  for (double tau = 1e-4; tau <= 10.0; tau += 1e-4) {
    best = std::min(best, tau + 12.0 / (tau * tau * tau));
  }
  REQUIRE(res.cost <= best + 1e-6);
}

TEST_CASE("equilibrium self-steer degenerates to the zero result") {
  LinearAffineSystem sys;
  sys.A = Eigen::MatrixXd::Zero(2, 2);
  sys.B = Eigen::MatrixXd::Identity(2, 2);
  sys.c = Eigen::VectorXd::Zero(2);
  sys.R = Eigen::MatrixXd::Identity(2, 2);
  SteeringKernel kernel(sys, {});
  Eigen::Vector2d x(0.3, -0.4);
  const auto res = kernel.optimal_steer(x, x);
  REQUIRE(res.tau_star == 0.0);
  REQUIRE(res.cost == 0.0);
  REQUIRE((kernel.state_at(res, 0.0) - x).norm() == 0.0);
  REQUIRE(kernel.control_at(res, 0.0).norm() == 0.0);
}

TEST_CASE("optimal cost lower-bounds a dense fixed-time grid") {
  Rng rng(41);
  LinearAffineSystem sys;
  sys.A = Eigen::MatrixXd::Zero(3, 3);
  sys.A(0, 1) = 1.0;
  sys.A(1, 2) = 0.4;
  sys.A(2, 0) = -0.2;
  sys.B = Eigen::MatrixXd::Zero(3, 1);
  sys.B(2, 0) = 1.0;
  sys.c = Eigen::Vector3d(0.1, 0.0, -0.05);
  sys.R = Eigen::MatrixXd::Identity(1, 1);
  REQUIRE(validate(sys).ok());
  SteeringKernel kernel(sys, {});
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::Vector3d x0(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    Eigen::Vector3d x1 = x0 + 0.3 * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    const double tol = 1e-6;
    const auto res = kernel.optimal_steer(x0, x1, 10.0, tol);
    double grid_best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 2048; ++i) {
      const double tau = 1e-4 * std::pow(10.0 / 1e-4, i / 2047.0);
      grid_best = std::min(grid_best, kernel.cost_fixed_time(x0, x1, tau));
    }
    REQUIRE(res.cost <= grid_best + tol * res.cost);
  }
}

TEST_CASE("control curve: zero effort when the target coasts") {
  const auto sys = double_integrator(1);
  const auto& kernel = di1_kernel();
  Eigen::Vector2d x0(0.1, 0.4);
  const Eigen::VectorXd x1 = zero_input_response(sys, x0, 1.3);
  const auto res = kernel.fixed_time_steer(x0, x1, 1.3);
  for (double t = 0.0; t <= 1.3; t += 0.1) {
    REQUIRE(kernel.control_at(res, t).norm() < 1e-9);
  }
}

TEST_CASE("control energy quadrature reproduces the cost") {
  const auto& kernel = di1_kernel();
  Eigen::Vector2d x0(0, 0), x1(1, 0);
  const auto res = kernel.optimal_steer(x0, x1, 10.0, 1e-12);
  const auto effort = [&](double t) {
    const Eigen::VectorXd u = kernel.control_at(res, t);
    return u.dot(kernel.system().R * u);
  };
  const double cu = oracle::simpson_scalar(effort, 0.0, res.tau_star, 4096);
  REQUIRE(std::abs(cu - (res.cost - res.tau_star)) < 1e-6 * res.cost);
  REQUIRE(std::abs(cu - kSqrt6 / 3.0) < 1e-6);
}

TEST_CASE("control curve is finite and continuous on [0, tau*]") {
  Rng rng(43);
  const auto& kernel = di2_kernel();
  const auto [x0, x1] = pair_with_cost(rng, 1.2, 0.5);
  const auto res = kernel.optimal_steer(x0, x1);
  double prev = 0.0, max_u = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double t = res.tau_star * i / 1000.0;
    const Eigen::VectorXd u = kernel.control_at(res, t);
    REQUIRE(u.allFinite());
    max_u = std::max(max_u, u.norm());
    if (i > 0) REQUIRE((u.norm() - prev) < 0.05 * (1.0 + max_u));
    prev = u.norm();
  }
}

TEST_CASE("state curve hits both endpoints") {
  Rng rng(47);
  const auto& kernel = di2_kernel();
  for (int trial = 0; trial < 10; ++trial) {
    const auto [x0, x1] = pair_with_cost(rng, rng.uniform(0.2, 2.0), 0.5);
    const auto res = kernel.optimal_steer(x0, x1);
    REQUIRE((kernel.state_at(res, 0.0) - x0).norm() <= 1e-8);
    REQUIRE((kernel.state_at(res, res.tau_star) - x1).norm() <= 1e-8);
  }
}

TEST_CASE("state curve satisfies the dynamics (finite differences)") {
  const auto sys = double_integrator(1);
  const auto& kernel = di1_kernel();
  Eigen::Vector2d x0(0, 0), x1(1, 0);
  const auto res = kernel.optimal_steer(x0, x1, 10.0, 1e-12);
  const double h = 1e-6;
  double worst = 0.0;
  for (int i = 1; i < 100; ++i) {
    const double t = res.tau_star * i / 100.0;
    const Eigen::VectorXd xdot =
        (kernel.state_at(res, std::min(t + h, res.tau_star)) - kernel.state_at(res, t - h)) /
        (std::min(t + h, res.tau_star) - (t - h));
    const Eigen::VectorXd want =
        sys.A * kernel.state_at(res, t) + sys.B * kernel.control_at(res, t) + sys.c;
    worst = std::max(worst, (xdot - want).norm() / (1.0 + want.norm()));
  }
  REQUIRE(worst <= 1e-5);
}

TEST_CASE("fixed-time steering") {
  const auto& kernel = di1_kernel();
  Eigen::Vector2d x0(0, 0), x1(1, 0);
  const auto opt = kernel.optimal_steer(x0, x1, 10.0, 1e-12);

  SECTION("agrees with the optimal result at tau = tau*") {
    const auto fixed = kernel.fixed_time_steer(x0, x1, opt.tau_star);
    REQUIRE(fixed.cost == Catch::Approx(opt.cost).epsilon(1e-12));
    REQUIRE((fixed.d - opt.d).norm() < 1e-12);
  }
  SECTION("tau = 1 gives cost 13") {
    REQUIRE(kernel.fixed_time_steer(x0, x1, 1.0).cost == Catch::Approx(13.0).epsilon(1e-10));
  }
  SECTION("never beats the optimum") {
    Rng rng(53);
    for (int i = 0; i < 25; ++i) {
      const double tau = std::exp(rng.uniform(std::log(0.05), std::log(9.0)));
      REQUIRE(kernel.fixed_time_steer(x0, x1, tau).cost >= opt.cost - 1e-9);
    }
  }
}

TEST_CASE("reachability threshold") {
  const auto& kernel = di1_kernel();
  Eigen::Vector2d x0(0, 0), x1(1, 0);
  const double cstar = 4.0 / 3.0 * kSqrt6;  // ~3.2660

  SECTION("r above a known connection cost") {
    REQUIRE(kernel.reachable(x0, x1, cstar + 0.1, Direction::Forward));
    REQUIRE(kernel.reachable(x1, x0, cstar + 0.1, Direction::Backward));
  }
  SECTION("r = 3.2 is below the optimal cost") {
    REQUIRE_FALSE(kernel.reachable(x0, x1, 3.2, Direction::Forward));
  }
  SECTION("self-reachability at an equilibrium") {
    LinearAffineSystem sys;
    sys.A = Eigen::MatrixXd::Zero(2, 2);
    sys.B = Eigen::MatrixXd::Identity(2, 2);
    sys.c = Eigen::VectorXd::Zero(2);
    sys.R = Eigen::MatrixXd::Identity(2, 2);
    SteeringKernel k2(sys, {});
    Eigen::Vector2d x(0.5, 0.5);
    REQUIRE(k2.reachable(x, x, 1e-3, Direction::Forward));
  }
}

TEST_CASE("optimal time never collapses relative to cost on near pairs") {
  Rng rng(59);
  const auto& kernel = di2_kernel();
  int checked = 0;
  while (checked < 100) {
    const auto pr = pairs::short_trajectory_pair(kernel, rng, 0.02, 0.15, 1.5, 0.05);
    const auto res = kernel.optimal_steer(pr.x0, pr.x1, 10.0, 1e-9);
    if (res.cost > 0.2 || res.cost < 1e-4) continue;
    ++checked;
    REQUIRE(res.tau_star / res.cost >= 1.0 / 3.0);
  }
}

TEST_CASE("endpoint perturbations inflate cost at most linearly in eta") {
  Rng rng(61);
  const auto& kernel = di2_kernel();
  const double eta = 0.05;
  int checked = 0;
  while (checked < 40) {
    const double target = std::exp(rng.uniform(std::log(2e-3), std::log(9e-2)));
    const auto [x0, x1] = pair_with_cost(rng, target, 0.5);
    const auto base = kernel.optimal_steer(x0, x1, 10.0, 1e-9);
    if (base.cost < 1e-3 || base.cost > 1e-1) continue;
    ++checked;
    const auto& s = kernel.slice(base.tau_star);
    auto perturb = [&](const Eigen::VectorXd& x) {
      Eigen::VectorXd w(4);
      for (int i = 0; i < 4; ++i) w[i] = rng.normal();
      w *= eta * std::sqrt(base.cost) * rng.next_double() / w.norm();
      return (x + s.L * w).eval();
    };
    const auto pert = kernel.optimal_steer(perturb(x0), perturb(x1), 10.0, 1e-9);
    const double ratio = (pert.cost / base.cost - 1.0) / eta;
    REQUIRE(ratio <= 5.0);
  }
}

TEST_CASE("trajectory concatenation bookkeeping") {
  const auto& kernel = di1_kernel();
  Eigen::Vector2d a(0, 0), b(0.5, 0.2), c(1, 0);
  auto s1 = kernel.optimal_steer(a, b);
  auto s2 = kernel.optimal_steer(b, c);
  const auto traj = make_trajectory({s1, s2});
  REQUIRE(traj.duration == Catch::Approx(s1.tau_star + s2.tau_star));
  REQUIRE(traj.cost == Catch::Approx(s1.cost + s2.cost));
  REQUIRE((traj.segments[0].x1 - traj.segments[1].x0).norm() == 0.0);
}

TEST_CASE("steering rejects out-of-domain curve queries") {
  const auto& kernel = di1_kernel();
  const auto res = kernel.optimal_steer(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0));
  REQUIRE_THROWS_AS(kernel.state_at(res, res.tau_star + 0.1), SteerError);
  REQUIRE_THROWS_AS(kernel.control_at(res, -0.1), SteerError);
}
