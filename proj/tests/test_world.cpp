#include <catch2/catch_amalgamated.hpp>

#include "dfmt/rng.hpp"
#include "dfmt/world.hpp"
#include "oracles.hpp"
#include "test_worlds.hpp"

using namespace dfmt;

TEST_CASE("uniform sampling moments in the free box") {
  auto p = fixtures::free2d();
  Rng rng(71);
  const int N = 100000;
  const auto samples = sample_free(p, N, rng);
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  for (const auto& x : samples) mean += x;
  mean /= N;
  // 3 sigma of the sample mean, per coordinate
  for (int i = 0; i < 4; ++i) {
    const double width = p.bounds.hi[i] - p.bounds.lo[i];
    const double sigma = width / std::sqrt(12.0) / std::sqrt(static_cast<double>(N));
    const double center = 0.5 * (p.bounds.hi[i] + p.bounds.lo[i]);
    REQUIRE(std::abs(mean[i] - center) < 3.0 * sigma);
  }
}

TEST_CASE("rejection sampling respects obstacles") {
  auto p = fixtures::free2d();
  Obstacle left_half;
  left_half.lo = Eigen::Vector2d(0.0, 0.0);
  left_half.hi = Eigen::Vector2d(0.5, 1.0);
  p.obstacles.push_back(left_half);
  p.x_init = Eigen::Vector4d(0.7, 0.1, 0, 0);
  Rng rng(73);
  for (const auto& x : sample_free(p, 5000, rng)) {
    REQUIRE(state_free(p, x));
    const bool outside = x[0] <= 0.5 + 1e-15 ? (x[0] >= 0.5 || x[1] >= 1.0 || x[1] <= 0.0) : true;
    REQUIRE(outside);
  }
}

TEST_CASE("sampling is deterministic under the seed") {
  auto p = fixtures::wall2d();
  Rng a(7), b(7);
  const auto s1 = sample_free(p, 200, a);
  const auto s2 = sample_free(p, 200, b);
  for (int i = 0; i < 200; ++i) REQUIRE((s1[i] - s2[i]).norm() == 0.0);
}

TEST_CASE("state_free edge cases") {
  auto p = fixtures::wall2d();
  SECTION("inside an obstacle") {
    REQUIRE_FALSE(state_free(p, Eigen::Vector4d(0.5, 0.3, 0, 0)));
  }
  SECTION("bounds faces are free (closed free space)") {
    REQUIRE(state_free(p, Eigen::Vector4d(0.0, 0.2, -0.5, 0.5)));
  }
  SECTION("obstacle boundary is free (closure)") {
    REQUIRE(state_free(p, Eigen::Vector4d(0.45, 0.3, 0, 0)));
  }
  SECTION("outside bounds") {
    REQUIRE_FALSE(state_free(p, Eigen::Vector4d(1.1, 0.2, 0, 0)));
    REQUIRE_FALSE(state_free(p, Eigen::Vector4d(0.2, 0.2, 0.6, 0)));
  }
}

TEST_CASE("goal membership is strict interior") {
  const auto p = fixtures::free2d();
  REQUIRE(in_goal(p, Eigen::Vector4d(0.85, 0.85, 0, 0)));
  REQUIRE_FALSE(in_goal(p, Eigen::Vector4d(0.75, 0.85, 0, 0)));  // boundary
  REQUIRE_FALSE(in_goal(p, Eigen::Vector4d(0.2, 0.2, 0, 0)));
}

TEST_CASE("trajectory collision checking") {
  const auto p_free = fixtures::corridor1d();
  SteeringKernel kernel(p_free.sys, {});
  Eigen::Vector2d x0(0.0, 0.0), x1(1.0, 0.0);
  const auto res = kernel.optimal_steer(x0, x1);

  SECTION("free world always passes") {
    REQUIRE(collision_free(p_free, kernel, res, 5e-3));
  }
  SECTION("a wall across the path midpoint blocks it") {
    auto p = p_free;
    Obstacle wall;
    wall.lo = Eigen::VectorXd::Constant(1, 0.45);
    wall.hi = Eigen::VectorXd::Constant(1, 0.55);
    p.obstacles.push_back(wall);
    p.x_init = Eigen::Vector2d(0.0, 0.0);
    REQUIRE_FALSE(collision_free(p, kernel, res, 5e-3));
  }
  SECTION("zero-duration result at a free state passes") {
    SteeringResult deg;
    deg.x0 = Eigen::Vector2d(0.2, 0.0);
    deg.x1 = deg.x0;
    deg.d = Eigen::Vector2d::Zero();
    REQUIRE(collision_free(p_free, kernel, deg, 5e-3));
  }
  SECTION("monotone in resolution on a grid refinement family") {
    auto p = p_free;
    Obstacle wall;
    wall.lo = Eigen::VectorXd::Constant(1, 0.52);
    wall.hi = Eigen::VectorXd::Constant(1, 0.53);
    p.obstacles.push_back(wall);
    const double fine = 1e-3;
    const bool fine_ok = collision_free(p, kernel, res, fine);
    if (fine_ok) {
      REQUIRE(collision_free(p, kernel, res, 2 * fine));
      REQUIRE(collision_free(p, kernel, res, 4 * fine));
    }
  }
}

TEST_CASE("free volume") {
  SECTION("unit box without obstacles") {
    auto p = fixtures::corridor1d();  // position extent 1, velocity extent 2
    REQUIRE(free_volume(p) == Catch::Approx(2.0));
  }
  SECTION("an obstacle cylinder removes exactly its share") {
    auto p = fixtures::free2d();
    Obstacle half;
    half.lo = Eigen::Vector2d(0.0, 0.0);
    half.hi = Eigen::Vector2d(0.5, 1.0);
    p.obstacles.push_back(half);
    REQUIRE(free_volume(p) == Catch::Approx(0.5));  // velocity area is 1
  }
  SECTION("overlapping obstacles agree with Monte Carlo") {
    auto p = fixtures::free2d();
    Obstacle a, b;
    a.lo = Eigen::Vector2d(0.1, 0.1);
    a.hi = Eigen::Vector2d(0.5, 0.5);
    b.lo = Eigen::Vector2d(0.3, 0.3);
    b.hi = Eigen::Vector2d(0.7, 0.8);
    p.obstacles = {a, b};
    p.x_init = Eigen::Vector4d(0.9, 0.9, 0, 0);
    const double exact = free_volume(p);
    Rng rng(79);
    int free_count = 0;
    const int N = 1000000;
    Eigen::Vector4d x;
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < 4; ++j) x[j] = rng.uniform(p.bounds.lo[j], p.bounds.hi[j]);
      if (state_free(p, x)) ++free_count;
    }
    const double mc = p.bounds.volume() * free_count / N;
    REQUIRE(std::abs(mc - exact) < 0.01 * exact);
  }
}

TEST_CASE("sample_free outputs always satisfy state_free") {
  auto p = fixtures::wall2d();
  Rng rng(83);
  for (const auto& x : sample_free(p, 2000, rng)) REQUIRE(state_free(p, x));
}

TEST_CASE("degenerate free space stalls with a diagnostic") {
  auto p = fixtures::free2d();
  Obstacle all;
  all.lo = Eigen::Vector2d(-0.1, -0.1);
  all.hi = Eigen::Vector2d(1.1, 1.1);
  p.obstacles.push_back(all);
  Rng rng(89);
  REQUIRE_THROWS_AS(sample_free(p, 10, rng), RejectionStall);
}
