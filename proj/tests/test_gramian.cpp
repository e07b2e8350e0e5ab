#include <catch2/catch_amalgamated.hpp>

#include "dfmt/gramian.hpp"
#include "dfmt/rng.hpp"
#include "dfmt/system.hpp"
#include "oracles.hpp"

using namespace dfmt;

namespace {

LinearAffineSystem random_system(Rng& rng, int n, int m, double drift = 0.0) {
  LinearAffineSystem sys;
  sys.A = Eigen::MatrixXd::NullaryExpr(n, n, [&](Eigen::Index, Eigen::Index) {
    return rng.uniform(-1, 1);
  });
  sys.B = Eigen::MatrixXd::NullaryExpr(n, m, [&](Eigen::Index, Eigen::Index) {
    return rng.uniform(-1, 1);
  });
  sys.c = Eigen::VectorXd::NullaryExpr(n, [&](Eigen::Index) { return drift * rng.uniform(-1, 1); });
  sys.R = Eigen::MatrixXd::Identity(m, m);
  return sys;
}

}  // namespace

TEST_CASE("1D double integrator Gramian is exact") {
  const auto sys = double_integrator(1);
  const auto g = gramian(sys, 1.0);
  Eigen::MatrixXd want(2, 2);
  want << 1.0 / 3.0, 0.5, 0.5, 1.0;
  REQUIRE((g.G - want).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((g.G - g.L * g.L.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("A=0, B=R=I gives G = tI") {
  LinearAffineSystem sys;
  sys.A = Eigen::MatrixXd::Zero(3, 3);
  sys.B = Eigen::MatrixXd::Identity(3, 3);
  sys.c = Eigen::VectorXd::Zero(3);
  sys.R = Eigen::MatrixXd::Identity(3, 3);
  const auto g = gramian(sys, 0.37);
  REQUIRE((g.G - 0.37 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("2D double integrator determinant at t = 0.5") {
  const auto g = gramian(double_integrator(2), 0.5);
  const double want = std::pow(0.5, 8) / 144.0;  // per-axis t^4/12, squared
  REQUIRE(std::abs(g.G.determinant() - want) < 1e-9 * want);
}

TEST_CASE("Van Loan Gramian matches adaptive quadrature of the defining integral") {
  Rng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const auto sys = random_system(rng, 3, 2);
    if (!validate(sys).ok()) continue;
    const double t = rng.uniform(0.3, 1.5);
    const auto g = gramian(sys, t);
    const Eigen::MatrixXd Rinv = sys.R.inverse();
    const auto integrand = [&](double s) -> Eigen::MatrixXd {
      const Eigen::MatrixXd E = matrix_exponential(sys.A, s);
      return E * sys.B * Rinv * sys.B.transpose() * E.transpose();
    };
    const Eigen::MatrixXd want = oracle::simpson_matrix(integrand, t, 2048);
    REQUIRE((g.G - want).norm() < 1e-9 * want.norm());
  }
}

TEST_CASE("zero input response") {
  const auto di = double_integrator(1);
  Eigen::Vector2d x0(0.4, -1.2);

  SECTION("t = 0 returns x0") {
    REQUIRE((zero_input_response(di, x0, 0.0) - x0).norm() == 0.0);
  }
  SECTION("double integrator coasts") {
    const auto x = zero_input_response(di, x0, 0.7);
    REQUIRE(std::abs(x[0] - (0.4 + 0.7 * -1.2)) < 1e-14);
    REQUIRE(std::abs(x[1] - -1.2) < 1e-14);
  }
  SECTION("pure drift: A = 0") {
    LinearAffineSystem sys;
    sys.A = Eigen::MatrixXd::Zero(2, 2);
    sys.B = Eigen::MatrixXd::Identity(2, 2);
    sys.c = Eigen::Vector2d(0.3, -0.1);
    sys.R = Eigen::MatrixXd::Identity(2, 2);
    const auto x = zero_input_response(sys, x0, 2.0);
    REQUIRE((x - (x0 + 2.0 * sys.c)).norm() < 1e-13);
  }
}

TEST_CASE("weighted norm") {
  SECTION("zero vector") {
    const auto g = gramian(double_integrator(1), 1.0);
    REQUIRE(weighted_norm(g, Eigen::Vector2d::Zero()) == 0.0);
  }
  SECTION("scalar Gramian G = tI") {
    LinearAffineSystem sys;
    sys.A = Eigen::MatrixXd::Zero(2, 2);
    sys.B = Eigen::MatrixXd::Identity(2, 2);
    sys.c = Eigen::VectorXd::Zero(2);
    sys.R = Eigen::MatrixXd::Identity(2, 2);
    const auto g = gramian(sys, 4.0);
    Eigen::Vector2d v(3.0, 4.0);
    REQUIRE(std::abs(weighted_norm(g, v) - 5.0 / 2.0) < 1e-12);
  }
  SECTION("1D double integrator, v = e1, t = 1") {
    const auto g = gramian(double_integrator(1), 1.0);
    REQUIRE(std::abs(weighted_norm(g, Eigen::Vector2d(1, 0)) - std::sqrt(12.0)) < 1e-9);
  }
  SECTION("triangular-solve route agrees with the explicit inverse") {
    Rng rng(77);
    for (int trial = 0; trial < 5; ++trial) {
      const auto sys = random_system(rng, 3, 2);
      if (!validate(sys).ok()) continue;
      const auto g = gramian(sys, rng.uniform(0.2, 1.5));
      Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
      const double direct = std::sqrt(v.dot(g.G.inverse() * v));
      REQUIRE(std::abs(weighted_norm(g, v) - direct) < 1e-10 * std::max(1.0, direct));
    }
  }
}

TEST_CASE("spectrum") {
  SECTION("G = tI has a flat spectrum") {
    LinearAffineSystem sys;
    sys.A = Eigen::MatrixXd::Zero(3, 3);
    sys.B = Eigen::MatrixXd::Identity(3, 3);
    sys.c = Eigen::VectorXd::Zero(3);
    sys.R = Eigen::MatrixXd::Identity(3, 3);
    const auto lam = spectrum(gramian(sys, 0.9));
    for (int i = 0; i < 3; ++i) REQUIRE(std::abs(lam[i] - 0.9) < 1e-13);
  }
  SECTION("eigenvalue product reproduces the determinant") {
    Rng rng(13);
    const auto sys = random_system(rng, 4, 2);
    REQUIRE(validate(sys).ok());
    const auto g = gramian(sys, 0.8);
    const auto lam = spectrum(g);
    REQUIRE(std::is_sorted(lam.data(), lam.data() + lam.size(), std::greater<double>()));
    REQUIRE(std::abs(lam.prod() - g.G.determinant()) <
            1e-9 * std::abs(g.G.determinant()));
  }
  SECTION("1D double integrator small-time split") {
    const double t = 1e-3;
    const auto lam = spectrum(gramian(double_integrator(1), t));
    REQUIRE(lam[0] / t == Catch::Approx(1.0).epsilon(1e-2));
    REQUIRE(lam[1] / (t * t * t / 12.0) == Catch::Approx(1.0).epsilon(1e-2));
  }
}

TEST_CASE("Lyapunov residual of the Gramian ODE") {
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const auto sys = random_system(rng, 3, 2);
    if (!validate(sys).ok()) continue;
    const Eigen::MatrixXd M = sys.B * sys.R.inverse() * sys.B.transpose();
    const double t = rng.uniform(0.1, 2.0);
    const double h = 1e-5;
    const Eigen::MatrixXd Gdot =
        (gramian(sys, t + h).G - gramian(sys, t - h).G) / (2.0 * h);
    const Eigen::MatrixXd G = gramian(sys, t).G;
    const Eigen::MatrixXd resid = sys.A * G + G * sys.A.transpose() + M - Gdot;
    REQUIRE(resid.norm() <= 1e-6 * M.norm());
  }
}

TEST_CASE("Gramian is monotone in t (PSD ordering)") {
  Rng rng(19);
  for (int trial = 0; trial < 8; ++trial) {
    const auto sys = random_system(rng, 3, 1, 0.5);
    if (!validate(sys).ok()) continue;
    double t1 = rng.uniform(0.05, 1.9);
    double t2 = rng.uniform(0.05, 1.9);
    if (t1 > t2) std::swap(t1, t2);
    if (t2 - t1 < 1e-3) t2 += 0.1;
    const Eigen::MatrixXd D = gramian(sys, t2).G - gramian(sys, t1).G;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D, Eigen::EigenvaluesOnly);
    REQUIRE(es.eigenvalues().minCoeff() >= -1e-12 * D.norm());
  }
}

TEST_CASE("small-time spectral slopes of the 2D double integrator") {
  const auto sys = double_integrator(2);
  std::vector<double> log_t;
  std::vector<std::vector<double>> log_lam(4);
  std::vector<double> log_det, log_min;
  for (int i = 0; i < 8; ++i) {
    const double t = 1e-3 * std::pow(10.0, i / 7.0);
    const auto g = gramian(sys, t);
    const auto lam = spectrum(g);
    log_t.push_back(std::log(t));
    for (int k = 0; k < 4; ++k) log_lam[k].push_back(std::log(lam[k]));
    log_det.push_back(std::log(g.G.determinant()));
    log_min.push_back(std::log(lam[3]));
  }
  const double want[4] = {1.0, 1.0, 3.0, 3.0};  // 2 e_i + 1 for e = (0,0,1,1)
  for (int k = 0; k < 4; ++k) {
    REQUIRE(std::abs(oracle::slope(log_t, log_lam[k]) - want[k]) < 0.05);
  }
  REQUIRE(std::abs(oracle::slope(log_t, log_det) - 8.0) < 0.1);   // D
  REQUIRE(std::abs(oracle::slope(log_t, log_min) - 3.0) < 0.05);  // 2 nu - 1
}

TEST_CASE("norm equivalence sandwich from the Cholesky factor") {
  Rng rng(23);
  const auto sys = double_integrator(2);
  for (int trial = 0; trial < 40; ++trial) {
    const double t = rng.uniform(0.01, 1.0);
    const auto g = gramian(sys, t);
    Eigen::VectorXd x(4);
    for (int i = 0; i < 4; ++i) x[i] = rng.normal();
    const double wn = weighted_norm(g, x);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(g.L);
    const double L_norm = svd.singularValues()(0);
    const double Linv_norm = 1.0 / svd.singularValues().tail(1)(0);
    REQUIRE(wn >= x.norm() / L_norm - 1e-12);
    REQUIRE(wn <= Linv_norm * x.norm() + 1e-12);
  }
}

TEST_CASE("perturbation ball volume identity (Monte Carlo)") {
  // r^n zeta_n sqrt(det G(tau)) vs direct Monte Carlo volume of the ellipsoid.
  const auto sys = double_integrator(1);
  const double tau = 0.8, r = 0.7;
  const auto g = gramian(sys, tau);
  const double zeta2 = M_PI;
  const double want = r * r * zeta2 * std::sqrt(g.G.determinant());

  Eigen::Vector2d half;
  for (int j = 0; j < 2; ++j) half[j] = r * std::sqrt(g.G(j, j));
  const double box_vol = 4.0 * half[0] * half[1];
  Rng rng(29);
  int inside = 0;
  const int Nmc = 200000;
  for (int i = 0; i < Nmc; ++i) {
    Eigen::Vector2d z(rng.uniform(-half[0], half[0]), rng.uniform(-half[1], half[1]));
    if (weighted_norm(g, z) <= r) ++inside;
  }
  const double got = box_vol * inside / Nmc;
  REQUIRE(std::abs(got - want) < 0.05 * want);
}

TEST_CASE("Cholesky failure at vanishing horizon raises GramianError") {
  REQUIRE_THROWS_AS(gramian(double_integrator(2), 1e-120), GramianError);
}

TEST_CASE("gramian rejects nonpositive horizons") {
  REQUIRE_THROWS_AS(gramian(double_integrator(1), 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(gramian(double_integrator(1), -1.0), std::invalid_argument);
}
