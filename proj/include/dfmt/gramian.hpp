#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

#include "dfmt/matrix_exp.hpp"
#include "dfmt/system.hpp"

namespace dfmt {

struct GramianError : std::runtime_error {
  explicit GramianError(const std::string& what) : std::runtime_error(what) {}
};

// Weighted controllability Gramian at horizon t together with its Cholesky
// factor G = L L^T and the state transition matrix exp(A t).
struct GramianAt {
  double t = 0.0;
  Eigen::MatrixXd G;
  Eigen::MatrixXd L;
  Eigen::MatrixXd exp_at;
};

// G(t) = int_0^t exp(As) B R^-1 B^T exp(A^T s) ds via the augmented-matrix
// exponential: with Z = [[-A, BR^-1B^T],[0, A^T]], exp(Zt) = [[F11,F12],[0,F22]]
// and G(t) = F22^T F12, exp(At) = F22^T. Exact for nilpotent A, no step-size
// tuning anywhere.
inline GramianAt gramian(const LinearAffineSystem& sys, double t, double norm_cap = 50.0) {
  if (!(t > 0.0)) throw std::invalid_argument("gramian: t must be positive");
  const int n = sys.n();
  const Eigen::MatrixXd M = sys.B * sys.R.llt().solve(sys.B.transpose());
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  Z.topLeftCorner(n, n) = -sys.A;
  Z.topRightCorner(n, n) = M;
  Z.bottomRightCorner(n, n) = sys.A.transpose();
  const Eigen::MatrixXd F = matrix_exponential(Z, t, norm_cap);

  GramianAt out;
  out.t = t;
  out.exp_at = F.bottomRightCorner(n, n).transpose();
  out.G = out.exp_at * F.topRightCorner(n, n);
  out.G = (0.5 * (out.G + out.G.transpose())).eval();

  Eigen::LLT<Eigen::MatrixXd> llt(out.G);
  if (llt.info() != Eigen::Success) {
    throw GramianError("gramian: Cholesky failed at t = " + std::to_string(t) +
                       " (not numerically positive definite)");
  }
  out.L = llt.matrixL();
  return out;
}

// int_0^t exp(As) c ds through the (n+1)-state augmented exponential.
inline Eigen::VectorXd drift_integral(const LinearAffineSystem& sys, double t,
                                      double norm_cap = 50.0) {
  const int n = sys.n();
  if (sys.c.isZero(0.0)) return Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n + 1, n + 1);
  W.topLeftCorner(n, n) = sys.A;
  W.topRightCorner(n, 1) = sys.c;
  const Eigen::MatrixXd F = matrix_exponential(W, t, norm_cap);
  return F.topRightCorner(n, 1);
}

// Zero-input response xbar(t) = exp(At) x0 + int_0^t exp(As) c ds.
inline Eigen::VectorXd zero_input_response(const LinearAffineSystem& sys,
                                           const Eigen::VectorXd& x0, double t,
                                           double norm_cap = 50.0) {
  if (t < 0.0) throw std::invalid_argument("zero_input_response: t must be nonnegative");
  if (t == 0.0) return x0;
  return matrix_exponential(sys.A, t, norm_cap) * x0 + drift_integral(sys, t, norm_cap);
}

// ||v||_{G^-1} = ||L^-1 v||, by triangular solve (no explicit inverse).
inline double weighted_norm(const GramianAt& g, const Eigen::VectorXd& v) {
  return g.L.triangularView<Eigen::Lower>().solve(v).norm();
}

// Eigenvalues of G, descending.
inline Eigen::VectorXd spectrum(const GramianAt& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.G, Eigen::EigenvaluesOnly);
  return es.eigenvalues().reverse();
}

}  // namespace dfmt
