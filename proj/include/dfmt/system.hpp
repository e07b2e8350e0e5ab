#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dfmt {

// Linear affine dynamics  xdot = A x + B u + c  with quadratic control
// weight R (symmetric positive definite). The drift vector c is kept
// separate from the state on purpose: folding it in would break the
// controllability assumption on (A, B).
struct LinearAffineSystem {
  Eigen::MatrixXd A;  // n x n
  Eigen::MatrixXd B;  // n x m
  Eigen::VectorXd c;  // n
  Eigen::MatrixXd R;  // m x m, SPD

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
};

inline LinearAffineSystem double_integrator(int axes, double control_weight = 1.0) {
  const int n = 2 * axes;
  LinearAffineSystem sys;
  sys.A = Eigen::MatrixXd::Zero(n, n);
  sys.B = Eigen::MatrixXd::Zero(n, axes);
  for (int i = 0; i < axes; ++i) {
    sys.A(i, axes + i) = 1.0;
    sys.B(axes + i, i) = 1.0;
  }
  sys.c = Eigen::VectorXd::Zero(n);
  sys.R = control_weight * Eigen::MatrixXd::Identity(axes, axes);
  return sys;
}

enum class SystemFault { None, DimensionMismatch, RNotSPD, NotControllable };

struct ValidationReport {
  SystemFault fault = SystemFault::None;
  std::string detail;
  bool ok() const { return fault == SystemFault::None; }
};

struct NotControllableError : std::runtime_error {
  explicit NotControllableError(const std::string& what) : std::runtime_error(what) {}
};

// Controllability structure from the left-to-right independence scan of
// [B AB ... A^{n-1}B]. exponents[i] is the power of A attached to the i-th
// accepted column (nondecreasing); indices[k] counts accepted columns of
// input k; D = sum nu_k^2 drives the small-time Gramian determinant.
struct ControllabilityInfo {
  std::vector<int> indices;    // nu_k, one per input column, sum = n
  std::vector<int> exponents;  // e_1 <= ... <= e_n
  int nu = 0;                  // max_k nu_k
  int D = 0;                   // sum nu_k^2
  double Dtilde = 0.0;         // (n + D) / 2
};

inline ControllabilityInfo controllability_info(const LinearAffineSystem& sys,
                                                double rel_tol = 1e-10) {
  const int n = sys.n();
  const int m = sys.m();
  if (sys.B.rows() != n) throw std::invalid_argument("controllability_info: B row count");

  // Columns of the controllability matrix in scan order (power-major).
  std::vector<Eigen::VectorXd> cols;
  cols.reserve(static_cast<std::size_t>(n) * m);
  Eigen::MatrixXd block = sys.B;
  double max_norm = 0.0;
  for (int p = 0; p < n; ++p) {
    for (int k = 0; k < m; ++k) {
      cols.push_back(block.col(k));
      max_norm = std::max(max_norm, cols.back().norm());
    }
    block = sys.A * block;
  }
  const double tol = rel_tol * std::max(max_norm, 1e-300);

  ControllabilityInfo info;
  info.indices.assign(m, 0);
  std::vector<Eigen::VectorXd> basis;  // orthonormalized accepted columns
  for (std::size_t idx = 0; idx < cols.size() && static_cast<int>(basis.size()) < n; ++idx) {
    const int power = static_cast<int>(idx) / m;
    const int input = static_cast<int>(idx) % m;
    Eigen::VectorXd v = cols[idx];
    for (const auto& q : basis) v -= q.dot(v) * q;
    // second MGS pass for numerical safety
    for (const auto& q : basis) v -= q.dot(v) * q;
    if (v.norm() > tol) {
      basis.push_back(v.normalized());
      info.exponents.push_back(power);
      info.indices[input] += 1;
    }
  }
  if (static_cast<int>(basis.size()) < n) {
    std::ostringstream msg;
    msg << "system not controllable: rank(C) = " << basis.size() << " < n = " << n;
    throw NotControllableError(msg.str());
  }
  std::sort(info.exponents.begin(), info.exponents.end());
  info.nu = *std::max_element(info.indices.begin(), info.indices.end());
  info.D = 0;
  for (int nu_k : info.indices) info.D += nu_k * nu_k;
  info.Dtilde = 0.5 * (n + info.D);
  return info;
}

inline ValidationReport validate(const LinearAffineSystem& sys) {
  ValidationReport rep;
  const int n = static_cast<int>(sys.A.rows());
  const int m = static_cast<int>(sys.B.cols());
  if (sys.A.cols() != n || sys.B.rows() != n || sys.c.size() != n ||
      sys.R.rows() != m || sys.R.cols() != m || n <= 0 || m <= 0) {
    rep.fault = SystemFault::DimensionMismatch;
    rep.detail = "matrix dimensions are inconsistent";
    return rep;
  }
  const double r_scale = std::max(1.0, sys.R.cwiseAbs().maxCoeff());
  if ((sys.R - sys.R.transpose()).cwiseAbs().maxCoeff() > 1e-12 * r_scale) {
    rep.fault = SystemFault::RNotSPD;
    rep.detail = "R is not symmetric";
    return rep;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sys.R);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig <= 0.0) {
    std::ostringstream msg;
    msg << "R has non-positive eigenvalue " << min_eig;
    rep.fault = SystemFault::RNotSPD;
    rep.detail = msg.str();
    return rep;
  }
  try {
    controllability_info(sys);
  } catch (const NotControllableError& e) {
    rep.fault = SystemFault::NotControllable;
    rep.detail = e.what();
    return rep;
  }
  return rep;
}

}  // namespace dfmt
