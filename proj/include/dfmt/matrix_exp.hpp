#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <unsupported/Eigen/MatrixFunctions>

namespace dfmt {

struct OverflowError : std::runtime_error {
  explicit OverflowError(const std::string& what) : std::runtime_error(what) {}
};

inline double one_norm(const Eigen::MatrixXd& M) {
  return M.cwiseAbs().colwise().sum().maxCoeff();
}

// exp(M t) by scaling-and-squaring with a high-order Pade approximant
// (Eigen's MatrixFunctions kernel; squaring count picked from the 1-norm).
// norm_cap bounds ||M t||_1: beyond it the result is numerically meaningless
// at this scale and we refuse instead of returning garbage.
inline Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& M, double t,
                                          double norm_cap = 50.0) {
  if (M.rows() != M.cols()) throw std::invalid_argument("matrix_exponential: square matrix required");
  if (!M.allFinite() || !std::isfinite(t)) throw std::invalid_argument("matrix_exponential: non-finite input");
  Eigen::MatrixXd Mt = M * t;
  const double n1 = Mt.size() == 0 ? 0.0 : one_norm(Mt);
  if (n1 > norm_cap) {
    throw OverflowError("matrix_exponential: ||Mt||_1 = " + std::to_string(n1) +
                        " exceeds cap " + std::to_string(norm_cap));
  }
  return Mt.exp();
}

}  // namespace dfmt
