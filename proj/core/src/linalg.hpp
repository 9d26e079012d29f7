#pragma once

#include <Eigen/Dense>

#include "monogls/dataset.hpp"

namespace monogls::detail {

inline constexpr double kRankTolerance = 1e-10;

using Qr = Eigen::ColPivHouseholderQR<Eigen::MatrixXd>;

/// [1 | X | Z] without the rank check.
Eigen::MatrixXd raw_design(const Dataset& d);

/// Column-pivoted QR with the relative rank threshold; throws
/// singular_design when A lacks full column rank.
Qr full_rank_qr(const Eigen::MatrixXd& A, const char* what);

/// (A'A)^{-1} from a full-rank QR of A.
Eigen::MatrixXd gram_inverse(const Qr& qr);

/// Solves min sum w_i (y_i - A_i' b)^2; w empty means unit weights.
struct WeightedSolve {
  Eigen::VectorXd coef;
  Eigen::MatrixXd gram_inverse;  // (A' diag(w) A)^{-1}
};
WeightedSolve weighted_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& w, const char* what);

/// sum_i s_i A_i A_i'.
Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& A, const Eigen::VectorXd& s);

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& M) {
  return 0.5 * (M + M.transpose());
}

}  // namespace monogls::detail
