#include "linalg.hpp"

#include <string>

#include "monogls/error.hpp"

namespace monogls::detail {

Qr full_rank_qr(const Eigen::MatrixXd& A, const char* what) {
  if (A.rows() < A.cols()) {
    throw Error(ErrorKind::singular_design,
                std::string(what) + ": fewer rows than columns");
  }
  Qr qr(A.rows(), A.cols());
  qr.setThreshold(kRankTolerance);
  qr.compute(A);
  if (qr.rank() < A.cols()) {
    throw Error(ErrorKind::singular_design,
                std::string(what) + ": matrix has rank " + std::to_string(qr.rank()) +
                    " < " + std::to_string(A.cols()) + " columns");
  }
  return qr;
}

Eigen::MatrixXd gram_inverse(const Qr& qr) {
  const Eigen::Index k = qr.cols();
  Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(
      Eigen::MatrixXd::Identity(k, k));
  Eigen::MatrixXd inner = Rinv * Rinv.transpose();
  // A P = Q R  =>  (A'A)^{-1} = P R^{-1} R^{-T} P'
  Eigen::MatrixXd out = qr.colsPermutation() * inner * qr.colsPermutation().transpose();
  return symmetrize(out);
}

WeightedSolve weighted_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& w, const char* what) {
  if (w.size() == 0) {
    Qr qr = full_rank_qr(A, what);
    return {qr.solve(y), gram_inverse(qr)};
  }
  const Eigen::VectorXd sw = w.cwiseSqrt();
  Eigen::MatrixXd As = sw.asDiagonal() * A;
  Eigen::VectorXd ys = sw.cwiseProduct(y);
  Qr qr = full_rank_qr(As, what);
  return {qr.solve(ys), gram_inverse(qr)};
}

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& A, const Eigen::VectorXd& s) {
  return symmetrize(A.transpose() * s.asDiagonal() * A);
}

}  // namespace monogls::detail
