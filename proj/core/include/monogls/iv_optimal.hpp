#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "monogls/dataset.hpp"
#include "monogls/isotonic.hpp"
#include "monogls/linreg.hpp"
#include "monogls/mgls.hpp"

namespace monogls {

/// Feasible optimal IV fit for y = a + b x + u with scalar endogenous x and
/// scalar instrument z, using an isotonic estimate of E[u^2 | z].
struct IvMglsFit {
  Coefficients coefficients;
  double q_n = 0.0;
  TrimSide side = TrimSide::lower;
  std::vector<bool> kept;
  std::size_t n_kept = 0;
  Eigen::VectorXd v2;  // floored variance estimate at every observation
  IsotonicFit v2_fit;
  Direction direction = Direction::increasing;
  CovarianceSet covariances;  // sandwich only
  LinearFit first_stage;      // 2SLS
  double first_stage_t = 0.0;
  bool weak_instrument = false;  // |t| <= 2 on the first-stage slope
  Eigen::Matrix2d moment_matrix = Eigen::Matrix2d::Zero();
  Eigen::Vector2d moment_rhs = Eigen::Vector2d::Zero();
};

/// `d` must carry one regressor, no controls and an intercept.
IvMglsFit fit_iv_mgls(const Dataset& d, const Eigen::VectorXd& instrument,
                      const MglsOptions& opts = {});

Eigen::MatrixXd iv_sandwich(const IvMglsFit& fit, const Dataset& d,
                            const Eigen::VectorXd& instrument);

/// Trimmed sample moment sum_kept v^-2 (1, z_i)' (y_i - a - b x_i) at theta.
Eigen::Vector2d iv_moment(const IvMglsFit& fit, const Dataset& d,
                          const Eigen::VectorXd& instrument,
                          const Eigen::Vector2d& theta);

nlohmann::json to_json(const IvMglsFit& fit);

}  // namespace monogls
