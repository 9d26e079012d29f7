#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "monogls/dataset.hpp"
#include "monogls/isotonic.hpp"
#include "monogls/mgls.hpp"

namespace monogls {

struct IndexOptions {
  int n_starts = 10;
  std::uint64_t seed = 0;
  double tol = 1e-8;     // stop when the simplex objective spread falls below
  int max_iter = 0;      // 0 selects 500 * dim
  double initial_step = 0.25;
};

struct IndexStart {
  Eigen::VectorXd start;
  Eigen::VectorXd eta;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct IndexFit {
  Eigen::VectorXd eta;  // unit norm
  IsotonicFit link;     // increasing fit of u^2 on X'eta
  double objective = 0.0;
  int starts = 0;
  std::vector<IndexStart> trace;
};

/// Increasing isotonic regression of residuals_sq on the index het * eta.
IsotonicFit profile_isotonic(const Eigen::MatrixXd& het,
                             const Eigen::VectorXd& residuals_sq,
                             const Eigen::VectorXd& eta);
IsotonicFit profile_isotonic(const Dataset& d, const Eigen::VectorXd& residuals_sq,
                             const Eigen::VectorXd& eta);

/// || n^{-1} sum X_i (u_i^2 - sigma_eta^2(X_i'eta)) ||^2.
double score_objective(const Eigen::MatrixXd& het,
                       const Eigen::VectorXd& residuals_sq,
                       const Eigen::VectorXd& eta);
double score_objective(const Dataset& d, const Eigen::VectorXd& residuals_sq,
                       const Eigen::VectorXd& eta);

/// Multistart Nelder-Mead over the unit sphere in ambient coordinates.
IndexFit estimate_index(const Eigen::MatrixXd& het,
                        const Eigen::VectorXd& residuals_sq,
                        const IndexOptions& opts = {});
IndexFit estimate_index(const Dataset& d, const Eigen::VectorXd& residuals_sq,
                        const IndexOptions& opts = {});

struct IndexMglsFit {
  MglsFit mgls;
  IndexFit index;
};

/// Trimmed GLS with single-index variance weights. With one het column the
/// sphere is {-1, +1} and the fit coincides with fit_mgls.
IndexMglsFit fit_mgls_index(const Dataset& d, const MglsOptions& mgls = {},
                            const IndexOptions& opts = {});

nlohmann::json to_json(const IndexFit& fit);

}  // namespace monogls
