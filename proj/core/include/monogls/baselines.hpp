#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "monogls/dataset.hpp"
#include "monogls/linreg.hpp"
#include "monogls/mgls.hpp"

namespace monogls {

enum class VarianceKind { known, parametric, knn };

const char* to_string(VarianceKind kind) noexcept;

struct VarianceModel {
  VarianceKind kind = VarianceKind::known;
  std::size_t k = 0;       // knn only
  bool k_automatic = false;
  /// (k, leave-one-out criterion) for every grid point when k was selected.
  std::vector<std::pair<std::size_t, double>> cv_scores;
  Eigen::VectorXd fitted_values;  // per-observation variance after flooring
};

struct WeightedFit {
  LinearFit linear;  // kind wls; covariances.model_based = (sum w_i W_i W_i')^{-1}
  VarianceModel variance;
};

/// Weighted least squares with the true variances.
WeightedFit fit_infeasible_gls(const Dataset& d, const Eigen::VectorXd& sigma2_true);

/// OLS of u^2 on the basis, floored fitted values as variances.
WeightedFit fit_fgls_parametric(const Dataset& d, const Eigen::MatrixXd& basis,
                                const VarianceFloor& floor = {});

struct KnnOptions {
  std::optional<std::size_t> k;        // empty selects k by cross-validation
  std::vector<std::size_t> cv_grid;    // empty uses default_knn_grid(n)
  VarianceFloor floor;
};

/// Nearest-neighbor average of u^2 on standardized het covariates.
WeightedFit fit_fgls_knn(const Dataset& d, const KnnOptions& opts = {});

/// {4, 6, 8, ..., min(ceil(n/2), 40)}.
std::vector<std::size_t> default_knn_grid(std::size_t n);

/// Columns 1, h_j, and h_j h_l (j <= l) of the het matrix.
Eigen::MatrixXd quadratic_basis(const Eigen::MatrixXd& het);

/// Weighted least squares of d with the given per-row weights.
LinearFit weighted_least_squares(const Dataset& d, const Eigen::VectorXd& weights);

nlohmann::json to_json(const WeightedFit& fit);

}  // namespace monogls
