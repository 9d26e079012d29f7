#pragma once

#include <cstdint>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "monogls/dataset.hpp"

namespace monogls {

enum class FitKind { ols, tsls, wls };

const char* to_string(FitKind kind) noexcept;

/// A linear fit. For ols/tsls, covariances.model_based holds the classical
/// covariance and covariances.sandwich the heteroskedasticity-robust one.
struct LinearFit {
  Coefficients coefficients;
  Eigen::VectorXd residuals;
  Eigen::VectorXd fitted;
  CovarianceSet covariances;
  FitKind kind = FitKind::ols;
  Eigen::Index nobs = 0;
};

enum class RobustFlavor { hc0, hc1 };

/// Least squares through column-pivoted QR. Fills both classical and HC0
/// covariances when n > k.
LinearFit ols(const Dataset& d);

/// s^2 (W'W)^{-1} with s^2 = sum(u^2) / (n - k).
Eigen::MatrixXd cov_classical(const LinearFit& fit, const Dataset& d);

/// (W'W)^{-1} (sum u_i^2 W_i W_i') (W'W)^{-1}; hc1 scales by n / (n - k).
Eigen::MatrixXd cov_hc_robust(const LinearFit& fit, const Dataset& d,
                              RobustFlavor flavor = RobustFlavor::hc0);

struct BootstrapResult {
  Eigen::MatrixXd draws;  // B x k
  Eigen::VectorXd lower;  // 2.5% percentile per coefficient
  Eigen::VectorXd upper;  // 97.5% percentile per coefficient
};

/// Rademacher wild bootstrap: y* = fitted + v_i u_i, refit, percentile 95%
/// intervals. Replicate b draws its multipliers from stream(seed, b).
BootstrapResult wild_bootstrap(const LinearFit& fit, const Dataset& d, int B,
                               std::uint64_t seed);

/// Two-stage least squares. `instruments` holds the excluded instruments
/// that stand in for the X block; the intercept and Z controls instrument
/// themselves.
LinearFit tsls(const Dataset& d, const Eigen::MatrixXd& instruments);

/// Empirical quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double prob);

nlohmann::json to_json(const LinearFit& fit);

}  // namespace monogls
