#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "monogls/dataset.hpp"
#include "monogls/isotonic.hpp"
#include "monogls/linreg.hpp"

namespace monogls {

/// Boundary trimming at the c * n^(-1/3) sample quantile, realized as the
/// index(n)-th order statistic with index(n) = max(1, ceil(c * n^(2/3))).
struct TrimRule {
  double c = 1.0;

  double level(std::size_t n) const;
  std::size_t index(std::size_t n) const;
};

enum class DirectionChoice { increasing, decreasing, automatic };

const char* to_string(DirectionChoice d) noexcept;
DirectionChoice parse_direction(const std::string& s);

/// Floors estimated variances at ratio * mean(u^2) before inversion.
struct VarianceFloor {
  bool enabled = true;
  double ratio = 0.04;
};

struct MglsOptions {
  TrimRule trim;
  DirectionChoice direction = DirectionChoice::automatic;
  VarianceFloor floor;
};

/// Which tail of the trimming covariate is discarded. An increasing variance
/// function is trimmed at the bottom; a decreasing one mirrors that and is
/// trimmed at the top.
enum class TrimSide { lower, upper };

struct GroupVariance {
  double label = 0.0;
  IsotonicFit fit;
  Direction direction = Direction::increasing;
  TrimSide side = TrimSide::lower;
  double q_n = 0.0;
  std::size_t n = 0;
  std::size_t n_kept = 0;
};

struct MglsFit {
  Coefficients coefficients;
  /// Trimming threshold on the trimming covariate (NaN for grouped fits,
  /// whose thresholds live in `groups`).
  double q_n = 0.0;
  TrimSide side = TrimSide::lower;
  std::vector<bool> kept;
  std::size_t n_kept = 0;
  /// Floored variance estimate at every observation.
  Eigen::VectorXd sigma2;
  /// 1 / sigma2 on kept rows, in row order.
  Eigen::VectorXd weights;
  IsotonicFit variance_fit;
  Direction direction = Direction::increasing;
  CovarianceSet covariances;
  LinearFit first_stage;
  std::vector<GroupVariance> groups;
};

/// Isotonic regression of squared residuals on a univariate covariate.
/// `automatic` fits both directions and keeps the smaller residual sum of
/// squares, ties going to increasing.
IsotonicFit fit_variance(const Eigen::VectorXd& covariate,
                         const Eigen::VectorXd& residuals_sq,
                         DirectionChoice direction);
IsotonicFit fit_variance(const Dataset& d, const Eigen::VectorXd& residuals_sq,
                         DirectionChoice direction);

/// OLS -> isotonic variance -> trimmed weighted least squares.
MglsFit fit_mgls(const Dataset& d, const MglsOptions& opts = {});

/// bread^{-1} meat bread^{-1} with bread = sum sigma_i^{-2} W_i W_i' and
/// meat = sum sigma_i^{-4} u_i^2 W_i W_i' over all observations.
Eigen::MatrixXd sandwich_covariance(const MglsFit& fit, const Dataset& d);

/// Group-wise isotonic variance fits and thresholds, pooled weighted solve.
MglsFit fit_mgls_grouped(const Dataset& d, const Eigen::VectorXd& group,
                         const MglsOptions& opts = {});

nlohmann::json to_json(const MglsFit& fit);

namespace detail {

/// Sorted-order threshold and kept mask for the trimming covariate.
struct Trim {
  double q_n = 0.0;
  std::vector<bool> kept;
  std::size_t n_kept = 0;
};
Trim trim_covariate(const Eigen::VectorXd& t, const TrimRule& rule, TrimSide side);

/// Applies the floor; values are returned unchanged when disabled.
Eigen::VectorXd floor_variance(Eigen::VectorXd sigma2, double mean_resid_sq,
                               const VarianceFloor& floor);

/// Trimmed weighted solve plus model-based and sandwich covariances. Fills
/// coefficients, kept, n_kept, weights, sigma2 and covariances of `out`.
void trimmed_gls(const Eigen::MatrixXd& W, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& sigma2, const std::vector<bool>& kept,
                 const Eigen::VectorXd& residuals, MglsFit& out);

}  // namespace detail

}  // namespace monogls
