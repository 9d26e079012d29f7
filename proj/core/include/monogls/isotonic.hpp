#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace monogls {

enum class Direction { increasing, decreasing };

const char* to_string(Direction d) noexcept;

/// Piecewise-constant monotone step function fitted by PAVA.
struct IsotonicFit {
  std::vector<double> knots;          // strictly increasing unique x values
  std::vector<double> levels;         // fitted value at each knot
  std::vector<double> block_weights;  // summed observation weight per knot
  Direction direction = Direction::increasing;

  std::size_t size() const { return knots.size(); }
  bool empty() const { return knots.empty(); }
};

/// Weighted least-squares monotone regression of y on x.
///
/// Observations sharing an x value are merged into one knot (weight-summed,
/// weight-averaged) before pooling. The decreasing fit is computed as the
/// negated increasing fit of -y. An empty weight span means unit weights.
IsotonicFit pava(std::span<const double> x, std::span<const double> y,
                 std::span<const double> w = {},
                 Direction direction = Direction::increasing);

/// Fits both directions and keeps the smaller weighted residual sum of
/// squares; ties go to increasing.
IsotonicFit pava_auto(std::span<const double> x, std::span<const double> y,
                      std::span<const double> w = {});

/// Value of the largest knot <= x0; queries below the first knot return the
/// first level.
double evaluate(const IsotonicFit& fit, double x0);
std::vector<double> evaluate(const IsotonicFit& fit, std::span<const double> x);

/// Weighted residual sum of squares of the fit at the sample points.
double residual_sum_of_squares(const IsotonicFit& fit, std::span<const double> x,
                               std::span<const double> y,
                               std::span<const double> w = {});

nlohmann::json to_json(const IsotonicFit& fit);

}  // namespace monogls
