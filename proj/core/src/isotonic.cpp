#include "monogls/isotonic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "monogls/error.hpp"

namespace monogls {

const char* to_string(Direction d) noexcept {
  return d == Direction::increasing ? "increasing" : "decreasing";
}

namespace {

void validate(std::span<const double> x, std::span<const double> y,
              std::span<const double> w) {
  if (x.empty()) throw Error(ErrorKind::size, "isotonic regression of an empty sample");
  if (x.size() != y.size() || (!w.empty() && w.size() != x.size())) {
    throw Error(ErrorKind::size, "isotonic regression inputs differ in length");
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw Error(ErrorKind::value, "isotonic regression input is not finite");
    }
    if (!w.empty() && !(w[i] > 0.0 && std::isfinite(w[i]))) {
      throw Error(ErrorKind::value, "isotonic regression weights must be positive");
    }
  }
}

IsotonicFit pava_increasing(std::span<const double> x, std::span<const double> y,
                            std::span<const double> w, double sign) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

  // Merge ties into knots.
  IsotonicFit fit;
  std::vector<double> knot_mean;
  for (std::size_t idx : order) {
    const double wi = w.empty() ? 1.0 : w[idx];
    const double yi = sign * y[idx];
    if (!fit.knots.empty() && fit.knots.back() == x[idx]) {
      fit.block_weights.back() += wi;
      knot_mean.back() += wi * yi;
    } else {
      fit.knots.push_back(x[idx]);
      fit.block_weights.push_back(wi);
      knot_mean.push_back(wi * yi);
    }
  }
  const std::size_t m = fit.knots.size();
  for (std::size_t j = 0; j < m; ++j) knot_mean[j] /= fit.block_weights[j];

  // Stack of pooled blocks: weighted mean, weight, number of knots.
  struct Block {
    double mean;
    double weight;
    std::size_t len;
  };
  std::vector<Block> stack;
  stack.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    Block b{knot_mean[j], fit.block_weights[j], 1};
    while (!stack.empty() && stack.back().mean > b.mean) {
      const Block& top = stack.back();
      const double wsum = top.weight + b.weight;
      b.mean = (top.weight * top.mean + b.weight * b.mean) / wsum;
      b.weight = wsum;
      b.len += top.len;
      stack.pop_back();
    }
    stack.push_back(b);
  }

  fit.levels.reserve(m);
  for (const Block& b : stack) fit.levels.insert(fit.levels.end(), b.len, sign * b.mean);
  return fit;
}

}  // namespace

IsotonicFit pava(std::span<const double> x, std::span<const double> y,
                 std::span<const double> w, Direction direction) {
  validate(x, y, w);
  const double sign = direction == Direction::increasing ? 1.0 : -1.0;
  IsotonicFit fit = pava_increasing(x, y, w, sign);
  fit.direction = direction;
  return fit;
}

IsotonicFit pava_auto(std::span<const double> x, std::span<const double> y,
                      std::span<const double> w) {
  IsotonicFit up = pava(x, y, w, Direction::increasing);
  IsotonicFit down = pava(x, y, w, Direction::decreasing);
  return residual_sum_of_squares(down, x, y, w) < residual_sum_of_squares(up, x, y, w) ? down
                                                                                        : up;
}

double evaluate(const IsotonicFit& fit, double x0) {
  if (fit.empty()) throw Error(ErrorKind::size, "evaluating an empty isotonic fit");
  auto it = std::upper_bound(fit.knots.begin(), fit.knots.end(), x0);
  if (it == fit.knots.begin()) return fit.levels.front();
  return fit.levels[static_cast<std::size_t>(it - fit.knots.begin()) - 1];
}

std::vector<double> evaluate(const IsotonicFit& fit, std::span<const double> x) {
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(),
                 [&](double v) { return evaluate(fit, v); });
  return out;
}

double residual_sum_of_squares(const IsotonicFit& fit, std::span<const double> x,
                               std::span<const double> y, std::span<const double> w) {
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - evaluate(fit, x[i]);
    sse += (w.empty() ? 1.0 : w[i]) * r * r;
  }
  return sse;
}

nlohmann::json to_json(const IsotonicFit& fit) {
  return {{"direction", to_string(fit.direction)},
          {"knots", fit.knots},
          {"levels", fit.levels},
          {"block_weights", fit.block_weights}};
}

}  // namespace monogls
