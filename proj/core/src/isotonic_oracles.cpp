#include "monogls/isotonic_oracles.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#include "monogls/error.hpp"

namespace monogls::oracle {

double gcm_left_derivative(std::span<const double> cumsum_x,
                           std::span<const double> cumsum_y, std::size_t t) {
  const std::size_t m = cumsum_x.size();
  if (m != cumsum_y.size() || m < 2) {
    throw Error(ErrorKind::size, "cumulative sum diagram needs matching points");
  }
  if (t < 1 || t >= m) throw Error(ErrorKind::index, "diagram index out of range");

  // Lower hull by Andrew's monotone chain; abscissae are strictly increasing.
  std::vector<std::size_t> hull;
  auto cross = [&](std::size_t o, std::size_t a, std::size_t b) {
    return (cumsum_x[a] - cumsum_x[o]) * (cumsum_y[b] - cumsum_y[o]) -
           (cumsum_y[a] - cumsum_y[o]) * (cumsum_x[b] - cumsum_x[o]);
  };
  for (std::size_t j = 0; j < m; ++j) {
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), j) <= 0.0) {
      hull.pop_back();
    }
    hull.push_back(j);
  }
  // Hull segment whose right end is the first hull vertex at or past t.
  auto right = std::lower_bound(hull.begin(), hull.end(), t);
  const std::size_t b = *right;
  const std::size_t a = *(right - 1);
  return (cumsum_y[b] - cumsum_y[a]) / (cumsum_x[b] - cumsum_x[a]);
}

double minmax_value(std::span<const double> x, std::span<const double> y, std::size_t i) {
  const std::size_t n = y.size();
  if (x.size() != n) throw Error(ErrorKind::size, "x and y differ in length");
  if (i < 1 || i > n) throw Error(ErrorKind::index, "min-max index out of range");
  for (std::size_t j = 1; j < n; ++j) {
    if (!(x[j - 1] < x[j])) {
      throw Error(ErrorKind::value, "min-max oracle needs strictly sorted x");
    }
  }
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) prefix[j + 1] = prefix[j] + y[j];
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 1; s <= i; ++s) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t t = i; t <= n; ++t) {
      worst = std::min(worst, (prefix[t] - prefix[s - 1]) / static_cast<double>(t - s + 1));
    }
    best = std::max(best, worst);
  }
  return best;
}

}  // namespace monogls::oracle
