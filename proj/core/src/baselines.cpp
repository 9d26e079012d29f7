#include "monogls/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "linalg.hpp"
#include "monogls/error.hpp"

namespace monogls {

const char* to_string(VarianceKind kind) noexcept {
  switch (kind) {
    case VarianceKind::known: return "known";
    case VarianceKind::parametric: return "parametric";
    case VarianceKind::knn: return "knn";
  }
  return "unknown";
}

LinearFit weighted_least_squares(const Dataset& d, const Eigen::VectorXd& weights) {
  if (weights.size() != d.n()) throw Error(ErrorKind::size, "weights have the wrong length");
  const Eigen::MatrixXd W = detail::raw_design(d);
  const detail::WeightedSolve solve = detail::weighted_solve(W, d.y(), weights, "weighted design");
  LinearFit fit;
  fit.kind = FitKind::wls;
  fit.nobs = d.n();
  fit.coefficients = {solve.coef, d.coefficient_names()};
  fit.fitted = W * solve.coef;
  fit.residuals = d.y() - fit.fitted;
  fit.covariances.model_based = solve.gram_inverse;
  const Eigen::VectorXd meat_w =
      (weights.array().square() * fit.residuals.array().square()).matrix();
  fit.covariances.sandwich = detail::symmetrize(
      solve.gram_inverse * detail::weighted_gram(W, meat_w) * solve.gram_inverse);
  return fit;
}

WeightedFit fit_infeasible_gls(const Dataset& d, const Eigen::VectorXd& sigma2_true) {
  if (sigma2_true.size() != d.n()) throw Error(ErrorKind::size, "variance vector has the wrong length");
  if (!sigma2_true.allFinite() || (sigma2_true.array() <= 0.0).any()) {
    throw Error(ErrorKind::value, "true variances must be finite and positive");
  }
  WeightedFit out;
  out.variance.kind = VarianceKind::known;
  out.variance.fitted_values = sigma2_true;
  out.linear = weighted_least_squares(d, sigma2_true.cwiseInverse());
  return out;
}

WeightedFit fit_fgls_parametric(const Dataset& d, const Eigen::MatrixXd& basis,
                                const VarianceFloor& floor) {
  if (basis.rows() != d.n()) throw Error(ErrorKind::size, "basis has the wrong number of rows");
  const LinearFit first = ols(d);
  const Eigen::VectorXd rsq = first.residuals.array().square();
  const detail::Qr qr = detail::full_rank_qr(basis, "variance basis");
  const Eigen::VectorXd predicted = basis * qr.solve(rsq);

  WeightedFit out;
  out.variance.kind = VarianceKind::parametric;
  out.variance.fitted_values = detail::floor_variance(predicted, rsq.mean(), floor);
  out.linear = weighted_least_squares(d, out.variance.fitted_values.cwiseInverse());
  return out;
}

std::vector<std::size_t> default_knn_grid(std::size_t n) {
  const std::size_t top = std::min<std::size_t>((n + 1) / 2, 40);
  std::vector<std::size_t> grid;
  for (std::size_t k = 4; k <= top; k += 2) grid.push_back(k);
  return grid;
}

namespace {

/// For each row, the other rows ordered by standardized Euclidean distance
/// (ties by index), truncated to `depth`.
std::vector<std::vector<Eigen::Index>> neighbor_lists(const Eigen::MatrixXd& het,
                                                      std::size_t depth) {
  const Eigen::Index n = het.rows();
  Eigen::MatrixXd s = het;
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    const double mean = s.col(j).mean();
    const double sd = std::sqrt((s.col(j).array() - mean).square().sum() /
                                static_cast<double>(n - 1));
    if (!(sd > 0.0)) {
      throw Error(ErrorKind::degenerate_covariate, "k-NN variance covariate is constant");
    }
    s.col(j) = (s.col(j).array() - mean) / sd;
  }
  depth = std::min<std::size_t>(depth, static_cast<std::size_t>(n - 1));
  std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(n));
  std::vector<std::pair<double, Eigen::Index>> dist;
  dist.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    dist.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) dist.emplace_back((s.row(j) - s.row(i)).squaredNorm(), j);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(depth),
                      dist.end());
    auto& list = out[static_cast<std::size_t>(i)];
    list.reserve(depth);
    for (std::size_t r = 0; r < depth; ++r) list.push_back(dist[r].second);
  }
  return out;
}

}  // namespace

WeightedFit fit_fgls_knn(const Dataset& d, const KnnOptions& opts) {
  if (d.het_cols().empty()) throw Error(ErrorKind::schema, "k-NN needs a variance covariate");
  const auto n = static_cast<std::size_t>(d.n());
  const LinearFit first = ols(d);
  const Eigen::VectorXd rsq = first.residuals.array().square();

  WeightedFit out;
  out.variance.kind = VarianceKind::knn;
  std::size_t k = 0;
  std::vector<std::vector<Eigen::Index>> nbrs;

  if (opts.k) {
    k = *opts.k;
    if (k < 1 || k > n) throw Error(ErrorKind::parameter, "k must lie in [1, n]");
    nbrs = neighbor_lists(d.het_matrix(), k - 1);
  } else {
    const std::vector<std::size_t> grid =
        opts.cv_grid.empty() ? default_knn_grid(n) : opts.cv_grid;
    if (grid.empty()) throw Error(ErrorKind::parameter, "k-NN cross-validation grid is empty");
    for (std::size_t g : grid) {
      if (g < 1 || g >= n) throw Error(ErrorKind::parameter, "grid value outside [1, n-1]");
    }
    nbrs = neighbor_lists(d.het_matrix(), *std::max_element(grid.begin(), grid.end()));
    out.variance.k_automatic = true;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t g : grid) {
      double crit = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t r = 0; r < g; ++r) sum += rsq(nbrs[i][r]);
        const double e = rsq(static_cast<Eigen::Index>(i)) - sum / static_cast<double>(g);
        crit += e * e;
      }
      out.variance.cv_scores.emplace_back(g, crit);
      if (crit < best || (crit == best && g < k)) {
        best = crit;
        k = g;
      }
    }
  }
  out.variance.k = k;

  Eigen::VectorXd sigma2(d.n());
  for (std::size_t i = 0; i < n; ++i) {
    double sum = rsq(static_cast<Eigen::Index>(i));
    for (std::size_t r = 0; r + 1 < k; ++r) sum += rsq(nbrs[i][r]);
    sigma2(static_cast<Eigen::Index>(i)) = sum / static_cast<double>(k);
  }
  out.variance.fitted_values = detail::floor_variance(std::move(sigma2), rsq.mean(), opts.floor);
  out.linear = weighted_least_squares(d, out.variance.fitted_values.cwiseInverse());
  return out;
}

Eigen::MatrixXd quadratic_basis(const Eigen::MatrixXd& het) {
  const Eigen::Index h = het.cols();
  Eigen::MatrixXd B(het.rows(), 1 + h + h * (h + 1) / 2);
  B.col(0).setOnes();
  B.middleCols(1, h) = het;
  Eigen::Index c = 1 + h;
  for (Eigen::Index j = 0; j < h; ++j) {
    for (Eigen::Index l = j; l < h; ++l) B.col(c++) = het.col(j).cwiseProduct(het.col(l));
  }
  return B;
}

nlohmann::json to_json(const WeightedFit& fit) {
  nlohmann::json j = to_json(fit.linear);
  nlohmann::json vm = {{"kind", to_string(fit.variance.kind)}};
  if (fit.variance.kind == VarianceKind::knn) {
    vm["k"] = fit.variance.k;
    vm["k_automatic"] = fit.variance.k_automatic;
  }
  j["variance_model"] = std::move(vm);
  return j;
}

}  // namespace monogls
