#include "monogls/linreg.hpp"

#include <algorithm>
#include <cmath>

#include "linalg.hpp"
#include "monogls/error.hpp"
#include "monogls/rng.hpp"

namespace monogls {

const char* to_string(FitKind kind) noexcept {
  switch (kind) {
    case FitKind::ols: return "ols";
    case FitKind::tsls: return "tsls";
    case FitKind::wls: return "wls";
  }
  return "unknown";
}

namespace {

Eigen::MatrixXd hc_sandwich(const Eigen::MatrixXd& X, const Eigen::MatrixXd& bread,
                            const Eigen::VectorXd& residuals) {
  const Eigen::MatrixXd meat = detail::weighted_gram(X, residuals.array().square().matrix());
  return detail::symmetrize(bread * meat * bread);
}

void check_dof(Eigen::Index n, Eigen::Index k) {
  if (n <= k) {
    throw Error(ErrorKind::degrees_of_freedom,
                "need more observations (" + std::to_string(n) + ") than coefficients (" +
                    std::to_string(k) + ")");
  }
}

}  // namespace

LinearFit ols(const Dataset& d) {
  const Eigen::MatrixXd W = detail::raw_design(d);
  const detail::Qr qr = detail::full_rank_qr(W, "OLS design");
  LinearFit fit;
  fit.kind = FitKind::ols;
  fit.nobs = d.n();
  fit.coefficients = {qr.solve(d.y()), d.coefficient_names()};
  fit.fitted = W * fit.coefficients.theta;
  fit.residuals = d.y() - fit.fitted;
  if (d.n() > d.k()) {
    const Eigen::MatrixXd bread = detail::gram_inverse(qr);
    const double s2 = fit.residuals.squaredNorm() / static_cast<double>(d.n() - d.k());
    fit.covariances.model_based = s2 * bread;
    fit.covariances.sandwich = hc_sandwich(W, bread, fit.residuals);
  }
  return fit;
}

Eigen::MatrixXd cov_classical(const LinearFit& fit, const Dataset& d) {
  check_dof(d.n(), d.k());
  const detail::Qr qr = detail::full_rank_qr(detail::raw_design(d), "OLS design");
  const double s2 = fit.residuals.squaredNorm() / static_cast<double>(d.n() - d.k());
  return s2 * detail::gram_inverse(qr);
}

Eigen::MatrixXd cov_hc_robust(const LinearFit& fit, const Dataset& d, RobustFlavor flavor) {
  check_dof(d.n(), d.k());
  const Eigen::MatrixXd W = detail::raw_design(d);
  const detail::Qr qr = detail::full_rank_qr(W, "OLS design");
  Eigen::MatrixXd V = hc_sandwich(W, detail::gram_inverse(qr), fit.residuals);
  if (flavor == RobustFlavor::hc1) {
    V *= static_cast<double>(d.n()) / static_cast<double>(d.n() - d.k());
  }
  return V;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw Error(ErrorKind::size, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BootstrapResult wild_bootstrap(const LinearFit& fit, const Dataset& d, int B,
                               std::uint64_t seed) {
  if (B < 1) throw Error(ErrorKind::parameter, "bootstrap replicate count must be >= 1");
  const Eigen::MatrixXd W = detail::raw_design(d);
  const detail::Qr qr = detail::full_rank_qr(W, "OLS design");
  // theta* = theta + (W'W)^{-1} W' (v .* u): one projection serves every draw.
  const Eigen::MatrixXd projector = detail::gram_inverse(qr) * W.transpose();
  const Eigen::Index k = W.cols();

  BootstrapResult out;
  out.draws.resize(B, k);
  Eigen::VectorXd vu(d.n());
  for (int b = 0; b < B; ++b) {
    Rng rng = stream(seed, static_cast<std::uint64_t>(b));
    std::bernoulli_distribution coin(0.5);
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      vu(i) = coin(rng) ? fit.residuals(i) : -fit.residuals(i);
    }
    out.draws.row(b) = (fit.coefficients.theta + projector * vu).transpose();
  }
  out.lower.resize(k);
  out.upper.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    std::vector<double> col(out.draws.col(j).data(), out.draws.col(j).data() + B);
    out.lower(j) = quantile(col, 0.025);
    out.upper(j) = quantile(std::move(col), 0.975);
  }
  return out;
}

LinearFit tsls(const Dataset& d, const Eigen::MatrixXd& instruments) {
  if (instruments.rows() != d.n()) {
    throw Error(ErrorKind::size, "instrument matrix has the wrong number of rows");
  }
  if (instruments.cols() < d.p()) {
    throw Error(ErrorKind::rank, "under-identified: " + std::to_string(instruments.cols()) +
                                     " instruments for " + std::to_string(d.p()) +
                                     " endogenous regressors");
  }
  const Eigen::MatrixXd W = detail::raw_design(d);
  const Eigen::Index exog = d.intercept() ? 1 : 0;
  Eigen::MatrixXd Zfull(d.n(), exog + instruments.cols() + d.q());
  if (exog) Zfull.col(0).setOnes();
  Zfull.middleCols(exog, instruments.cols()) = instruments;
  Zfull.rightCols(d.q()) = d.z();

  detail::Qr zqr = [&] {
    try {
      return detail::full_rank_qr(Zfull, "instrument matrix");
    } catch (const Error& e) {
      throw Error(ErrorKind::rank, e.what());
    }
  }();
  const Eigen::MatrixXd What = Zfull * zqr.solve(W);  // P_Z W
  detail::Qr wqr = [&] {
    try {
      return detail::full_rank_qr(What, "first-stage projection");
    } catch (const Error& e) {
      throw Error(ErrorKind::rank, e.what());
    }
  }();

  LinearFit fit;
  fit.kind = FitKind::tsls;
  fit.nobs = d.n();
  fit.coefficients = {wqr.solve(d.y()), d.coefficient_names()};
  fit.fitted = W * fit.coefficients.theta;
  fit.residuals = d.y() - fit.fitted;
  if (d.n() > d.k()) {
    const Eigen::MatrixXd bread = detail::gram_inverse(wqr);
    const double s2 = fit.residuals.squaredNorm() / static_cast<double>(d.n() - d.k());
    fit.covariances.model_based = s2 * bread;
    fit.covariances.sandwich = hc_sandwich(What, bread, fit.residuals);
  }
  return fit;
}

namespace {

std::vector<double> diag_sqrt(const std::optional<Eigen::MatrixXd>& m) {
  std::vector<double> out;
  if (m) {
    for (Eigen::Index j = 0; j < m->rows(); ++j) out.push_back(std::sqrt((*m)(j, j)));
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const LinearFit& fit) {
  return {{"kind", to_string(fit.kind)},
          {"coefficients", to_json(fit.coefficients)},
          {"se",
           {{"classical", diag_sqrt(fit.covariances.model_based)},
            {"robust", diag_sqrt(fit.covariances.sandwich)}}},
          {"nobs", fit.nobs}};
}

}  // namespace monogls
