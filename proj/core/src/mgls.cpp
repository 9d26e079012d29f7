#include "monogls/mgls.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "linalg.hpp"
#include "monogls/error.hpp"

namespace monogls {

double TrimRule::level(std::size_t n) const {
  return c / std::cbrt(static_cast<double>(n));
}

std::size_t TrimRule::index(std::size_t n) const {
  if (!(c > 0.0)) throw Error(ErrorKind::parameter, "trim constant must be positive");
  const double root = std::cbrt(static_cast<double>(n));
  // Guard against cbrt rounding pushing perfect cubes past an integer.
  const double v = c * root * root * (1.0 - 1e-12);
  const auto k = static_cast<std::size_t>(std::max(1.0, std::ceil(v)));
  return std::min(k, std::max<std::size_t>(n, 1));
}

const char* to_string(DirectionChoice d) noexcept {
  switch (d) {
    case DirectionChoice::increasing: return "increasing";
    case DirectionChoice::decreasing: return "decreasing";
    case DirectionChoice::automatic: return "auto";
  }
  return "unknown";
}

DirectionChoice parse_direction(const std::string& s) {
  if (s == "increasing") return DirectionChoice::increasing;
  if (s == "decreasing") return DirectionChoice::decreasing;
  if (s == "auto") return DirectionChoice::automatic;
  throw Error(ErrorKind::parameter, "unknown direction: " + s);
}

namespace {

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

Eigen::VectorXd evaluate_at(const IsotonicFit& fit, const Eigen::VectorXd& x) {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = evaluate(fit, x(i));
  return out;
}

TrimSide side_for(Direction d) {
  return d == Direction::increasing ? TrimSide::lower : TrimSide::upper;
}

const char* to_string(TrimSide s) {
  return s == TrimSide::lower ? "lower" : "upper";
}

}  // namespace

IsotonicFit fit_variance(const Eigen::VectorXd& covariate,
                         const Eigen::VectorXd& residuals_sq, DirectionChoice direction) {
  if (covariate.size() != residuals_sq.size()) {
    throw Error(ErrorKind::size, "covariate and squared residuals differ in length");
  }
  if (covariate.size() == 0) throw Error(ErrorKind::size, "empty variance covariate");
  if ((residuals_sq.array() < 0.0).any()) {
    throw Error(ErrorKind::value, "squared residuals must be nonnegative");
  }
  if (covariate.maxCoeff() == covariate.minCoeff()) {
    throw Error(ErrorKind::degenerate_covariate, "variance covariate is constant");
  }
  const auto x = as_span(covariate);
  const auto y = as_span(residuals_sq);
  switch (direction) {
    case DirectionChoice::increasing: return pava(x, y, {}, Direction::increasing);
    case DirectionChoice::decreasing: return pava(x, y, {}, Direction::decreasing);
    case DirectionChoice::automatic: break;
  }
  return pava_auto(x, y);
}

IsotonicFit fit_variance(const Dataset& d, const Eigen::VectorXd& residuals_sq,
                         DirectionChoice direction) {
  return fit_variance(d.het_vector(), residuals_sq, direction);
}

namespace detail {

Trim trim_covariate(const Eigen::VectorXd& t, const TrimRule& rule, TrimSide side) {
  const auto n = static_cast<std::size_t>(t.size());
  const std::size_t k = rule.index(n);
  std::vector<double> sorted(t.data(), t.data() + t.size());
  Trim out;
  if (side == TrimSide::lower) {
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     sorted.end());
    out.q_n = sorted[k - 1];
  } else {
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n - k),
                     sorted.end());
    out.q_n = sorted[n - k];
  }
  out.kept.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = t(static_cast<Eigen::Index>(i));
    out.kept[i] = side == TrimSide::lower ? v >= out.q_n : v <= out.q_n;
    out.n_kept += out.kept[i];
  }
  return out;
}

Eigen::VectorXd floor_variance(Eigen::VectorXd sigma2, double mean_resid_sq,
                               const VarianceFloor& floor) {
  if (floor.enabled) {
    sigma2 = sigma2.cwiseMax(floor.ratio * mean_resid_sq);
  }
  if (!((sigma2.array() > 0.0).all() && sigma2.allFinite())) {
    throw Error(ErrorKind::value,
                "variance estimate is not strictly positive; residuals are degenerate or "
                "the variance floor is disabled");
  }
  return sigma2;
}

void trimmed_gls(const Eigen::MatrixXd& W, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& sigma2, const std::vector<bool>& kept,
                 const Eigen::VectorXd& residuals, MglsFit& out) {
  const Eigen::Index n = W.rows();
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (kept[static_cast<std::size_t>(i)]) rows.push_back(i);
  }
  const auto m = static_cast<Eigen::Index>(rows.size());
  if (m < W.cols()) {
    throw Error(ErrorKind::insufficient_data,
                "only " + std::to_string(m) + " rows survive trimming for " +
                    std::to_string(W.cols()) + " coefficients");
  }
  Eigen::MatrixXd Wk(m, W.cols());
  Eigen::VectorXd yk(m), wk(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    Wk.row(r) = W.row(rows[r]);
    yk(r) = y(rows[r]);
    wk(r) = 1.0 / sigma2(rows[r]);
  }
  const WeightedSolve solve = weighted_solve(Wk, yk, wk, "trimmed weighted design");
  out.coefficients.theta = solve.coef;
  out.kept = kept;
  out.n_kept = static_cast<std::size_t>(m);
  out.weights = wk;
  out.sigma2 = sigma2;

  const Eigen::VectorXd inv = sigma2.cwiseInverse();
  const Eigen::MatrixXd bread_inv =
      weighted_solve(W, Eigen::VectorXd::Zero(n), inv, "weighted design").gram_inverse;
  const Eigen::VectorXd meat_w =
      (inv.array().square() * residuals.array().square()).matrix();
  out.covariances.model_based = bread_inv;
  out.covariances.sandwich =
      symmetrize(bread_inv * weighted_gram(W, meat_w) * bread_inv);
}

}  // namespace detail

MglsFit fit_mgls(const Dataset& d, const MglsOptions& opts) {
  if (d.het_cols().empty()) {
    throw Error(ErrorKind::schema, "MGLS needs a variance covariate");
  }
  const Eigen::VectorXd x = d.het_vector();
  MglsFit fit;
  fit.first_stage = ols(d);
  const Eigen::VectorXd rsq = fit.first_stage.residuals.array().square();
  fit.variance_fit = fit_variance(x, rsq, opts.direction);
  fit.direction = fit.variance_fit.direction;
  fit.side = side_for(fit.direction);

  Eigen::VectorXd sigma2 =
      detail::floor_variance(evaluate_at(fit.variance_fit, x), rsq.mean(), opts.floor);
  const detail::Trim trim = detail::trim_covariate(x, opts.trim, fit.side);
  fit.q_n = trim.q_n;
  fit.coefficients.names = d.coefficient_names();
  detail::trimmed_gls(detail::raw_design(d), d.y(), sigma2, trim.kept,
                      fit.first_stage.residuals, fit);
  return fit;
}

Eigen::MatrixXd sandwich_covariance(const MglsFit& fit, const Dataset& d) {
  const Eigen::MatrixXd W = detail::raw_design(d);
  if (fit.sigma2.size() != d.n() || fit.first_stage.residuals.size() != d.n()) {
    throw Error(ErrorKind::size, "fit does not belong to this dataset");
  }
  const Eigen::VectorXd inv = fit.sigma2.cwiseInverse();
  const Eigen::MatrixXd bread_inv =
      detail::weighted_solve(W, Eigen::VectorXd::Zero(d.n()), inv, "weighted design")
          .gram_inverse;
  const Eigen::VectorXd meat_w =
      (inv.array().square() * fit.first_stage.residuals.array().square()).matrix();
  return detail::symmetrize(bread_inv * detail::weighted_gram(W, meat_w) * bread_inv);
}

MglsFit fit_mgls_grouped(const Dataset& d, const Eigen::VectorXd& group,
                         const MglsOptions& opts) {
  if (group.size() != d.n()) throw Error(ErrorKind::size, "group column has the wrong length");
  if (!group.allFinite()) throw Error(ErrorKind::value, "group column is not finite");
  const Eigen::VectorXd x = d.het_vector();

  std::map<double, std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < d.n(); ++i) members[group(i)].push_back(i);

  MglsFit fit;
  fit.first_stage = ols(d);
  const Eigen::VectorXd rsq = fit.first_stage.residuals.array().square();
  Eigen::VectorXd sigma2(d.n());
  std::vector<bool> kept(static_cast<std::size_t>(d.n()), false);

  for (const auto& [label, rows] : members) {
    const auto ng = static_cast<Eigen::Index>(rows.size());
    const std::size_t need = std::max<std::size_t>(4, opts.trim.index(rows.size()));
    if (rows.size() < need) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%g", label);
      throw Error(ErrorKind::insufficient_data,
                  "group " + std::string(buf) + " has " + std::to_string(ng) +
                      " observations; need at least " + std::to_string(need));
    }
    Eigen::VectorXd xg(ng), rg(ng);
    for (Eigen::Index r = 0; r < ng; ++r) {
      xg(r) = x(rows[r]);
      rg(r) = rsq(rows[r]);
    }
    GroupVariance gv;
    gv.label = label;
    gv.fit = fit_variance(xg, rg, opts.direction);
    gv.direction = gv.fit.direction;
    gv.side = side_for(gv.direction);
    const detail::Trim trim = detail::trim_covariate(xg, opts.trim, gv.side);
    gv.q_n = trim.q_n;
    gv.n = rows.size();
    gv.n_kept = trim.n_kept;
    for (Eigen::Index r = 0; r < ng; ++r) {
      sigma2(rows[r]) = evaluate(gv.fit, xg(r));
      kept[static_cast<std::size_t>(rows[r])] = trim.kept[static_cast<std::size_t>(r)];
    }
    fit.groups.push_back(std::move(gv));
  }

  sigma2 = detail::floor_variance(std::move(sigma2), rsq.mean(), opts.floor);
  fit.coefficients.names = d.coefficient_names();
  if (fit.groups.size() == 1) {
    fit.variance_fit = fit.groups.front().fit;
    fit.q_n = fit.groups.front().q_n;
  } else {
    fit.q_n = std::numeric_limits<double>::quiet_NaN();
  }
  fit.direction = fit.groups.front().direction;
  fit.side = fit.groups.front().side;
  detail::trimmed_gls(detail::raw_design(d), d.y(), sigma2, kept,
                      fit.first_stage.residuals, fit);
  return fit;
}

namespace {

nlohmann::json std_errors(const std::optional<Eigen::MatrixXd>& m) {
  std::vector<double> se;
  if (m) {
    for (Eigen::Index j = 0; j < m->rows(); ++j) se.push_back(std::sqrt((*m)(j, j)));
  }
  return se;
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const MglsFit& fit) {
  nlohmann::json j = {{"coefficients", to_json(fit.coefficients)},
                      {"se_model", std_errors(fit.covariances.model_based)},
                      {"se_robust", std_errors(fit.covariances.sandwich)},
                      {"q_n", number_or_null(fit.q_n)},
                      {"n_kept", fit.n_kept},
                      {"trim_side", to_string(fit.side)},
                      {"direction", to_string(fit.direction)},
                      {"variance_fit", to_json(fit.variance_fit)}};
  if (fit.groups.size() > 1) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : fit.groups) {
      groups.push_back({{"label", g.label},
                        {"n", g.n},
                        {"n_kept", g.n_kept},
                        {"q_n", g.q_n},
                        {"direction", to_string(g.direction)},
                        {"variance_fit", to_json(g.fit)}});
    }
    j["groups"] = std::move(groups);
  }
  return j;
}

}  // namespace monogls
