#include "monogls/single_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "linalg.hpp"
#include "monogls/error.hpp"
#include "monogls/rng.hpp"

namespace monogls {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd unit(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorKind::parameter, "index direction has zero or non-finite norm");
  }
  return v / norm;
}

void check_shapes(const Eigen::MatrixXd& het, const Eigen::VectorXd& rsq,
                  const Eigen::VectorXd& eta) {
  if (het.rows() != rsq.size()) {
    throw Error(ErrorKind::size, "het covariates and squared residuals differ in length");
  }
  if (het.cols() != eta.size()) {
    throw Error(ErrorKind::size, "index direction does not match het covariate count");
  }
}

}  // namespace

IsotonicFit profile_isotonic(const Eigen::MatrixXd& het, const Eigen::VectorXd& residuals_sq,
                             const Eigen::VectorXd& eta) {
  check_shapes(het, residuals_sq, eta);
  const Eigen::VectorXd index = het * unit(eta);
  if (index.size() > 1 && index.maxCoeff() == index.minCoeff()) {
    throw Error(ErrorKind::degenerate_covariate, "index X'eta is constant");
  }
  return pava({index.data(), static_cast<std::size_t>(index.size())},
              {residuals_sq.data(), static_cast<std::size_t>(residuals_sq.size())}, {},
              Direction::increasing);
}

IsotonicFit profile_isotonic(const Dataset& d, const Eigen::VectorXd& residuals_sq,
                             const Eigen::VectorXd& eta) {
  return profile_isotonic(d.het_matrix(), residuals_sq, eta);
}

double score_objective(const Eigen::MatrixXd& het, const Eigen::VectorXd& residuals_sq,
                       const Eigen::VectorXd& eta) {
  const Eigen::VectorXd e = unit(eta);
  const IsotonicFit link = profile_isotonic(het, residuals_sq, e);
  const Eigen::VectorXd index = het * e;
  Eigen::VectorXd resid(index.size());
  for (Eigen::Index i = 0; i < index.size(); ++i) {
    resid(i) = residuals_sq(i) - evaluate(link, index(i));
  }
  const Eigen::VectorXd score = het.transpose() * resid / static_cast<double>(het.rows());
  return score.squaredNorm();
}

double score_objective(const Dataset& d, const Eigen::VectorXd& residuals_sq,
                       const Eigen::VectorXd& eta) {
  return score_objective(d.het_matrix(), residuals_sq, eta);
}

namespace {

struct SimplexResult {
  Eigen::VectorXd x;
  double f = kInf;
  int iterations = 0;
  bool converged = false;
};

// Nelder-Mead with standard coefficients (1, 2, 1/2, 1/2).
template <class F>
SimplexResult nelder_mead(F&& f, const Eigen::VectorXd& x0, double step, double tol,
                          int max_iter) {
  const Eigen::Index dim = x0.size();
  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(dim) + 1, x0);
  std::vector<double> vals(pts.size());
  for (Eigen::Index j = 0; j < dim; ++j) pts[static_cast<std::size_t>(j) + 1](j) += step;
  for (std::size_t j = 0; j < pts.size(); ++j) vals[j] = f(pts[j]);

  std::vector<std::size_t> order(pts.size());
  SimplexResult out;
  for (int it = 0;; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back();
    const std::size_t second = order[order.size() - 2];
    out.iterations = it;
    if (std::isfinite(vals[worst]) && vals[worst] - vals[best] <= tol) {
      out.converged = true;
      break;
    }
    if (it >= max_iter) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t j = 0; j + 1 < order.size(); ++j) centroid += pts[order[j]];
    centroid /= static_cast<double>(dim);

    const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = f(xr);
    if (fr < vals[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = f(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                       : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = f(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t j = 1; j < order.size(); ++j) {
      const std::size_t idx = order[j];
      pts[idx] = pts[best] + 0.5 * (pts[idx] - pts[best]);
      vals[idx] = f(pts[idx]);
    }
  }
  const std::size_t best = order.front();
  out.x = pts[best];
  out.f = vals[best];
  return out;
}

bool lexicographically_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                      b.data() + b.size());
}

}  // namespace

IndexFit estimate_index(const Eigen::MatrixXd& het, const Eigen::VectorXd& residuals_sq,
                        const IndexOptions& opts) {
  const Eigen::Index dim = het.cols();
  if (dim < 2) throw Error(ErrorKind::parameter, "index estimation needs >= 2 het covariates");
  if (het.rows() < 10) throw Error(ErrorKind::size, "index estimation needs n >= 10");
  if (het.rows() != residuals_sq.size()) {
    throw Error(ErrorKind::size, "het covariates and squared residuals differ in length");
  }
  if (opts.n_starts < 1) throw Error(ErrorKind::parameter, "n_starts must be >= 1");
  const int max_iter = opts.max_iter > 0 ? opts.max_iter : 500 * static_cast<int>(dim);

  auto objective = [&](const Eigen::VectorXd& v) {
    const double norm = v.norm();
    if (!(norm > 1e-12) || !std::isfinite(norm)) return kInf;
    try {
      return score_objective(het, residuals_sq, v / norm);
    } catch (const Error&) {
      return kInf;
    }
  };

  std::vector<Eigen::VectorXd> starts;
  {
    // Normalized OLS slope of u^2 on the het covariates.
    Eigen::MatrixXd A(het.rows(), dim + 1);
    A.col(0).setOnes();
    A.rightCols(dim) = het;
    Eigen::VectorXd slope = Eigen::VectorXd::Unit(dim, 0);
    try {
      Eigen::VectorXd coef = detail::full_rank_qr(A, "index start").solve(residuals_sq);
      if (coef.tail(dim).norm() > 0.0 && coef.allFinite()) slope = coef.tail(dim).normalized();
    } catch (const Error&) {
    }
    starts.push_back(slope);
  }
  for (int s = 1; s < opts.n_starts; ++s) {
    Rng rng = stream(opts.seed, static_cast<std::uint64_t>(s));
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(dim);
    do {
      for (Eigen::Index j = 0; j < dim; ++j) v(j) = normal(rng);
    } while (v.norm() == 0.0);
    starts.push_back(v.normalized());
  }

  IndexFit fit;
  fit.starts = opts.n_starts;
  const IndexStart* chosen = nullptr;
  for (const auto& start : starts) {
    SimplexResult r = nelder_mead(objective, start, opts.initial_step, opts.tol, max_iter);
    IndexStart rec;
    rec.start = start;
    rec.objective = r.f;
    rec.iterations = r.iterations;
    rec.converged = r.converged;
    rec.eta = std::isfinite(r.f) ? Eigen::VectorXd(r.x.normalized()) : start;
    fit.trace.push_back(std::move(rec));
  }
  for (const auto& rec : fit.trace) {
    if (!std::isfinite(rec.objective)) continue;
    if (!chosen || rec.objective < chosen->objective ||
        (rec.objective == chosen->objective && lexicographically_less(rec.eta, chosen->eta))) {
      chosen = &rec;
    }
  }
  if (!chosen) {
    throw Error(ErrorKind::optimization,
                "index objective could not be evaluated from any of " +
                    std::to_string(fit.trace.size()) + " starts");
  }
  fit.eta = chosen->eta;
  fit.link = profile_isotonic(het, residuals_sq, fit.eta);
  fit.objective = score_objective(het, residuals_sq, fit.eta);
  return fit;
}

IndexFit estimate_index(const Dataset& d, const Eigen::VectorXd& residuals_sq,
                        const IndexOptions& opts) {
  return estimate_index(d.het_matrix(), residuals_sq, opts);
}

IndexMglsFit fit_mgls_index(const Dataset& d, const MglsOptions& mgls,
                            const IndexOptions& opts) {
  if (d.het_cols().empty()) throw Error(ErrorKind::schema, "MGLS needs a variance covariate");
  const Eigen::MatrixXd het = d.het_matrix();
  IndexMglsFit out;

  if (het.cols() == 1) {
    out.mgls = fit_mgls(d, mgls);
    const double sign = out.mgls.direction == Direction::increasing ? 1.0 : -1.0;
    const Eigen::VectorXd rsq = out.mgls.first_stage.residuals.array().square();
    out.index.eta = Eigen::VectorXd::Constant(1, sign);
    out.index.link = profile_isotonic(het, rsq, out.index.eta);
    out.index.objective = score_objective(het, rsq, out.index.eta);
    out.index.starts = 1;
    return out;
  }

  MglsFit& fit = out.mgls;
  fit.first_stage = ols(d);
  const Eigen::VectorXd rsq = fit.first_stage.residuals.array().square();
  out.index = estimate_index(het, rsq, opts);
  const Eigen::VectorXd t = het * out.index.eta;

  Eigen::VectorXd sigma2(d.n());
  for (Eigen::Index i = 0; i < d.n(); ++i) sigma2(i) = evaluate(out.index.link, t(i));
  sigma2 = detail::floor_variance(std::move(sigma2), rsq.mean(), mgls.floor);

  fit.variance_fit = out.index.link;
  fit.direction = Direction::increasing;
  fit.side = TrimSide::lower;
  const detail::Trim trim = detail::trim_covariate(t, mgls.trim, fit.side);
  fit.q_n = trim.q_n;
  fit.coefficients.names = d.coefficient_names();
  detail::trimmed_gls(detail::raw_design(d), d.y(), sigma2, trim.kept,
                      fit.first_stage.residuals, fit);
  return out;
}

nlohmann::json to_json(const IndexFit& fit) {
  int converged = 0;
  for (const auto& s : fit.trace) converged += s.converged;
  return {{"eta", std::vector<double>(fit.eta.data(), fit.eta.data() + fit.eta.size())},
          {"objective", fit.objective},
          {"n_starts", fit.starts},
          {"converged_starts", converged}};
}

}  // namespace monogls
