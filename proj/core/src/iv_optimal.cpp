#include "monogls/iv_optimal.hpp"

#include <cmath>
#include <limits>

#include "linalg.hpp"
#include "monogls/error.hpp"

namespace monogls {

namespace {

void check_iv_inputs(const Dataset& d, const Eigen::VectorXd& instrument) {
  if (d.p() != 1 || d.q() != 0 || !d.intercept()) {
    throw Error(ErrorKind::schema,
                "optimal IV needs one endogenous regressor, no controls and an intercept");
  }
  if (instrument.size() != d.n()) throw Error(ErrorKind::size, "instrument has the wrong length");
  if (!instrument.allFinite()) throw Error(ErrorKind::value, "instrument is not finite");
}

Eigen::MatrixXd instrument_block(const Eigen::VectorXd& z) {
  Eigen::MatrixXd G(z.size(), 2);
  G.col(0).setOnes();
  G.col(1) = z;
  return G;
}

Eigen::Matrix2d inverse_checked(const Eigen::Matrix2d& A) {
  Eigen::ColPivHouseholderQR<Eigen::Matrix2d> qr(A);
  qr.setThreshold(detail::kRankTolerance);
  if (qr.rank() < 2) {
    throw Error(ErrorKind::singular_design, "trimmed IV moment matrix is singular");
  }
  return qr.inverse();
}

}  // namespace

IvMglsFit fit_iv_mgls(const Dataset& d, const Eigen::VectorXd& instrument,
                      const MglsOptions& opts) {
  check_iv_inputs(d, instrument);
  const Eigen::Index n = d.n();
  const Eigen::VectorXd x = d.x_reg().col(0);
  const Eigen::MatrixXd G = instrument_block(instrument);
  IvMglsFit fit;

  // Relevance of the linear first stage E[x|z] = eta + gamma z.
  {
    detail::Qr qr = [&] {
      try {
        return detail::full_rank_qr(G, "first stage");
      } catch (const Error& e) {
        throw Error(ErrorKind::rank, e.what());
      }
    }();
    const Eigen::VectorXd coef = qr.solve(x);
    if (coef(1) == 0.0) throw Error(ErrorKind::rank, "first-stage slope is zero");
    const Eigen::VectorXd r = x - G * coef;
    const double s2 = n > 2 ? r.squaredNorm() / static_cast<double>(n - 2) : 0.0;
    const double se = std::sqrt(s2 * detail::gram_inverse(qr)(1, 1));
    fit.first_stage_t = se > 0.0 ? coef(1) / se : std::copysign(
                                                      std::numeric_limits<double>::infinity(),
                                                      coef(1));
    fit.weak_instrument = std::abs(fit.first_stage_t) <= 2.0;
  }

  fit.first_stage = tsls(d, instrument);
  const Eigen::VectorXd esq = fit.first_stage.residuals.array().square();
  fit.v2_fit = fit_variance(instrument, esq, opts.direction);
  fit.direction = fit.v2_fit.direction;
  fit.side = fit.direction == Direction::increasing ? TrimSide::lower : TrimSide::upper;

  Eigen::VectorXd v2(n);
  for (Eigen::Index i = 0; i < n; ++i) v2(i) = evaluate(fit.v2_fit, instrument(i));
  fit.v2 = detail::floor_variance(std::move(v2), esq.mean(), opts.floor);

  const detail::Trim trim = detail::trim_covariate(instrument, opts.trim, fit.side);
  fit.q_n = trim.q_n;
  fit.kept = trim.kept;
  fit.n_kept = trim.n_kept;
  if (fit.n_kept < 2) {
    throw Error(ErrorKind::insufficient_data, "fewer than 2 rows survive trimming");
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    if (!fit.kept[static_cast<std::size_t>(i)]) continue;
    const double w = 1.0 / fit.v2(i);
    const Eigen::Vector2d g(1.0, instrument(i));
    fit.moment_matrix += w * g * Eigen::RowVector2d(1.0, x(i));
    fit.moment_rhs += w * g * d.y()(i);
  }
  const Eigen::Matrix2d Ainv = inverse_checked(fit.moment_matrix);
  fit.coefficients = {Ainv * fit.moment_rhs, d.coefficient_names()};
  fit.covariances.sandwich = iv_sandwich(fit, d, instrument);
  return fit;
}

Eigen::MatrixXd iv_sandwich(const IvMglsFit& fit, const Dataset& d,
                            const Eigen::VectorXd& instrument) {
  check_iv_inputs(d, instrument);
  const Eigen::Matrix2d Ainv = inverse_checked(fit.moment_matrix);
  Eigen::Matrix2d M = Eigen::Matrix2d::Zero();
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    if (!fit.kept[static_cast<std::size_t>(i)]) continue;
    const double w = 1.0 / fit.v2(i);
    const double e = fit.first_stage.residuals(i);
    const Eigen::Vector2d g(1.0, instrument(i));
    M += w * w * e * e * g * g.transpose();
  }
  return detail::symmetrize(Ainv * M * Ainv.transpose());
}

Eigen::Vector2d iv_moment(const IvMglsFit& fit, const Dataset& d,
                          const Eigen::VectorXd& instrument, const Eigen::Vector2d& theta) {
  check_iv_inputs(d, instrument);
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    if (!fit.kept[static_cast<std::size_t>(i)]) continue;
    const double u = d.y()(i) - theta(0) - theta(1) * d.x_reg()(i, 0);
    m += Eigen::Vector2d(1.0, instrument(i)) * u / fit.v2(i);
  }
  return m;
}

nlohmann::json to_json(const IvMglsFit& fit) {
  std::vector<double> se;
  if (fit.covariances.sandwich) {
    for (Eigen::Index j = 0; j < 2; ++j) se.push_back(std::sqrt((*fit.covariances.sandwich)(j, j)));
  }
  return {{"coefficients", to_json(fit.coefficients)},
          {"se_robust", se},
          {"q_n", fit.q_n},
          {"n_kept", fit.n_kept},
          {"direction", to_string(fit.direction)},
          {"first_stage_t", std::isfinite(fit.first_stage_t)
                                ? nlohmann::json(fit.first_stage_t)
                                : nlohmann::json(nullptr)},
          {"weak_instrument", fit.weak_instrument}};
}

}  // namespace monogls
