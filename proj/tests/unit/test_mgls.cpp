#include <doctest.h>

#include <algorithm>

#include "monogls/error.hpp"
#include "monogls/linreg.hpp"
#include "monogls/mgls.hpp"
#include "monogls/montecarlo.hpp"
#include "test_support.hpp"

using namespace monogls;
using testing::vec;

namespace {

Eigen::VectorXd kept_rows(const Eigen::VectorXd& v, const std::vector<bool>& kept) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (kept[static_cast<std::size_t>(i)]) out.push_back(v[i]);
  }
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

std::vector<Eigen::Index> kept_index(const std::vector<bool>& kept) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (kept[i]) rows.push_back(static_cast<Eigen::Index>(i));
  }
  return rows;
}

}  // namespace

TEST_CASE("TrimRule") {
  const TrimRule rule;
  CHECK(rule.index(1000) == 100);
  CHECK(rule.index(500) == 63);
  CHECK(rule.index(1) == 1);
  CHECK(rule.level(1000) == doctest::Approx(0.1));
  for (std::size_t n = 1; n < 3000; n += 7) {
    CHECK(rule.index(n) >= 1);
    CHECK(rule.index(n) <= n);
  }
  CHECK(TrimRule{0.01}.index(500) == 1);
}

TEST_CASE("fit_variance examples") {
  const IsotonicFit up = fit_variance(vec({1, 2, 3}), vec({1, 2, 3}), DirectionChoice::increasing);
  CHECK(up.levels == std::vector<double>{1, 2, 3});
  const IsotonicFit down = fit_variance(vec({1, 2, 3}), vec({3, 2, 1}), DirectionChoice::automatic);
  CHECK(down.direction == Direction::decreasing);
  CHECK(down.levels == std::vector<double>{3, 2, 1});
  CHECK(parse_direction("auto") == DirectionChoice::automatic);
  CHECK_THROWS_AS(parse_direction("sideways"), Error);
}

TEST_CASE("fit_variance errors") {
  try {
    fit_variance(vec({2, 2, 2}), vec({1, 2, 3}), DirectionChoice::increasing);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degenerate_covariate);
  }
  try {
    fit_variance(vec({1, 2, 3}), vec({1, -2, 3}), DirectionChoice::increasing);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::value);
  }
}

TEST_CASE("isotonic variance estimate is consistent on dgp1") {
  // mean squared error on [q_n, 95th percentile], averaged over draws
  double previous = 1e300;
  for (std::size_t n : {100u, 500u, 2000u}) {
    const DgpSpec spec = DgpSpec::make(1, n);
    double mse = 0.0;
    for (int r = 0; r < 40; ++r) {
      Rng rng = stream(51, static_cast<std::uint64_t>(r));
      const DgpDraw draw = generate(spec, rng);
      const MglsFit fit = fit_mgls(draw.data, {});
      const Eigen::VectorXd x = draw.data.het_vector();
      std::vector<double> xs(x.data(), x.data() + x.size());
      const double hi = quantile(xs, 0.95);
      double s = 0.0;
      int m = 0;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] < fit.q_n || x[i] > hi) continue;
        const double e = evaluate(fit.variance_fit, x[i]) - draw.sigma2[i];
        s += e * e;
        ++m;
      }
      mse += s / m;
    }
    CHECK(mse < previous);
    previous = mse;
  }
}

TEST_CASE("trimming keeps X >= q_n with the index(n)-th order statistic") {
  const Dataset d = testing::hetero_data(52, 1000);
  const MglsFit fit = fit_mgls(d, {});
  const Eigen::VectorXd x = d.het_vector();
  std::vector<double> xs(x.data(), x.data() + 1000);
  std::sort(xs.begin(), xs.end());
  CHECK(fit.q_n == xs[99]);
  CHECK(fit.n_kept == 901);
  CHECK(fit.side == TrimSide::lower);
  for (std::size_t i = 0; i < 1000; ++i) {
    CHECK(fit.kept[i] == (x[static_cast<Eigen::Index>(i)] >= fit.q_n));
  }
}

TEST_CASE("ties at q_n are all kept") {
  Eigen::VectorXd x(10);
  x << 1, 1, 1, 1, 1, 2, 3, 4, 5, 6;
  const Eigen::VectorXd y = 1.0 + x.array() + vec({0.1, -0.2, 0.3, 0.1, -0.1, 0.2, -0.3, 0.5, -0.5, 0.4}).array();
  const Dataset d(y, Eigen::MatrixXd(x), Eigen::MatrixXd(10, 0), {0});
  const MglsFit fit = fit_mgls(d, {});
  CHECK(fit.q_n == 1.0);
  CHECK(fit.n_kept == 10);
}

TEST_CASE("constant variance estimates reduce to OLS on the kept rows") {
  const Dataset d = testing::hetero_data(53, 300);
  MglsOptions opts;
  opts.floor.ratio = 1e6;  // every estimate floored to the same constant
  const MglsFit fit = fit_mgls(d, opts);
  CHECK((fit.sigma2.array() == fit.sigma2[0]).all());
  const LinearFit sub = ols(d.subset(kept_index(fit.kept)));
  CHECK(testing::max_abs_diff(fit.coefficients.theta, sub.coefficients.theta) < 1e-10);
}

TEST_CASE("weights, floor and covariances") {
  const Dataset d = testing::hetero_data(54, 400);
  const MglsFit fit = fit_mgls(d, {});
  const double mean_u2 = fit.first_stage.residuals.squaredNorm() / 400.0;
  CHECK(fit.sigma2.minCoeff() >= 0.04 * mean_u2 * (1 - 1e-15));
  CHECK(fit.weights.minCoeff() > 0.0);
  CHECK(fit.weights.allFinite());
  CHECK(fit.weights.size() == static_cast<Eigen::Index>(fit.n_kept));
  CHECK(testing::max_abs_diff(fit.weights, kept_rows(fit.sigma2, fit.kept).cwiseInverse()) < 1e-15);

  // model-based covariance over all rows
  const Eigen::MatrixXd W = design_matrix(d);
  Eigen::MatrixXd bread = Eigen::MatrixXd::Zero(2, 2), meat = Eigen::MatrixXd::Zero(2, 2);
  for (Eigen::Index i = 0; i < 400; ++i) {
    const double s = fit.sigma2[i];
    const double u = fit.first_stage.residuals[i];
    bread += W.row(i).transpose() * W.row(i) / s;
    meat += u * u / (s * s) * W.row(i).transpose() * W.row(i);
  }
  const Eigen::MatrixXd binv = bread.inverse();
  CHECK(testing::rel_diff(*fit.covariances.model_based, binv) < 1e-10);
  CHECK(testing::rel_diff(*fit.covariances.sandwich, binv * meat * binv) < 1e-10);
  CHECK(testing::rel_diff(sandwich_covariance(fit, d), *fit.covariances.sandwich) < 1e-12);
}

TEST_CASE("sandwich collapses to the model-based covariance when u^2 = sigma^2") {
  const Dataset d = testing::hetero_data(55, 200);
  MglsFit fit = fit_mgls(d, {});
  fit.first_stage.residuals = fit.sigma2.cwiseSqrt();
  CHECK(testing::rel_diff(sandwich_covariance(fit, d), *fit.covariances.model_based) < 1e-10);
}

TEST_CASE("scale equivariance") {
  const Dataset d = testing::hetero_data(56, 300);
  const double a = 3.7;
  const MglsFit f1 = fit_mgls(d, {});
  const MglsFit f2 = fit_mgls(d.with_response(a * d.y()), {});
  CHECK(testing::rel_diff(f2.coefficients.theta, a * f1.coefficients.theta) < 1e-8);
  CHECK(testing::rel_diff(*f2.covariances.model_based, a * a * *f1.covariances.model_based) < 1e-8);
  CHECK(testing::rel_diff(*f2.covariances.sandwich, a * a * *f1.covariances.sandwich) < 1e-8);
}

TEST_CASE("decreasing variance trims the upper tail") {
  const Dataset base = testing::hetero_data(57, 500);
  const Eigen::VectorXd x = base.het_vector();
  Rng rng = stream(57, 1);
  const Eigen::VectorXd e = testing::normal_vector(rng, 500);
  Eigen::VectorXd y(500);
  for (Eigen::Index i = 0; i < 500; ++i) y[i] = 1 + x[i] + std::sqrt(0.1 + 2.0 / (1 + x[i])) * e[i];
  const Dataset d = base.with_response(y);
  const MglsFit fit = fit_mgls(d, {});
  CHECK(fit.direction == Direction::decreasing);
  CHECK(fit.side == TrimSide::upper);
  CHECK(fit.n_kept == 500 - TrimRule{}.index(500) + 1);
  for (Eigen::Index i = 0; i < 500; ++i) CHECK(fit.kept[static_cast<std::size_t>(i)] == (x[i] <= fit.q_n));
}

TEST_CASE("fit_mgls errors") {
  SUBCASE("no het column") {
    const Dataset base = testing::hetero_data(58, 50);
    const Dataset d(base.y(), base.x_reg(), base.z());
    CHECK_THROWS_AS(fit_mgls(d, {}), Error);
  }
  SUBCASE("too few rows survive") {
    const Dataset d(vec({1, 2, 2.5}), testing::col({1, 2, 3}), Eigen::MatrixXd(3, 0), {0});
    MglsOptions opts;
    opts.trim.c = 1.4;  // index(3) = 3, keeps one row
    try {
      fit_mgls(d, opts);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::insufficient_data);
    }
  }
}

TEST_CASE("grouped fits") {
  const Dataset d = testing::hetero_data(59, 400);
  SUBCASE("one group equals fit_mgls") {
    const MglsFit a = fit_mgls(d, {});
    const MglsFit b = fit_mgls_grouped(d, Eigen::VectorXd::Zero(400), {});
    CHECK(testing::max_abs_diff(a.coefficients.theta, b.coefficients.theta) < 1e-12);
    CHECK(a.n_kept == b.n_kept);
  }
  SUBCASE("two copies of the same data") {
    std::vector<Eigen::Index> rows(800);
    for (Eigen::Index i = 0; i < 800; ++i) rows[static_cast<std::size_t>(i)] = i % 400;
    const Dataset doubled = d.subset(rows);
    Eigen::VectorXd g(800);
    for (Eigen::Index i = 0; i < 800; ++i) g[i] = i < 400 ? 0 : 1;
    const MglsFit single = fit_mgls_grouped(d, Eigen::VectorXd::Zero(400), {});
    const MglsFit two = fit_mgls_grouped(doubled, g, {});
    CHECK(testing::max_abs_diff(single.coefficients.theta, two.coefficients.theta) < 1e-10);
    CHECK(two.groups.size() == 2);
  }
  SUBCASE("group too small") {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(400);
    g.head(3).setOnes();
    try {
      fit_mgls_grouped(d, g, {});
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::insufficient_data);
      CHECK(std::string(e.what()).find('1') != std::string::npos);
    }
  }
}

TEST_CASE("grouping helps when variance differs by group") {
  double se_grouped = 0.0, se_pooled = 0.0;
  const Eigen::Index n = 500;
  for (int r = 0; r < 500; ++r) {
    Rng rng = stream(60, static_cast<std::uint64_t>(r));
    std::normal_distribution<double> nd;
    Eigen::VectorXd x(n), y(n), g(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x[i] = std::exp(nd(rng));
      g[i] = static_cast<double>(i % 2);
      const double s2 = (0.1 + 0.2 * x[i] + 0.3 * x[i] * x[i]) * (g[i] > 0 ? 4.0 : 1.0);
      y[i] = 1 + x[i] + std::sqrt(s2) * nd(rng);
    }
    const Dataset d(y, Eigen::MatrixXd(x), Eigen::MatrixXd(n, 0), {0});
    se_grouped += (fit_mgls_grouped(d, g, {}).coefficients.theta - vec({1, 1})).squaredNorm();
    se_pooled += (fit_mgls(d, {}).coefficients.theta - vec({1, 1})).squaredNorm();
  }
  CHECK(se_grouped < se_pooled);
}

TEST_CASE("JSON") {
  const Dataset d = testing::hetero_data(61, 100);
  const auto j = to_json(fit_mgls(d, {}));
  for (const char* key : {"coefficients", "se_model", "se_robust", "q_n", "n_kept", "direction",
                          "variance_fit"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["direction"] == "increasing");
}
