#include <doctest.h>

#include "monogls/error.hpp"
#include "monogls/isotonic_oracles.hpp"
#include "monogls/linreg.hpp"
#include "monogls/montecarlo.hpp"
#include "monogls/single_index.hpp"
#include "test_support.hpp"

using namespace monogls;
using testing::vec;

namespace {

Eigen::MatrixXd lognormal(Rng& rng, Eigen::Index n, Eigen::Index p) {
  return testing::normal_matrix(rng, n, p).array().exp();
}

}  // namespace

TEST_CASE("profile_isotonic reduces to the coordinate fit") {
  Rng rng = stream(71, 0);
  const Eigen::MatrixXd H = lognormal(rng, 80, 2);
  const Eigen::VectorXd u2 = testing::normal_vector(rng, 80).array().square();
  const IsotonicFit a = profile_isotonic(H, u2, vec({1, 0}));
  const IsotonicFit b = fit_variance(Eigen::VectorXd(H.col(0)), u2, DirectionChoice::increasing);
  CHECK(a.knots == b.knots);
  CHECK(a.levels == b.levels);
  CHECK(a.direction == Direction::increasing);
}

TEST_CASE("profile_isotonic interpolates a monotone response") {
  Rng rng = stream(72, 0);
  const Eigen::MatrixXd H = lognormal(rng, 60, 3);
  const Eigen::VectorXd eta = vec({0.6, 0.0, 0.8});
  const Eigen::VectorXd t = H * eta;
  const Eigen::VectorXd u2 = t.array().square();
  const IsotonicFit fit = profile_isotonic(H, u2, eta);
  const std::vector<double> ts(t.data(), t.data() + 60), us(u2.data(), u2.data() + 60);
  CHECK(residual_sum_of_squares(fit, ts, us) < 1e-20);
  CHECK(score_objective(H, u2, eta) < 1e-20);
}

TEST_CASE("profile_isotonic agrees with the gcm oracle on the sorted index") {
  Rng rng = stream(73, 0);
  const Eigen::Index n = 120;
  const Eigen::MatrixXd H = testing::normal_matrix(rng, n, 2);
  const Eigen::VectorXd u2 = testing::normal_vector(rng, n).array().square();
  const Eigen::VectorXd eta = vec({0.28, 0.96});
  const IsotonicFit fit = profile_isotonic(H, u2, eta);
  const Eigen::VectorXd t = H * eta;
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return t[a] < t[b]; });
  std::vector<double> cx{0.0}, cy{0.0};
  for (auto i : order) {
    cx.push_back(cx.back() + 1.0);
    cy.push_back(cy.back() + u2[i]);
  }
  double worst = 0.0;
  for (std::size_t j = 1; j <= static_cast<std::size_t>(n); ++j) {
    const double v = evaluate(fit, t[order[j - 1]]);
    worst = std::max(worst, std::abs(v - oracle::gcm_left_derivative(cx, cy, j)));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("degenerate index") {
  Eigen::MatrixXd H(4, 2);
  H << 1, 1, 2, 0, 0, 2, 1.5, 0.5;  // x1 + x2 = 2 throughout
  const Eigen::VectorXd eta = vec({1, 1}) / std::sqrt(2.0);
  try {
    profile_isotonic(H, vec({1, 2, 3, 4}), eta);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degenerate_covariate);
  }
}

TEST_CASE("score_objective basics") {
  Eigen::MatrixXd one(1, 2);
  one << 0.3, 2.0;
  CHECK(score_objective(one, vec({4.0}), vec({0.6, 0.8})) == 0.0);

  Rng rng = stream(74, 0);
  const Eigen::MatrixXd H = lognormal(rng, 50, 2);
  const Eigen::VectorXd u2 = testing::normal_vector(rng, 50).array().square();
  const Eigen::VectorXd eta = vec({0.8, -0.6});
  const IsotonicFit link = profile_isotonic(H, u2, eta);
  const Eigen::VectorXd t = H * eta;
  Eigen::VectorXd score = Eigen::VectorXd::Zero(2);
  for (Eigen::Index i = 0; i < 50; ++i) score += H.row(i).transpose() * (u2[i] - evaluate(link, t[i]));
  score /= 50.0;
  CHECK(score_objective(H, u2, eta) == doctest::Approx(score.squaredNorm()).epsilon(1e-12));
  CHECK(score_objective(H, u2, eta) >= 0.0);
}

TEST_CASE("score objective prefers the true direction on dgp3") {
  const DgpSpec spec = DgpSpec::make(3, 500);
  const Eigen::VectorXd eta0 = vec({1, 1}) / std::sqrt(2.0);
  const Eigen::VectorXd orth = vec({1, -1}) / std::sqrt(2.0);
  int wins = 0;
  for (int r = 0; r < 200; ++r) {
    Rng rng = stream(75, static_cast<std::uint64_t>(r));
    const DgpDraw draw = generate(spec, rng);
    const Eigen::VectorXd u2 = ols(draw.data).residuals.array().square();
    wins += score_objective(draw.data, u2, eta0) < score_objective(draw.data, u2, orth);
  }
  CHECK(wins >= 190);
}

TEST_CASE("estimate_index recovers a known direction") {
  Rng rng = stream(76, 0);
  const Eigen::Index n = 500;
  const Eigen::MatrixXd H = lognormal(rng, n, 2);
  const Eigen::VectorXd eta0 = vec({0.6, 0.8});
  const Eigen::VectorXd noise = 1e-3 * testing::normal_vector(rng, n);
  const Eigen::VectorXd u2 = (H * eta0).array().square() + noise.array().abs();
  const IndexFit fit = estimate_index(H, u2, {});
  CHECK((fit.eta - eta0).norm() < 0.15);
  CHECK(fit.eta.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.objective == doctest::Approx(score_objective(H, u2, fit.eta)).epsilon(1e-10));
  CHECK(fit.link.direction == Direction::increasing);
}

TEST_CASE("estimate_index finds a single relevant coordinate") {
  Rng rng = stream(77, 0);
  const Eigen::Index n = 500;
  const Eigen::MatrixXd H = lognormal(rng, n, 2);
  const Eigen::VectorXd e = testing::normal_vector(rng, n);
  const Eigen::VectorXd u2 = (0.2 + H.col(0).array()) * e.array().square();
  const IndexFit fit = estimate_index(H, u2, {});
  CHECK(std::abs(std::abs(fit.eta[0]) - 1.0) < 0.1);
  CHECK(std::abs(fit.eta[1]) < 0.1);
}

TEST_CASE("multistart bookkeeping and determinism") {
  Rng rng = stream(78, 0);
  const Eigen::MatrixXd H = lognormal(rng, 200, 3);
  const Eigen::VectorXd u2 =
      (H * vec({0.5, 0.5, 0.7071})).array().square() * testing::normal_vector(rng, 200).array().square();
  IndexOptions opts;
  opts.n_starts = 6;
  opts.seed = 99;
  const IndexFit a = estimate_index(H, u2, opts);
  const IndexFit b = estimate_index(H, u2, opts);
  CHECK(a.eta == b.eta);
  CHECK(a.objective == b.objective);
  CHECK(a.starts == 6);
  REQUIRE(a.trace.size() == 6);
  for (const auto& s : a.trace) {
    CHECK(s.start.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.eta.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a.objective <= score_objective(H, u2, s.start) + 1e-15);
    CHECK(a.objective <= s.objective);
  }
  // first start is the normalized OLS slope of u^2 on the covariates
  Eigen::MatrixXd W(200, 4);
  W << Eigen::VectorXd::Ones(200), H;
  const Eigen::VectorXd slope = W.colPivHouseholderQr().solve(u2).tail(3);
  CHECK((a.trace[0].start - slope.normalized()).norm() < 1e-10);
}

TEST_CASE("estimate_index preconditions") {
  Rng rng = stream(79, 0);
  const Eigen::MatrixXd H1 = lognormal(rng, 50, 1);
  const Eigen::MatrixXd H2 = lognormal(rng, 8, 2);
  const Eigen::VectorXd u50 = Eigen::VectorXd::Ones(50), u8 = Eigen::VectorXd::Ones(8);
  CHECK_THROWS_AS(estimate_index(H1, u50, {}), Error);
  CHECK_THROWS_AS(estimate_index(H2, u8, {}), Error);
}

TEST_CASE("fit_mgls_index reduces to fit_mgls with one het column") {
  const Dataset d = testing::hetero_data(80, 300);
  const IndexMglsFit a = fit_mgls_index(d, {}, {});
  const MglsFit b = fit_mgls(d, {});
  CHECK(testing::max_abs_diff(a.mgls.coefficients.theta, b.coefficients.theta) < 1e-10);
  CHECK(std::abs(a.index.eta[0]) == 1.0);
}

TEST_CASE("fit_mgls_index on dgp3 trims on the estimated index") {
  Rng rng = stream(81, 0);
  const DgpDraw draw = generate(DgpSpec::make(3, 400), rng);
  const IndexMglsFit fit = fit_mgls_index(draw.data, {}, {});
  const Eigen::VectorXd t = draw.data.het_matrix() * fit.index.eta;
  std::size_t kept = 0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    CHECK(fit.mgls.kept[static_cast<std::size_t>(i)] == (t[i] >= fit.mgls.q_n));
    kept += fit.mgls.kept[static_cast<std::size_t>(i)];
  }
  CHECK(kept == 400 - TrimRule{}.index(400) + 1);
  CHECK((fit.mgls.coefficients.theta - vec({1, 1, 1})).cwiseAbs().maxCoeff() < 0.5);
  const auto j = to_json(fit.index);
  CHECK(j["eta"].size() == 2);
  CHECK(j["n_starts"] == 10);
  CHECK(j.contains("objective"));
  CHECK(j.contains("converged_starts"));
}
