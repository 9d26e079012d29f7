#include "monogls/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "monogls/baselines.hpp"
#include "monogls/error.hpp"
#include "monogls/linreg.hpp"

namespace monogls {

DgpSpec DgpSpec::make(int id, std::size_t n) {
  if (id < 1 || id > 4) throw Error(ErrorKind::parameter, "unknown DGP " + std::to_string(id));
  if (n < 2) throw Error(ErrorKind::parameter, "sample size must be >= 2");
  return DgpSpec{static_cast<DgpId>(id), n};
}

Eigen::Index DgpSpec::dim() const {
  return id == DgpId::dgp1 || id == DgpId::dgp2 ? 1 : 2;
}

Eigen::VectorXd DgpSpec::true_theta() const { return Eigen::VectorXd::Ones(dim() + 1); }

namespace {

double quadratic_variance(double t) { return 0.1 + 0.2 * t + 0.3 * t * t; }

double dgp4_index(double x1, double x2) {
  return std::exp((std::log(x1) + std::log(x2)) / std::sqrt(2.0));
}

}  // namespace

double DgpSpec::variance(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  switch (id) {
    case DgpId::dgp1: return quadratic_variance(x(0));
    case DgpId::dgp2: return 1.0;
    case DgpId::dgp3: return 0.2 * (x(0) + x(1)) * (x(0) + x(1));
    case DgpId::dgp4: return quadratic_variance(dgp4_index(x(0), x(1)));
  }
  return 1.0;
}

std::string DgpSpec::name() const { return "dgp" + std::to_string(static_cast<int>(id)); }

DgpDraw generate(const DgpSpec& spec, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(spec.n);
  const Eigen::Index dim = spec.dim();
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X(n, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) X(i, j) = std::exp(normal(rng));
  }
  Eigen::VectorXd sigma2(n), y(n);
  const Eigen::VectorXd theta = spec.true_theta();
  for (Eigen::Index i = 0; i < n; ++i) {
    sigma2(i) = spec.variance(X.row(i).transpose());
    const double u = std::sqrt(sigma2(i)) * normal(rng);
    y(i) = theta(0) + X.row(i).dot(theta.tail(dim)) + u;
  }
  Dataset::Names names;
  if (dim == 1) {
    names.regressors = {"x"};
  } else {
    names.regressors = {"x1", "x2"};
  }
  std::vector<Eigen::Index> het(static_cast<std::size_t>(dim));
  for (Eigen::Index j = 0; j < dim; ++j) het[static_cast<std::size_t>(j)] = j;
  return {Dataset(std::move(y), std::move(X), Eigen::MatrixXd(n, 0), std::move(het), {},
                  std::move(names)),
          std::move(sigma2)};
}

Eigen::MatrixXd fgls_basis(const DgpSpec& spec, const Dataset& d) {
  const Eigen::MatrixXd het = d.het_matrix();
  if (spec.id != DgpId::dgp4) return quadratic_basis(het);
  Eigen::MatrixXd t(het.rows(), 1);
  for (Eigen::Index i = 0; i < het.rows(); ++i) t(i, 0) = dgp4_index(het(i, 0), het(i, 1));
  return quadratic_basis(t);
}

IvDraw generate_iv(std::size_t n, Rng& rng, double rho) {
  const auto m = static_cast<Eigen::Index>(n);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(m), x(m), y(m);
  for (Eigen::Index i = 0; i < m; ++i) z(i) = std::exp(normal(rng));
  const double orth = std::sqrt(1.0 - rho * rho);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double e = normal(rng);
    const double eps = rho * e + orth * normal(rng);
    x(i) = 0.8 * z(i) + e;
    y(i) = 1.0 + x(i) + std::sqrt(0.1 + 0.3 * z(i) * z(i)) * eps;
  }
  Dataset::Names names;
  names.regressors = {"x"};
  return {Dataset(std::move(y), x, Eigen::MatrixXd(m, 0), {}, {}, std::move(names)),
          std::move(z), Eigen::Vector2d(1.0, 1.0)};
}

// ---------------------------------------------------------------------------
// Estimators

std::string Estimator::label() const {
  switch (kind) {
    case EstimatorKind::gls: return "GLS";
    case EstimatorKind::ols: return "OLS";
    case EstimatorKind::ols_u: return "OLS-U";
    case EstimatorKind::ols_r: return "OLS-R";
    case EstimatorKind::ols_boot: return "OLS-Boot";
    case EstimatorKind::fgls: return "FGLS";
    case EstimatorKind::knn: return k ? "kNN-" + std::to_string(*k) : std::string("kNN-auto");
    case EstimatorKind::mgls: return "MGLS";
    case EstimatorKind::mgls_robust: return "MGLS-Robust";
  }
  return "?";
}

Estimator Estimator::parse(const std::string& label) {
  std::string s;
  for (char c : label) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  static const std::map<std::string, EstimatorKind> fixed = {
      {"gls", EstimatorKind::gls},           {"ols", EstimatorKind::ols},
      {"ols-u", EstimatorKind::ols_u},       {"ols-r", EstimatorKind::ols_r},
      {"ols-boot", EstimatorKind::ols_boot}, {"fgls", EstimatorKind::fgls},
      {"mgls", EstimatorKind::mgls},         {"mgls-robust", EstimatorKind::mgls_robust}};
  if (auto it = fixed.find(s); it != fixed.end()) return {it->second, std::nullopt};
  if (s == "knn-auto" || s == "knn") return {EstimatorKind::knn, std::nullopt};
  if (s.rfind("knn-", 0) == 0) {
    try {
      std::size_t pos = 0;
      const long k = std::stol(s.substr(4), &pos);
      if (pos == s.size() - 4 && k >= 1) {
        return {EstimatorKind::knn, static_cast<std::size_t>(k)};
      }
    } catch (const std::exception&) {
    }
  }
  throw Error(ErrorKind::parameter, "unknown estimator: " + label);
}

const char* to_string(StudyMode m) noexcept {
  return m == StudyMode::estimation ? "estimation" : "inference";
}

std::vector<Estimator> table_estimators(StudyMode mode) {
  using K = EstimatorKind;
  std::vector<Estimator> out{{K::gls, {}}};
  if (mode == StudyMode::estimation) {
    out.push_back({K::ols, {}});
  } else {
    out.insert(out.end(), {{K::ols_u, {}}, {K::ols_r, {}}, {K::ols_boot, {}}});
  }
  out.insert(out.end(), {{K::fgls, {}}, {K::knn, {}}, {K::knn, 6}, {K::knn, 15}, {K::knn, 24},
                         {K::mgls, {}}});
  if (mode == StudyMode::inference) out.push_back({K::mgls_robust, {}});
  return out;
}

// ---------------------------------------------------------------------------
// Replications

namespace {

constexpr double kZ975 = 1.959963984540054;

struct Interval {
  Eigen::VectorXd lower, upper;
};

Interval normal_interval(const Eigen::VectorXd& theta, const Eigen::MatrixXd& cov) {
  const Eigen::VectorXd half = kZ975 * cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return {theta - half, theta + half};
}

/// Fits shared between estimator rows of one replication.
class ReplicationFits {
 public:
  ReplicationFits(const DgpSpec& spec, const DgpDraw& draw, const StudyConfig& config,
                  std::uint64_t seed)
      : spec_(spec), draw_(draw), config_(config), seed_(seed) {}

  EstimateRecord fit(const Estimator& e) {
    EstimateRecord rec;
    const bool inference = config_.mode == StudyMode::inference;
    const Eigen::MatrixXd* cov = nullptr;
    switch (e.kind) {
      case EstimatorKind::gls: {
        const auto& f = gls();
        rec.theta = f.coefficients.theta;
        cov = &*f.covariances.model_based;
        break;
      }
      case EstimatorKind::ols:
      case EstimatorKind::ols_u: {
        const auto& f = ols_fit();
        rec.theta = f.coefficients.theta;
        cov = &*f.covariances.model_based;
        break;
      }
      case EstimatorKind::ols_r: {
        const auto& f = ols_fit();
        rec.theta = f.coefficients.theta;
        cov = &*f.covariances.sandwich;
        break;
      }
      case EstimatorKind::ols_boot: {
        const auto& f = ols_fit();
        rec.theta = f.coefficients.theta;
        if (inference) {
          const BootstrapResult boot =
              wild_bootstrap(f, draw_.data, config_.bootstrap_reps, stream_seed(seed_, 1));
          rec.lower = boot.lower;
          rec.upper = boot.upper;
        }
        break;
      }
      case EstimatorKind::fgls: {
        const auto& f = fgls();
        rec.theta = f.coefficients.theta;
        cov = &*f.covariances.model_based;
        break;
      }
      case EstimatorKind::knn: {
        const auto& f = knn(e.k);
        rec.theta = f.coefficients.theta;
        cov = &*f.covariances.model_based;
        break;
      }
      case EstimatorKind::mgls:
      case EstimatorKind::mgls_robust: {
        const auto& f = mgls();
        rec.theta = f.coefficients.theta;
        cov = e.kind == EstimatorKind::mgls ? &*f.covariances.model_based
                                            : &*f.covariances.sandwich;
        break;
      }
    }
    if (inference && cov) {
      Interval ci = normal_interval(rec.theta, *cov);
      rec.lower = std::move(ci.lower);
      rec.upper = std::move(ci.upper);
    }
    rec.ok = true;
    return rec;
  }

 private:
  const LinearFit& ols_fit() {
    if (!ols_) ols_ = ols(draw_.data);
    return *ols_;
  }
  const LinearFit& gls() {
    if (!gls_) gls_ = fit_infeasible_gls(draw_.data, draw_.sigma2).linear;
    return *gls_;
  }
  const LinearFit& fgls() {
    if (!fgls_) {
      fgls_ = fit_fgls_parametric(draw_.data, fgls_basis(spec_, draw_.data)).linear;
    }
    return *fgls_;
  }
  const LinearFit& knn(std::optional<std::size_t> k) {
    const std::size_t key = k.value_or(0);
    auto it = knn_.find(key);
    if (it == knn_.end()) {
      KnnOptions opts;
      opts.k = k;
      it = knn_.emplace(key, fit_fgls_knn(draw_.data, opts).linear).first;
    }
    return it->second;
  }
  const MglsFit& mgls() {
    if (!mgls_) {
      if (spec_.dim() == 1) {
        mgls_ = fit_mgls(draw_.data, config_.mgls);
      } else {
        IndexOptions opts = config_.index;
        opts.seed = stream_seed(seed_, 2);
        mgls_ = fit_mgls_index(draw_.data, config_.mgls, opts).mgls;
      }
    }
    return *mgls_;
  }

  const DgpSpec& spec_;
  const DgpDraw& draw_;
  const StudyConfig& config_;
  std::uint64_t seed_;
  std::optional<LinearFit> ols_, gls_, fgls_;
  std::map<std::size_t, LinearFit> knn_;
  std::optional<MglsFit> mgls_;
};

}  // namespace

Replication run_replication(const DgpSpec& spec, std::span<const Estimator> estimators,
                            const StudyConfig& config, std::size_t r) {
  Rng rng = stream(config.seed, r);
  const DgpDraw draw = generate(spec, rng);
  // Estimator-side randomness (bootstrap, index starts) uses a sibling stream.
  ReplicationFits fits(spec, draw, config, stream_seed(~config.seed, r));
  Replication out;
  out.reserve(estimators.size());
  for (const auto& e : estimators) {
    try {
      out.push_back(fits.fit(e));
    } catch (const Error& err) {
      EstimateRecord rec;
      rec.error = err.what();
      out.push_back(std::move(rec));
    }
  }
  return out;
}

const Cell& SimulationReport::cell(const std::string& estimator, std::size_t coef) const {
  for (const auto& c : cells) {
    if (c.estimator == estimator && c.coef == coef) return c;
  }
  throw Error(ErrorKind::index, "no cell for " + estimator + " coefficient " +
                                    std::to_string(coef));
}

double SimulationReport::rmse_ratio(const std::string& estimator, std::size_t coef) const {
  return cell(estimator, coef).rmse / cell("GLS", coef).rmse;
}

SimulationReport aggregate(const DgpSpec& spec, std::span<const Estimator> estimators,
                           const StudyConfig& config, const std::vector<Replication>& reps) {
  SimulationReport report;
  report.spec = spec;
  report.mode = config.mode;
  report.reps = reps.size();
  report.seed = config.seed;
  const Eigen::VectorXd theta = spec.true_theta();
  const bool inference = config.mode == StudyMode::inference;

  for (std::size_t e = 0; e < estimators.size(); ++e) {
    report.estimators.push_back(estimators[e].label());
    for (std::size_t r = 0; r < reps.size(); ++r) {
      if (!reps[r][e].ok) {
        report.failure_log.push_back("rep " + std::to_string(r) + " " +
                                     estimators[e].label() + ": " + reps[r][e].error);
      }
    }
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      Cell cell;
      cell.estimator = estimators[e].label();
      cell.coef = static_cast<std::size_t>(j);
      double sq = 0.0, ab = 0.0, ab2 = 0.0, cover = 0.0, len = 0.0, len2 = 0.0;
      for (const auto& rep : reps) {
        const EstimateRecord& rec = rep[e];
        if (!rec.ok) {
          ++cell.failures;
          continue;
        }
        ++cell.used;
        const double err = rec.theta(j) - theta(j);
        sq += err * err;
        ab += std::abs(err);
        ab2 += err * err;
        if (inference && rec.lower.size() > j) {
          cover += (rec.lower(j) <= theta(j) && theta(j) <= rec.upper(j)) ? 1.0 : 0.0;
          const double w = rec.upper(j) - rec.lower(j);
          len += w;
          len2 += w * w;
        }
      }
      if (cell.used > 0) {
        const double m = static_cast<double>(cell.used);
        cell.rmse = std::sqrt(sq / m);
        cell.mae = ab / m;
        cell.rmse_mcse = cell.rmse / std::sqrt(2.0 * m);
        cell.mae_mcse = std::sqrt(std::max(0.0, ab2 / m - cell.mae * cell.mae) / m);
        if (inference) {
          const double p = cover / m;
          cell.coverage = p;
          cell.coverage_mcse = std::sqrt(p * (1.0 - p) / m);
          cell.avg_length = len / m;
          cell.length_mcse =
              std::sqrt(std::max(0.0, len2 / m - (len / m) * (len / m)) / m);
        }
      }
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

SimulationReport run_study(const DgpSpec& spec, std::span<const Estimator> estimators,
                           const StudyConfig& config) {
  if (config.reps < 1) throw Error(ErrorKind::parameter, "reps must be >= 1");
  if (estimators.empty()) throw Error(ErrorKind::parameter, "estimator list is empty");
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<Replication> reps(config.reps);
  unsigned jobs = config.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                   : config.jobs;
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, config.reps));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= config.reps) return;
      try {
        reps[r] = run_replication(spec, estimators, config, r);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = config.reps;
        return;
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  SimulationReport report = aggregate(spec, estimators, config, reps);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& cell : report.cells) {
    if (static_cast<double>(cell.failures) >
        config.failure_limit * static_cast<double>(config.reps)) {
      std::string msg = cell.estimator + " failed on " + std::to_string(cell.failures) +
                        " of " + std::to_string(config.reps) + " replications";
      for (std::size_t i = 0; i < report.failure_log.size() && i < 5; ++i) {
        msg += "\n  " + report.failure_log[i];
      }
      throw Error(ErrorKind::study, msg);
    }
  }
  return report;
}

}  // namespace monogls
