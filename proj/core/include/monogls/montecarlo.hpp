#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "monogls/dataset.hpp"
#include "monogls/mgls.hpp"
#include "monogls/rng.hpp"
#include "monogls/single_index.hpp"

namespace monogls {

enum class DgpId { dgp1 = 1, dgp2 = 2, dgp3 = 3, dgp4 = 4 };

/// Simulation designs with lognormal covariates and unit coefficients:
///   dgp1  y = b0 + b1 x + s(x) e,           s^2 = .1 + .2x + .3x^2
///   dgp2  y = b0 + b1 x + u,                u ~ N(0, 1)
///   dgp3  y = b0 + b1 x1 + b2 x2 + s e,     s^2 = .2 (x1 + x2)^2
///   dgp4  as dgp3 with s^2 = .1 + .2t + .3t^2, log t = (log x1 + log x2)/sqrt 2
struct DgpSpec {
  DgpId id = DgpId::dgp1;
  std::size_t n = 100;

  static DgpSpec make(int id, std::size_t n);

  Eigen::Index dim() const;  // number of covariates
  Eigen::VectorXd true_theta() const;
  /// Conditional error variance at one covariate row.
  double variance(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  std::string name() const;
};

struct DgpDraw {
  Dataset data;
  Eigen::VectorXd sigma2;  // true variance per row
};

DgpDraw generate(const DgpSpec& spec, Rng& rng);

/// Basis handed to parametric FGLS: {1, x, x^2} for dgp1/2, the full
/// quadratic in (x1, x2) for dgp3, {1, t, t^2} for dgp4.
Eigen::MatrixXd fgls_basis(const DgpSpec& spec, const Dataset& d);

/// Endogenous design for the optimal-IV estimator: z lognormal,
/// x = 0.8 z + e, u = v(z) eps with corr(e, eps) = rho, v^2 = .1 + .3 z^2.
struct IvDraw {
  Dataset data;
  Eigen::VectorXd instrument;
  Eigen::Vector2d theta;
};
IvDraw generate_iv(std::size_t n, Rng& rng, double rho = 0.5);

enum class EstimatorKind { gls, ols, ols_u, ols_r, ols_boot, fgls, knn, mgls, mgls_robust };

struct Estimator {
  EstimatorKind kind = EstimatorKind::ols;
  std::optional<std::size_t> k;  // knn: empty means cross-validated

  std::string label() const;
  static Estimator parse(const std::string& label);
  bool operator==(const Estimator&) const = default;
};

enum class StudyMode { estimation, inference };

const char* to_string(StudyMode m) noexcept;

/// Default estimator rows for the given mode.
std::vector<Estimator> table_estimators(StudyMode mode);

/// Trimming constant under which the reference simulation tables are
/// reproduced: the n^(-1/3) quantile level read in percent, which trims at
/// most one observation for n <= 1000.
inline constexpr double kReplicationTrimC = 0.01;

struct StudyConfig {
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
  StudyMode mode = StudyMode::estimation;
  unsigned jobs = 1;
  int bootstrap_reps = 999;
  MglsOptions mgls;
  IndexOptions index;
  double failure_limit = 0.01;  // fraction of reps an estimator may fail
};

struct EstimateRecord {
  bool ok = false;
  Eigen::VectorXd theta;
  Eigen::VectorXd lower;  // inference mode only
  Eigen::VectorXd upper;
  std::string error;
};

/// One record per estimator.
using Replication = std::vector<EstimateRecord>;

struct Cell {
  std::string estimator;
  std::size_t coef = 0;
  double rmse = 0.0;
  double mae = 0.0;
  double rmse_mcse = 0.0;
  double mae_mcse = 0.0;
  std::optional<double> coverage;
  std::optional<double> coverage_mcse;
  std::optional<double> avg_length;
  std::optional<double> length_mcse;
  std::size_t failures = 0;
  std::size_t used = 0;
};

struct SimulationReport {
  DgpSpec spec;
  StudyMode mode = StudyMode::estimation;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> estimators;
  std::vector<Cell> cells;  // estimator-major, coefficient-minor
  std::vector<std::string> failure_log;
  double wall_seconds = 0.0;

  const Cell& cell(const std::string& estimator, std::size_t coef) const;
  /// rmse of estimator over rmse of the infeasible GLS row.
  double rmse_ratio(const std::string& estimator, std::size_t coef) const;
};

/// Draws replication r from stream(seed, r) and fits every estimator.
Replication run_replication(const DgpSpec& spec, std::span<const Estimator> estimators,
                            const StudyConfig& config, std::size_t r);

/// Order-independent reduction of per-replication records.
SimulationReport aggregate(const DgpSpec& spec, std::span<const Estimator> estimators,
                           const StudyConfig& config,
                           const std::vector<Replication>& reps);

/// Replications run on config.jobs threads; output does not depend on jobs.
/// Throws ErrorKind::study when an estimator fails on more than
/// failure_limit of the replications.
SimulationReport run_study(const DgpSpec& spec, std::span<const Estimator> estimators,
                           const StudyConfig& config);

enum class TableFormat { csv, markdown };

/// Tables in the reference layout. Several reports (same DGP, mode and
/// estimators, different n) become side-by-side column groups. Estimation
/// tables give the GLS row in levels and other rows as ratios to it.
std::string emit_table(std::span<const SimulationReport> reports, TableFormat format);

nlohmann::json to_json(const SimulationReport& report);

}  // namespace monogls
