#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace monogls {

enum class ColumnRole { response, regressor, control, het_only };

const char* to_string(ColumnRole role) noexcept;

struct ColumnNames {
  std::string response = "y";
  std::vector<std::string> regressors;
  std::vector<std::string> controls;
  std::vector<std::string> het_only;
};

/// Response, mean-equation columns X and Z, and the variance covariate(s).
///
/// The variance covariates are addressed by het_cols, which index the
/// combined exogenous block [X | Z | het-only]. A het-only column never
/// enters the mean equation.
class Dataset {
 public:
  using Names = ColumnNames;

  Dataset(Eigen::VectorXd y, Eigen::MatrixXd x_reg, Eigen::MatrixXd z,
          std::vector<Eigen::Index> het_cols = {},
          Eigen::MatrixXd het_only = {}, Names names = {},
          bool intercept = true);

  Eigen::Index n() const { return y_.size(); }
  Eigen::Index p() const { return x_reg_.cols(); }
  Eigen::Index q() const { return z_.cols(); }
  /// Number of mean-equation coefficients.
  Eigen::Index k() const { return (intercept_ ? 1 : 0) + p() + q(); }

  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::MatrixXd& x_reg() const { return x_reg_; }
  const Eigen::MatrixXd& z() const { return z_; }
  const Eigen::MatrixXd& het_only() const { return het_only_; }
  const std::vector<Eigen::Index>& het_cols() const { return het_cols_; }
  bool intercept() const { return intercept_; }
  const Names& names() const { return names_; }

  /// n x len(het_cols) matrix of variance covariates.
  Eigen::MatrixXd het_matrix() const;
  /// Convenience for the univariate case; throws unless exactly one het column.
  Eigen::VectorXd het_vector() const;
  std::vector<std::string> het_names() const;
  std::vector<std::string> coefficient_names() const;

  Dataset with_response(Eigen::VectorXd y) const;
  Dataset subset(const std::vector<Eigen::Index>& rows) const;

 private:
  Eigen::VectorXd y_;
  Eigen::MatrixXd x_reg_;
  Eigen::MatrixXd z_;
  Eigen::MatrixXd het_only_;
  std::vector<Eigen::Index> het_cols_;
  Names names_;
  bool intercept_;
};

struct Coefficients {
  Eigen::VectorXd theta;
  std::vector<std::string> names;
};

struct CovarianceSet {
  std::optional<Eigen::MatrixXd> model_based;
  std::optional<Eigen::MatrixXd> sandwich;
  /// B x k matrix, one resampled coefficient vector per row.
  std::optional<Eigen::MatrixXd> bootstrap_draws;
};

/// W = (1, X', Z')'. Throws singular_design when W lacks full column rank.
Eigen::MatrixXd design_matrix(const Dataset& d);

/// Column-major numeric table read from CSV.
struct Table {
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> columns;

  Eigen::Index rows() const {
    return columns.empty() ? 0 : columns.front().size();
  }
  /// Throws schema error naming the column when absent.
  const Eigen::VectorXd& column(const std::string& name) const;
  bool has(const std::string& name) const;
};

struct CsvSchema {
  std::string response;
  std::vector<std::string> regressors;
  std::vector<std::string> controls;
  /// Columns already listed as regressors/controls are referenced in place;
  /// anything else becomes a het-only column.
  std::vector<std::string> het;
  bool intercept = true;
};

Table read_csv_table(const std::string& path);
Table parse_csv_table(const std::string& text);
Dataset dataset_from_table(const Table& table, const CsvSchema& schema);
Dataset load_csv(const std::string& path, const CsvSchema& schema);

/// Writes every column of d with 17 significant digits; header names follow
/// Dataset::Names.
std::string write_csv(const Dataset& d);
/// Schema that reproduces d when its write_csv output is loaded back.
CsvSchema schema_of(const Dataset& d);

nlohmann::json to_json(const Dataset& d);
nlohmann::json to_json(const Coefficients& c);

}  // namespace monogls
