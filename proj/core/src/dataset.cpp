#include "monogls/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "linalg.hpp"
#include "monogls/error.hpp"

namespace monogls {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::schema: return "schema";
    case ErrorKind::parse: return "parse";
    case ErrorKind::size: return "size";
    case ErrorKind::value: return "value";
    case ErrorKind::index: return "index";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::singular_design: return "singular design";
    case ErrorKind::degrees_of_freedom: return "degrees of freedom";
    case ErrorKind::rank: return "rank";
    case ErrorKind::insufficient_data: return "insufficient data";
    case ErrorKind::degenerate_covariate: return "degenerate covariate";
    case ErrorKind::optimization: return "optimization";
    case ErrorKind::study: return "study";
  }
  return "unknown";
}

const char* to_string(ColumnRole role) noexcept {
  switch (role) {
    case ColumnRole::response: return "response";
    case ColumnRole::regressor: return "regressor";
    case ColumnRole::control: return "control";
    case ColumnRole::het_only: return "het";
  }
  return "unknown";
}

namespace {

std::vector<std::string> default_names(const std::string& stem, Eigen::Index count) {
  std::vector<std::string> out;
  for (Eigen::Index j = 0; j < count; ++j) out.push_back(stem + std::to_string(j + 1));
  return out;
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::value, std::string(what) + " contains non-finite entries");
  }
}

}  // namespace

Dataset::Dataset(Eigen::VectorXd y, Eigen::MatrixXd x_reg, Eigen::MatrixXd z,
                 std::vector<Eigen::Index> het_cols, Eigen::MatrixXd het_only,
                 Names names, bool intercept)
    : y_(std::move(y)),
      x_reg_(std::move(x_reg)),
      z_(std::move(z)),
      het_only_(std::move(het_only)),
      het_cols_(std::move(het_cols)),
      names_(std::move(names)),
      intercept_(intercept) {
  const Eigen::Index n = y_.size();
  if (n < 2) throw Error(ErrorKind::size, "dataset needs at least 2 observations");
  // Empty blocks may come in as 0x0; normalize to n x 0.
  if (x_reg_.size() == 0) x_reg_.resize(n, 0);
  if (z_.size() == 0) z_.resize(n, 0);
  if (het_only_.size() == 0) het_only_.resize(n, 0);
  if (x_reg_.rows() != n || z_.rows() != n || het_only_.rows() != n) {
    throw Error(ErrorKind::size, "all columns must have the length of y");
  }
  require_finite(y_, "y");
  require_finite(x_reg_, "x_reg");
  require_finite(z_, "z");
  require_finite(het_only_, "het_only");

  if (names_.regressors.empty()) names_.regressors = default_names("x", p());
  if (names_.controls.empty()) names_.controls = default_names("z", q());
  if (names_.het_only.empty()) names_.het_only = default_names("h", het_only_.cols());
  if (static_cast<Eigen::Index>(names_.regressors.size()) != p() ||
      static_cast<Eigen::Index>(names_.controls.size()) != q() ||
      static_cast<Eigen::Index>(names_.het_only.size()) != het_only_.cols()) {
    throw Error(ErrorKind::schema, "column names do not match column counts");
  }

  const Eigen::Index combined = p() + q() + het_only_.cols();
  std::set<Eigen::Index> seen;
  for (Eigen::Index c : het_cols_) {
    if (c < 0 || c >= combined) {
      throw Error(ErrorKind::schema, "het column index " + std::to_string(c) + " out of range");
    }
    if (!seen.insert(c).second) {
      throw Error(ErrorKind::schema, "het column index " + std::to_string(c) + " repeated");
    }
  }
  if (k() == 0) throw Error(ErrorKind::schema, "model has no coefficients");
}

Eigen::MatrixXd Dataset::het_matrix() const {
  Eigen::MatrixXd out(n(), static_cast<Eigen::Index>(het_cols_.size()));
  for (std::size_t j = 0; j < het_cols_.size(); ++j) {
    Eigen::Index c = het_cols_[j];
    if (c < p()) {
      out.col(j) = x_reg_.col(c);
    } else if (c < p() + q()) {
      out.col(j) = z_.col(c - p());
    } else {
      out.col(j) = het_only_.col(c - p() - q());
    }
  }
  return out;
}

Eigen::VectorXd Dataset::het_vector() const {
  if (het_cols_.size() != 1) {
    throw Error(ErrorKind::schema, "expected exactly one variance covariate, got " +
                                       std::to_string(het_cols_.size()));
  }
  return het_matrix().col(0);
}

std::vector<std::string> Dataset::het_names() const {
  std::vector<std::string> out;
  for (Eigen::Index c : het_cols_) {
    if (c < p()) {
      out.push_back(names_.regressors[c]);
    } else if (c < p() + q()) {
      out.push_back(names_.controls[c - p()]);
    } else {
      out.push_back(names_.het_only[c - p() - q()]);
    }
  }
  return out;
}

std::vector<std::string> Dataset::coefficient_names() const {
  std::vector<std::string> out;
  if (intercept_) out.emplace_back("(Intercept)");
  out.insert(out.end(), names_.regressors.begin(), names_.regressors.end());
  out.insert(out.end(), names_.controls.begin(), names_.controls.end());
  return out;
}

Dataset Dataset::with_response(Eigen::VectorXd y) const {
  return Dataset(std::move(y), x_reg_, z_, het_cols_, het_only_, names_, intercept_);
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd y(m);
  Eigen::MatrixXd x(m, p()), z(m, q()), h(m, het_only_.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index r = rows[i];
    if (r < 0 || r >= n()) throw Error(ErrorKind::index, "row index out of range");
    y(i) = y_(r);
    x.row(i) = x_reg_.row(r);
    z.row(i) = z_.row(r);
    h.row(i) = het_only_.row(r);
  }
  return Dataset(std::move(y), std::move(x), std::move(z), het_cols_, std::move(h),
                 names_, intercept_);
}

Eigen::MatrixXd detail::raw_design(const Dataset& d) {
  Eigen::MatrixXd W(d.n(), d.k());
  Eigen::Index c = 0;
  if (d.intercept()) W.col(c++).setOnes();
  W.middleCols(c, d.p()) = d.x_reg();
  W.middleCols(c + d.p(), d.q()) = d.z();
  return W;
}

Eigen::MatrixXd design_matrix(const Dataset& d) {
  Eigen::MatrixXd W = detail::raw_design(d);
  detail::full_rank_qr(W, "design matrix");
  return W;
}

// ---------------------------------------------------------------------------
// CSV

const Eigen::VectorXd& Table::column(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(ErrorKind::schema, "missing column: " + name);
  return columns[static_cast<std::size_t>(it - names.begin())];
}

bool Table::has(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

Table parse_csv_table(const std::string& text) {
  std::vector<std::string_view> lines;
  std::string_view rest(text);
  while (!rest.empty()) {
    std::size_t pos = rest.find('\n');
    std::string_view line = rest.substr(0, pos);
    if (!trim(line).empty()) lines.push_back(line);
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  if (lines.empty()) throw Error(ErrorKind::parse, "CSV input is empty (no header row)");

  Table table;
  for (std::string_view h : split(lines.front())) {
    if (h.empty()) throw Error(ErrorKind::parse, "empty column name in header");
    std::string name(h);
    if (table.has(name)) throw Error(ErrorKind::schema, "duplicate column: " + name);
    table.names.push_back(std::move(name));
  }
  const std::size_t cols = table.names.size();
  const auto rows = static_cast<Eigen::Index>(lines.size() - 1);
  table.columns.assign(cols, Eigen::VectorXd(rows));

  for (Eigen::Index r = 0; r < rows; ++r) {
    auto cells = split(lines[static_cast<std::size_t>(r) + 1]);
    if (cells.size() != cols) {
      throw Error(ErrorKind::parse, "row " + std::to_string(r + 1) + ": expected " +
                                        std::to_string(cols) + " cells, got " +
                                        std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      std::string_view cell = cells[c];
      if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() ||
          !std::isfinite(v)) {
        throw Error(ErrorKind::parse, "row " + std::to_string(r + 1) + ", column '" +
                                          table.names[c] + "': cannot parse '" +
                                          std::string(cells[c]) + "' as a finite number");
      }
      table.columns[c](r) = v;
    }
  }
  return table;
}

Table read_csv_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::schema, "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv_table(ss.str());
}

Dataset dataset_from_table(const Table& table, const CsvSchema& schema) {
  const Eigen::Index n = table.rows();
  auto gather = [&](const std::vector<std::string>& cols) {
    Eigen::MatrixXd m(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) m.col(j) = table.column(cols[j]);
    return m;
  };
  Eigen::VectorXd y = table.column(schema.response);
  Eigen::MatrixXd x = gather(schema.regressors);
  Eigen::MatrixXd z = gather(schema.controls);

  std::vector<Eigen::Index> het_cols;
  std::vector<std::string> het_only_names;
  const auto p = static_cast<Eigen::Index>(schema.regressors.size());
  const auto q = static_cast<Eigen::Index>(schema.controls.size());
  for (const auto& h : schema.het) {
    auto in = [&](const std::vector<std::string>& v) {
      return static_cast<Eigen::Index>(std::find(v.begin(), v.end(), h) - v.begin());
    };
    if (Eigen::Index i = in(schema.regressors); i < p) {
      het_cols.push_back(i);
    } else if (Eigen::Index j = in(schema.controls); j < q) {
      het_cols.push_back(p + j);
    } else {
      table.column(h);  // schema error when absent
      het_cols.push_back(p + q + static_cast<Eigen::Index>(het_only_names.size()));
      het_only_names.push_back(h);
    }
  }
  Eigen::MatrixXd h = gather(het_only_names);
  if (n < 2) {
    throw Error(ErrorKind::size, "need at least 2 data rows, got " + std::to_string(n));
  }
  Dataset::Names names{schema.response, schema.regressors, schema.controls,
                       het_only_names};
  return Dataset(std::move(y), std::move(x), std::move(z), std::move(het_cols),
                 std::move(h), std::move(names), schema.intercept);
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  return dataset_from_table(read_csv_table(path), schema);
}

std::string write_csv(const Dataset& d) {
  std::vector<std::string> header{d.names().response};
  std::vector<const Eigen::MatrixXd*> blocks{&d.x_reg(), &d.z(), &d.het_only()};
  for (const auto* names : {&d.names().regressors, &d.names().controls, &d.names().het_only}) {
    header.insert(header.end(), names->begin(), names->end());
  }
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out += ',';
    out += header[j];
  }
  out += '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", d.y()(i));
    out += buf;
    for (const auto* b : blocks) {
      for (Eigen::Index j = 0; j < b->cols(); ++j) {
        std::snprintf(buf, sizeof buf, ",%.17g", (*b)(i, j));
        out += buf;
      }
    }
    out += '\n';
  }
  return out;
}

CsvSchema schema_of(const Dataset& d) {
  return CsvSchema{d.names().response, d.names().regressors, d.names().controls,
                   d.het_names(), d.intercept()};
}

nlohmann::json to_json(const Dataset& d) {
  using nlohmann::json;
  json cols = json::array();
  auto add = [&](const std::string& name, ColumnRole role, const Eigen::VectorXd& v) {
    cols.push_back({{"name", name},
                    {"role", to_string(role)},
                    {"values", std::vector<double>(v.data(), v.data() + v.size())}});
  };
  add(d.names().response, ColumnRole::response, d.y());
  for (Eigen::Index j = 0; j < d.p(); ++j) {
    add(d.names().regressors[j], ColumnRole::regressor, d.x_reg().col(j));
  }
  for (Eigen::Index j = 0; j < d.q(); ++j) {
    add(d.names().controls[j], ColumnRole::control, d.z().col(j));
  }
  for (Eigen::Index j = 0; j < d.het_only().cols(); ++j) {
    add(d.names().het_only[j], ColumnRole::het_only, d.het_only().col(j));
  }
  return {{"n", d.n()}, {"intercept", d.intercept()}, {"het", d.het_names()},
          {"columns", cols}};
}

nlohmann::json to_json(const Coefficients& c) {
  return {{"names", c.names},
          {"values", std::vector<double>(c.theta.data(), c.theta.data() + c.theta.size())}};
}

}  // namespace monogls
