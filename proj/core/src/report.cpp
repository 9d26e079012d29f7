#include <cmath>
#include <cstdio>

#include "monogls/error.hpp"
#include "monogls/montecarlo.hpp"

namespace monogls {

namespace {

std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

struct Column {
  std::string csv_name;
  std::string md_name;
};

}  // namespace

std::string emit_table(std::span<const SimulationReport> reports, TableFormat fmt) {
  if (reports.empty()) throw Error(ErrorKind::parameter, "no reports to tabulate");
  const SimulationReport& first = reports.front();
  for (const auto& r : reports) {
    if (r.mode != first.mode || r.estimators != first.estimators ||
        r.spec.dim() != first.spec.dim()) {
      throw Error(ErrorKind::parameter, "reports in one table must share mode and estimators");
    }
  }
  const bool inference = first.mode == StudyMode::inference;
  const std::size_t ncoef = static_cast<std::size_t>(first.spec.dim()) + 1;

  std::vector<Column> columns;
  for (const auto& r : reports) {
    const std::string n = std::to_string(r.spec.n);
    if (inference) {
      columns.push_back({"ec_n" + n, "EC (n=" + n + ")"});
      columns.push_back({"al_n" + n, "AL (n=" + n + ")"});
    } else {
      columns.push_back({"rmse_n" + n, "RMSE (n=" + n + ")"});
      columns.push_back({"mae_n" + n, "MAE (n=" + n + ")"});
    }
  }

  std::string out;
  const bool csv = fmt == TableFormat::csv;
  if (csv) {
    out += "estimator,coef";
    for (const auto& c : columns) out += "," + c.csv_name;
    out += '\n';
  } else {
    out += "| Estimator | Coef |";
    for (const auto& c : columns) out += " " + c.md_name + " |";
    out += "\n|---|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) out += "---:|";
    out += '\n';
  }
  const char* number = csv ? "%.6g" : "%.3f";

  for (const auto& est : first.estimators) {
    for (std::size_t j = 0; j < ncoef; ++j) {
      const std::string coef = "beta" + std::to_string(j);
      std::vector<std::string> values;
      for (const auto& r : reports) {
        const Cell& c = r.cell(est, j);
        if (inference) {
          values.push_back(c.coverage ? format(number, *c.coverage) : "");
          values.push_back(c.avg_length ? format(number, *c.avg_length) : "");
          continue;
        }
        double rmse = c.rmse, mae = c.mae;
        const bool has_gls =
            std::find(r.estimators.begin(), r.estimators.end(), "GLS") != r.estimators.end();
        if (has_gls && est != "GLS") {
          const Cell& g = r.cell("GLS", j);
          rmse /= g.rmse;
          mae /= g.mae;
        }
        values.push_back(format(number, rmse));
        values.push_back(format(number, mae));
      }
      if (csv) {
        out += est + "," + coef;
        for (const auto& v : values) out += "," + v;
      } else {
        out += "| " + (j == 0 ? est : std::string()) + " | " + coef + " |";
        for (const auto& v : values) out += " " + v + " |";
      }
      out += '\n';
    }
  }
  return out;
}

nlohmann::json to_json(const SimulationReport& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    nlohmann::json j = {{"estimator", c.estimator}, {"coef", c.coef},
                        {"rmse", c.rmse},           {"mae", c.mae},
                        {"rmse_mcse", c.rmse_mcse}, {"mae_mcse", c.mae_mcse},
                        {"failures", c.failures}};
    if (c.coverage) {
      j["coverage"] = *c.coverage;
      j["coverage_mcse"] = *c.coverage_mcse;
      j["avg_length"] = *c.avg_length;
      j["length_mcse"] = *c.length_mcse;
    }
    cells.push_back(std::move(j));
  }
  return {{"spec", {{"dgp", report.spec.name()}, {"n", report.spec.n}}},
          {"mode", to_string(report.mode)},
          {"seed", report.seed},
          {"reps", report.reps},
          {"cells", std::move(cells)}};
}

}  // namespace monogls
