#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "monogls/baselines.hpp"
#include "monogls/dataset.hpp"
#include "monogls/error.hpp"
#include "monogls/isotonic.hpp"
#include "monogls/iv_optimal.hpp"
#include "monogls/linreg.hpp"
#include "monogls/mgls.hpp"
#include "monogls/montecarlo.hpp"
#include "monogls/single_index.hpp"

namespace monogls::cli {

namespace {

struct FitArgs {
  std::string data, y, group, instrument, estimator = "mgls", k = "auto", direction = "auto";
  std::vector<std::string> x, z, het;
  double trim_c = 1.0;
  bool no_floor = false, no_intercept = false;
  int n_starts = 10, bootstrap = 0;
  std::optional<std::uint64_t> seed;
};

struct SimulateArgs {
  int dgp = 0;
  std::size_t n = 100, reps = 1000;
  unsigned jobs = 1;
  std::string mode = "estimation", format = "json", suite;
  std::vector<std::string> estimators;
  int bootstrap = 999;
  std::optional<double> trim_c;
  bool no_floor = false;
  int n_starts = 10;
  std::optional<std::uint64_t> seed;
};

struct IsotonicArgs {
  std::string data, x = "x", y = "y", w, direction = "increasing";
};

/// Thrown for problems with the command line or input files (exit 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::ostream& err) {
  if (flag) return *flag;
  if (const char* env = std::getenv("MONOGLS_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError(std::string("MONOGLS_SEED is not an unsigned integer: ") + env);
    }
  }
  std::random_device rd;
  const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  err << "monogls: no --seed given; using seed " << seed << "\n";
  return seed;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::schema:
    case ErrorKind::parse:
    case ErrorKind::parameter: return usage;
    case ErrorKind::study: return study_breaker;
    default: return estimation;
  }
}

MglsOptions mgls_options(double trim_c, const std::string& direction, bool no_floor) {
  MglsOptions opts;
  opts.trim.c = trim_c;
  opts.direction = parse_direction(direction);
  opts.floor.enabled = !no_floor;
  return opts;
}

nlohmann::json cmd_fit(const FitArgs& a, std::ostream& err) {
  const std::string& est = a.estimator;
  const bool needs_het = est == "mgls" || est == "fgls" || est == "knn";
  if (needs_het && a.het.empty()) {
    throw UsageError("--het is required for --estimator " + est);
  }
  if (est == "iv" && a.instrument.empty()) {
    throw UsageError("--instrument is required for --estimator iv");
  }

  Table table;
  Dataset data = [&] {
    try {
      table = read_csv_table(a.data);
      return dataset_from_table(table, CsvSchema{a.y, a.x, a.z, a.het, !a.no_intercept});
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }();
  auto extra_column = [&](const std::string& name) {
    try {
      return Eigen::VectorXd(table.column(name));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  };
  const MglsOptions opts = mgls_options(a.trim_c, a.direction, a.no_floor);

  nlohmann::json j;
  if (est == "ols") {
    const LinearFit fit = ols(data);
    j = to_json(fit);
    if (a.bootstrap > 0) {
      const BootstrapResult boot =
          wild_bootstrap(fit, data, a.bootstrap, resolve_seed(a.seed, err));
      j["bootstrap"] = {
          {"B", a.bootstrap},
          {"lower", std::vector<double>(boot.lower.data(), boot.lower.data() + boot.lower.size())},
          {"upper", std::vector<double>(boot.upper.data(), boot.upper.data() + boot.upper.size())}};
    }
  } else if (est == "mgls") {
    if (!a.group.empty()) {
      j = to_json(fit_mgls_grouped(data, extra_column(a.group), opts));
    } else if (a.het.size() == 1) {
      j = to_json(fit_mgls(data, opts));
    } else {
      IndexOptions io;
      io.n_starts = a.n_starts;
      io.seed = resolve_seed(a.seed, err);
      const IndexMglsFit fit = fit_mgls_index(data, opts, io);
      j = to_json(fit.mgls);
      j["index"] = to_json(fit.index);
    }
  } else if (est == "fgls") {
    j = to_json(fit_fgls_parametric(data, quadratic_basis(data.het_matrix()), opts.floor));
  } else if (est == "knn") {
    KnnOptions ko;
    ko.floor = opts.floor;
    if (a.k != "auto") {
      try {
        ko.k = static_cast<std::size_t>(std::stoul(a.k));
      } catch (const std::exception&) {
        throw UsageError("--k must be a positive integer or 'auto'");
      }
    }
    j = to_json(fit_fgls_knn(data, ko));
  } else if (est == "iv") {
    j = to_json(fit_iv_mgls(data, extra_column(a.instrument), opts));
  } else {
    throw UsageError("unknown estimator: " + est);
  }
  j["estimator"] = est;
  return j;
}

StudyMode parse_mode(const std::string& s) {
  if (s == "estimation") return StudyMode::estimation;
  if (s == "inference") return StudyMode::inference;
  throw UsageError("unknown mode: " + s);
}

std::string cmd_simulate(const SimulateArgs& a, std::ostream& err) {
  if (a.suite.empty() && a.dgp == 0) throw UsageError("--dgp is required without --suite");
  if (!a.suite.empty() && a.suite != "paper") throw UsageError("unknown suite: " + a.suite);
  if (a.format != "json" && a.format != "csv" && a.format != "markdown") {
    throw UsageError("unknown format: " + a.format);
  }
  StudyConfig config;
  config.reps = a.reps;
  config.seed = resolve_seed(a.seed, err);
  config.jobs = a.jobs;
  config.bootstrap_reps = a.bootstrap;
  // The full suite defaults to the trimming constant that reproduces the
  // reference tables; single studies use the library default.
  const double trim_c = a.trim_c.value_or(a.suite.empty() ? TrimRule{}.c : kReplicationTrimC);
  config.mgls = mgls_options(trim_c, "auto", a.no_floor);
  config.index.n_starts = a.n_starts;

  const bool suite = !a.suite.empty();
  std::vector<int> dgps = suite ? std::vector<int>{1, 2, 3, 4} : std::vector<int>{a.dgp};
  std::vector<StudyMode> modes = suite ? std::vector<StudyMode>{StudyMode::estimation,
                                                                StudyMode::inference}
                                       : std::vector<StudyMode>{parse_mode(a.mode)};
  std::vector<std::size_t> sizes = suite ? std::vector<std::size_t>{50, 100, 500}
                                         : std::vector<std::size_t>{a.n};

  std::string text;
  nlohmann::json all = nlohmann::json::array();
  for (StudyMode mode : modes) {
    for (int dgp : dgps) {
      config.mode = mode;
      std::vector<Estimator> estimators;
      if (a.estimators.empty() || suite) {
        estimators = table_estimators(mode);
      } else {
        for (const auto& s : a.estimators) estimators.push_back(Estimator::parse(s));
      }
      std::vector<SimulationReport> reports;
      for (std::size_t n : sizes) {
        const DgpSpec spec = DgpSpec::make(dgp, n);
        reports.push_back(run_study(spec, estimators, config));
        err << "monogls: " << spec.name() << " n=" << n << " " << to_string(mode) << " "
            << config.reps << " reps in " << reports.back().wall_seconds << " s\n";
        for (const auto& c : reports.back().cells) {
          if (c.failures > 0 && c.coef == 0) {
            err << "monogls: " << c.estimator << " failed on " << c.failures << " reps\n";
          }
        }
      }
      if (a.format == "json") {
        for (const auto& r : reports) all.push_back(to_json(r));
        continue;
      }
      const TableFormat fmt = a.format == "csv" ? TableFormat::csv : TableFormat::markdown;
      if (suite) {
        text += (fmt == TableFormat::csv ? "# " : "## ") + reports.front().spec.name() + " " +
                to_string(mode) + "\n";
        if (fmt == TableFormat::markdown) text += "\n";
      }
      text += emit_table(reports, fmt);
      if (suite) text += "\n";
    }
  }
  if (a.format == "json") return (suite ? all : all.front()).dump(2) + "\n";
  return text;
}

nlohmann::json cmd_isotonic(const IsotonicArgs& a) {
  Table table;
  Eigen::VectorXd x, y, w;
  try {
    table = read_csv_table(a.data);
    if (table.rows() == 0) throw UsageError("input has no data rows");
    x = table.column(a.x);
    y = table.column(a.y);
    if (!a.w.empty()) w = table.column(a.w);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  auto span = [](const Eigen::VectorXd& v) {
    return std::span<const double>(v.data(), static_cast<std::size_t>(v.size()));
  };
  IsotonicFit fit;
  switch (parse_direction(a.direction)) {
    case DirectionChoice::increasing:
      fit = pava(span(x), span(y), span(w), Direction::increasing);
      break;
    case DirectionChoice::decreasing:
      fit = pava(span(x), span(y), span(w), Direction::decreasing);
      break;
    case DirectionChoice::automatic: fit = pava_auto(span(x), span(y), span(w)); break;
  }
  return to_json(fit);
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write " + path);
  f << text;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feasible GLS under monotone heteroskedasticity"};
  app.require_subcommand(1);
  std::string out_path;
  std::uint64_t seed_value = 0;

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit an estimator to CSV data");
  fit_cmd->add_option("--data", fit.data, "CSV file with a header row")->required();
  fit_cmd->add_option("--y", fit.y, "Response column")->required();
  fit_cmd->add_option("--x", fit.x, "Regressor column(s)")->delimiter(',');
  fit_cmd->add_option("--z", fit.z, "Control column(s)")->delimiter(',');
  fit_cmd->add_option("--het", fit.het, "Variance covariate column(s)")->delimiter(',');
  fit_cmd->add_option("--estimator", fit.estimator, "ols | mgls | fgls | knn | iv")
      ->check(CLI::IsMember({"ols", "mgls", "fgls", "knn", "iv"}));
  fit_cmd->add_option("--group", fit.group, "Discrete column for group-wise MGLS");
  fit_cmd->add_option("--instrument", fit.instrument, "Instrument column for iv");
  fit_cmd->add_option("--k", fit.k, "Neighbors for knn, or 'auto'");
  fit_cmd->add_option("--trim-c", fit.trim_c, "Trimming constant c")
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--direction", fit.direction, "auto | increasing | decreasing")
      ->check(CLI::IsMember({"auto", "increasing", "decreasing"}));
  fit_cmd->add_flag("--no-floor", fit.no_floor, "Disable the variance floor");
  fit_cmd->add_flag("--no-intercept", fit.no_intercept, "Drop the intercept");
  fit_cmd->add_option("--n-starts", fit.n_starts, "Index optimizer starts")
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--bootstrap", fit.bootstrap, "Wild bootstrap replicates for ols");
  auto* fit_seed = fit_cmd->add_option("--seed", seed_value, "RNG seed");
  fit_cmd->add_option("--out", out_path, "Output file (default stdout)");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a Monte Carlo study");
  sim_cmd->add_option("--dgp", sim.dgp, "Design 1-4")->check(CLI::Range(1, 4));
  sim_cmd->add_option("--n", sim.n, "Sample size")->check(CLI::Range(2, 100000000));
  sim_cmd->add_option("--reps", sim.reps, "Replications")->check(CLI::Range(1, 100000000));
  auto* sim_seed = sim_cmd->add_option("--seed", seed_value, "RNG seed");
  sim_cmd->add_option("--jobs", sim.jobs, "Worker threads (0 = all cores)");
  sim_cmd->add_option("--mode", sim.mode, "estimation | inference")
      ->check(CLI::IsMember({"estimation", "inference"}));
  sim_cmd->add_option("--estimators", sim.estimators, "Estimator labels, comma separated")
      ->delimiter(',');
  sim_cmd->add_option("--format", sim.format, "json | csv | markdown")
      ->check(CLI::IsMember({"json", "csv", "markdown"}));
  sim_cmd->add_option("--suite", sim.suite, "'paper' runs every DGP at n = 50, 100, 500");
  sim_cmd->add_option("--bootstrap", sim.bootstrap, "Wild bootstrap replicates")
      ->check(CLI::PositiveNumber);
  sim_cmd->add_option("--trim-c", sim.trim_c, "Trimming constant c (default 1, 0.01 with --suite)")
      ->check(CLI::PositiveNumber);
  sim_cmd->add_flag("--no-floor", sim.no_floor, "Disable the MGLS variance floor");
  sim_cmd->add_option("--n-starts", sim.n_starts, "Index optimizer starts")
      ->check(CLI::PositiveNumber);
  sim_cmd->add_option("--out", out_path, "Output file (default stdout)");

  IsotonicArgs iso;
  auto* iso_cmd = app.add_subcommand("isotonic", "Standalone isotonic regression");
  iso_cmd->add_option("--data", iso.data, "CSV file")->required();
  iso_cmd->add_option("--x", iso.x, "Covariate column");
  iso_cmd->add_option("--y", iso.y, "Response column");
  iso_cmd->add_option("--w", iso.w, "Optional weight column");
  iso_cmd->add_option("--direction", iso.direction, "auto | increasing | decreasing")
      ->check(CLI::IsMember({"auto", "increasing", "decreasing"}));
  iso_cmd->add_option("--out", out_path, "Output file (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "monogls: " << e.what() << "\n";
    return usage;
  }

  try {
    if (fit_cmd->parsed()) {
      if (*fit_seed) fit.seed = seed_value;
      emit(cmd_fit(fit, err).dump(2) + "\n", out_path, out);
    } else if (sim_cmd->parsed()) {
      if (*sim_seed) sim.seed = seed_value;
      emit(cmd_simulate(sim, err), out_path, out);
    } else if (iso_cmd->parsed()) {
      emit(cmd_isotonic(iso).dump(2) + "\n", out_path, out);
    }
  } catch (const UsageError& e) {
    err << "monogls: " << e.what() << "\n";
    return usage;
  } catch (const Error& e) {
    err << "monogls: " << to_string(e.kind()) << " error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return ok;
}

}  // namespace monogls::cli
