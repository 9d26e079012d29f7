#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cli.hpp"
#include "monogls/dataset.hpp"
#include "monogls/mgls.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace monogls;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class TempCsv {
 public:
  explicit TempCsv(const std::string& content) {
    path_ = fs::temp_directory_path() /
            ("monogls_cli_" + std::to_string(counter_++) + "_" +
             std::to_string(reinterpret_cast<std::uintptr_t>(this)) + ".csv");
    std::ofstream(path_) << content;
  }
  ~TempCsv() { std::error_code ec; fs::remove(path_, ec); }
  std::string path() const { return path_.string(); }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

std::string hetero_csv(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  std::lognormal_distribution<double> ln;
  std::ostringstream s;
  s.precision(17);
  s << "y,x1,x2\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double a = ln(rng), b = ln(rng);
    const double y = 1 + a + b + std::sqrt(0.1 + 0.3 * a * a + 0.3 * b * b) * nd(rng);
    s << y << "," << a << "," << b << "\n";
  }
  return s.str();
}

}  // namespace

TEST_CASE("fit mgls matches the library bit for bit") {
  TempCsv csv(hetero_csv(120, 4));
  const Result r = run({"fit", "--data", csv.path(), "--y", "y", "--x", "x1", "--het", "x1",
                        "--estimator", "mgls"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  const Dataset d = load_csv(csv.path(), CsvSchema{"y", {"x1"}, {}, {"x1"}, true});
  auto expected = to_json(fit_mgls(d));
  expected["estimator"] = "mgls";
  CHECK(j == expected);
}

TEST_CASE("fit routes by estimator") {
  TempCsv csv(hetero_csv(150, 5));
  SUBCASE("several het columns use the index fit") {
    const Result r = run({"fit", "--data", csv.path(), "--y", "y", "--x", "x1,x2", "--het",
                          "x1,x2", "--estimator", "mgls", "--seed", "1", "--n-starts", "3"});
    REQUIRE(r.code == 0);
    CHECK(nlohmann::json::parse(r.out).contains("index"));
  }
  for (const char* est : {"ols", "fgls", "knn"}) {
    CAPTURE(est);
    const Result r = run({"fit", "--data", csv.path(), "--y", "y", "--x", "x1,x2", "--het",
                          "x1,x2", "--estimator", est});
    CHECK(r.code == 0);
    CHECK(nlohmann::json::parse(r.out)["estimator"] == est);
  }
  SUBCASE("ols bootstrap is reproducible") {
    const std::vector<std::string> args{"fit", "--data", csv.path(), "--y", "y", "--x", "x1",
                                        "--estimator", "ols", "--bootstrap", "99", "--seed", "3"};
    const Result a = run(args), b = run(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(nlohmann::json::parse(a.out)["bootstrap"]["B"] == 99);
  }
  SUBCASE("iv needs an instrument") {
    const Result bad = run({"fit", "--data", csv.path(), "--y", "y", "--x", "x1",
                            "--estimator", "iv"});
    CHECK(bad.code == 2);
    const Result ok = run({"fit", "--data", csv.path(), "--y", "y", "--x", "x1",
                           "--instrument", "x2", "--estimator", "iv"});
    CHECK(ok.code == 0);
  }
}

TEST_CASE("fit usage errors") {
  TempCsv csv(hetero_csv(40, 6));
  const Result missing = run({"fit", "--data", csv.path(), "--y", "y", "--x", "x1",
                              "--estimator", "mgls"});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("--het") != std::string::npos);
  CHECK(run({"fit", "--data", csv.path(), "--y", "nope", "--x", "x1", "--estimator", "ols"}).code == 2);
  CHECK(run({"fit", "--data", "/nonexistent/file.csv", "--y", "y", "--estimator", "ols"}).code == 2);
  CHECK(run({"fit", "--data", csv.path(), "--y", "y", "--x", "x1", "--het", "x1",
             "--estimator", "knn", "--k", "abc"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("estimation failure exits 3") {
  TempCsv csv("y,a,b\n1,1,2\n2,2,4\n3,3,6\n5,4,8\n4,5,10\n");
  const Result r = run({"fit", "--data", csv.path(), "--y", "y", "--x", "a,b", "--estimator", "ols"});
  CHECK(r.code == 3);
  CHECK(!r.err.empty());
}

TEST_CASE("simulate") {
  const std::vector<std::string> args{"simulate", "--dgp", "1", "--n", "50", "--reps", "10",
                                      "--seed", "7", "--estimators", "GLS,OLS,MGLS"};
  const Result a = run(args), b = run(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  const auto j = nlohmann::json::parse(a.out);
  CHECK(j["seed"] == 7);
  CHECK(j["cells"].size() == 6);

  auto csv_args = args;
  csv_args.insert(csv_args.end(), {"--format", "csv"});
  const Result c = run(csv_args);
  CHECK(c.out.rfind("estimator,coef,rmse_n50,mae_n50\n", 0) == 0);

  CHECK(run({"simulate", "--dgp", "9", "--n", "50", "--reps", "5", "--seed", "1"}).code == 2);
  CHECK(run({"simulate", "--n", "50", "--reps", "5", "--seed", "1"}).code == 2);
  CHECK(run({"simulate", "--dgp", "1", "--n", "50", "--reps", "5", "--seed", "1",
             "--estimators", "LASSO"}).code == 2);
  CHECK(run({"simulate", "--dgp", "1", "--n", "20", "--reps", "5", "--seed", "1",
             "--estimators", "GLS,kNN-500"}).code == 4);
}

TEST_CASE("seed from the environment") {
  const std::vector<std::string> args{"simulate", "--dgp", "2", "--n", "30", "--reps", "4",
                                      "--estimators", "GLS"};
  setenv("MONOGLS_SEED", "11", 1);
  const Result a = run(args);
  unsetenv("MONOGLS_SEED");
  auto explicit_args = args;
  explicit_args.insert(explicit_args.end(), {"--seed", "11"});
  CHECK(a.out == run(explicit_args).out);
  const Result r = run(args);
  CHECK(r.err.find("no --seed given") != std::string::npos);
}

TEST_CASE("isotonic") {
  TempCsv csv("x,y\n1,1\n2,3\n3,2\n");
  const Result r = run({"isotonic", "--data", csv.path()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["levels"].get<std::vector<double>>() == std::vector<double>{1, 2.5, 2.5});
  CHECK(j["knots"].get<std::vector<double>>() == std::vector<double>{1, 2, 3});

  const Result a = run({"isotonic", "--data", csv.path(), "--direction", "auto"});
  CHECK(nlohmann::json::parse(a.out)["direction"] == "increasing");

  TempCsv empty("x,y\n");
  CHECK(run({"isotonic", "--data", empty.path()}).code == 2);
}

TEST_CASE("--out writes a file") {
  const auto path = (fs::temp_directory_path() / "monogls_cli_out.json").string();
  const Result r = run({"simulate", "--dgp", "1", "--n", "30", "--reps", "3", "--seed", "2",
                        "--estimators", "GLS", "--out", path});
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  std::ifstream f(path);
  CHECK(nlohmann::json::parse(f)["reps"] == 3);
  fs::remove(path);
}
