#include <doctest.h>

#include "oasd/run.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

using namespace oasd;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "oasd_test_run";
  fs::create_directories(dir);
  return dir;
}

std::string write_text(const std::string& name, const std::string& text) {
  const fs::path path = scratch_dir() / name;
  std::ofstream(path) << text;
  return path.string();
}

std::string write_main_csv(const std::string& name, Index n, Index k, std::uint64_t seed) {
  MainDgpConfig cfg;
  cfg.n = n;
  cfg.num_covariates = k;
  cfg.seed = seed;
  const Dataset data = draw_main_dgp(cfg);
  std::ostringstream out;
  out << "y,d";
  for (Index j = 0; j < k; ++j) out << ",x" << j + 1;
  out << "\n";
  for (Index i = 0; i < n; ++i) {
    out << num(data.y[i]) << "," << num(data.d[i]);
    for (Index j = 0; j < k; ++j) out << "," << num(data.x(i, j));
    out << "\n";
  }
  return write_text(name, out.str());
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("commands") {
  CHECK(parse_command("estimate") == Command::Estimate);
  CHECK(parse_command("simulate") == Command::Simulate);
  CHECK(parse_command("compare-derivative") == Command::CompareDerivative);
  CHECK(to_string(Command::CompareDerivative) == "compare-derivative");
  CHECK(kind_of([] { parse_command("fit"); }) == ErrorKind::Config);
}

TEST_CASE("setting keys") {
  RunConfig cfg(Command::Estimate);
  cfg.set("riemann_steps", "200");
  cfg.set("B", "300");
  cfg.set("covariates", "x1, x3 ,");
  cfg.set("riesz-post-lasso", "false");
  CHECK(cfg.riemann_steps == 200);
  CHECK(cfg.bootstrap == 300);
  CHECK(cfg.covariates == std::vector<std::string>{"x1", "x3"});
  CHECK_FALSE(cfg.riesz_post_lasso);
  CHECK(kind_of([&] { cfg.set("rd2", "0.2"); }) == ErrorKind::Config);      // simulate only
  CHECK(kind_of([&] { cfg.set("colour", "red"); }) == ErrorKind::Config);   // unknown
  CHECK(kind_of([&] { cfg.set("ell", "two"); }) == ErrorKind::Config);      // not a number
  CHECK(kind_of([&] { cfg.set("seed", "-1"); }) == ErrorKind::Config);

  RunConfig sim(Command::Simulate);
  sim.set("K", "12");
  CHECK(sim.num_covariates == 12);
  RunConfig der(Command::CompareDerivative);
  der.set("p", "20");
  CHECK(der.dim == 20);
  CHECK(kind_of([&] { der.set("ell", "2"); }) == ErrorKind::Config);
}

TEST_CASE("config files and precedence") {
  const std::string path = write_text("run.conf",
                                      "# comment line\n"
                                      "seed = 17\n"
                                      "rd2 = 0.3   # trailing comment\n"
                                      "\n"
                                      "reps = 4\n");
  RunConfig cfg(Command::Simulate);
  cfg.load_file(path);
  CHECK(cfg.seed == 17u);
  CHECK(cfg.rd2 == 0.3);
  cfg.set("reps", "9");  // later settings win
  CHECK(cfg.reps == 9);
  CHECK(cfg.resolved_seed() == 17u);

  const std::string bad = write_text("bad.conf", "seed = 1\nnot a pair\n");
  try {
    RunConfig other(Command::Simulate);
    other.load_file(bad);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  CHECK(kind_of([] { RunConfig(Command::Simulate).load_file("/nonexistent/oasd.conf"); }) == ErrorKind::Io);
}

TEST_CASE("validation") {
  RunConfig est(Command::Estimate);
  CHECK(kind_of([&] { est.validate(); }) == ErrorKind::Config);  // no input
  est.set("input", "data.csv");
  est.validate();
  est.set("estimator", "both-ish");
  CHECK(kind_of([&] { est.validate(); }) == ErrorKind::Config);

  RunConfig sim(Command::Simulate);
  sim.validate();
  sim.set("ry2", "1.0");
  CHECK(kind_of([&] { sim.validate(); }) == ErrorKind::Config);
  sim.set("ry2", "0.2");
  sim.set("oracle-n", "10000");
  CHECK(kind_of([&] { sim.validate(); }) == ErrorKind::Config);

  RunConfig der(Command::CompareDerivative);
  der.set("design", "v");
  CHECK(kind_of([&] { der.validate(); }) == ErrorKind::Config);
  der.set("design", "ii");
  der.set("tau", "0.5,1.5");
  CHECK(kind_of([&] { der.validate(); }) == ErrorKind::Config);
}

TEST_CASE("interval syntax") {
  const auto specs = parse_intervals("q0.1:q0.3, -1:2.5", false);
  REQUIRE(specs.size() == 2);
  CHECK(specs[0].quantile);
  CHECK(specs[0].lo == 0.1);
  CHECK(specs[0].text == "q0.1:q0.3");
  CHECK_FALSE(specs[1].quantile);
  CHECK(specs[1].lo == -1.0);
  CHECK(specs[1].hi == 2.5);
  CHECK(parse_intervals("0.2:0.4", true)[0].quantile);
  for (const char* bad : {"q0.1:0.3", "2:1", "q0.5:q1.5", "1-2", "a:b", ""}) {
    CHECK(kind_of([&] { parse_intervals(bad, false); }) == ErrorKind::Config);
  }
}

TEST_CASE("loading delimited data") {
  SUBCASE("small file") {
    const std::string path = write_text("small.csv", "y,d,x1\n1.5,0.2,3\n-2,1,4\n0.25,0.5,-1\n");
    const LoadedDataset loaded = load_dataset(path, "y", "d");
    CHECK(loaded.data.n() == 3);
    CHECK(loaded.data.num_covariates() == 1);
    CHECK(loaded.data.y[1] == -2.0);
    CHECK(loaded.data.d[2] == 0.5);
    CHECK(loaded.data.x(2, 0) == -1.0);
    CHECK(loaded.data.covariate_names == std::vector<std::string>{"x1"});
    REQUIRE(loaded.warnings.size() == 1);
    CHECK(loaded.warnings[0].find("n < 50") != std::string::npos);
  }
  SUBCASE("missing value names its row and column") {
    const std::string path = write_text("na.csv", "y,d,x1\n1,2,3\n4,5,NA\n");
    try {
      load_dataset(path, "y", "d");
      FAIL("expected a data error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Data);
      CHECK(std::string(e.what()).find("row 2, column x1") != std::string::npos);
    }
  }
  SUBCASE("column selection and separators") {
    const std::string path = write_text("tab.tsv", "out\ttreat\ta\tb\n1\t2\t3\t4\n5\t6\t7\t8\n");
    const LoadedDataset loaded = load_dataset(path, "out", "treat", {"b"});
    CHECK(loaded.data.num_covariates() == 1);
    CHECK(loaded.data.x(1, 0) == 8.0);
    CHECK(kind_of([&] { load_dataset(path, "out", "missing"); }) == ErrorKind::Data);
    CHECK(kind_of([&] { load_dataset(path, "out", "out"); }) == ErrorKind::Data);
    CHECK(kind_of([] { load_dataset("/nonexistent/data.csv", "y", "d"); }) == ErrorKind::Io);
  }
  SUBCASE("ragged rows are rejected") {
    const std::string path = write_text("ragged.csv", "y,d\n1,2\n3\n");
    CHECK(kind_of([&] { load_dataset(path, "y", "d"); }) == ErrorKind::Data);
  }
  SUBCASE("500 x 32 file gives 30 covariates") {
    const std::string path = write_main_csv("main.csv", 500, 30, 4);
    const LoadedDataset loaded = load_dataset(path, "y", "d");
    CHECK(loaded.data.n() == 500);
    CHECK(loaded.data.num_covariates() == 30);
    CHECK(loaded.warnings.empty());
  }
}

TEST_CASE("shortest round-trip numbers") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, 0.0}) CHECK(std::stod(num(v)) == v);
  CHECK(num(0.1) == "0.1");
  CHECK(num(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("estimate end to end on a small design") {
  const std::string path = write_main_csv("est.csv", 400, 5, 6);
  const LoadedDataset loaded = load_dataset(path, "y", "d");
  RunConfig cfg(Command::Estimate);
  cfg.set("input", path);
  cfg.set("seed", "21");
  cfg.set("bootstrap", "200");
  cfg.set("intervals", "q0.2:q0.4,q0.4:q0.6,q0.6:q0.8");
  const EstimateReport a = run_estimate(loaded.data, cfg);
  REQUIRE(a.rows.size() == 3);
  CHECK(a.basis_dimension == 27);
  for (const auto& r : a.rows) {
    REQUIRE(r.usable);
    CHECK(r.ci_adml_lo <= r.theta_adml);
    CHECK(r.theta_adml <= r.ci_adml_hi);
    CHECK(r.band_adml_lo <= r.ci_adml_lo);
    CHECK(r.band_adml_hi >= r.ci_adml_hi);
    CHECK(r.p_hat == doctest::Approx(0.2).epsilon(0.02));
  }
  CHECK(a.homogeneity_adml.has_value());
  CHECK(a.critical_adml >= 1.9);

  // Same seed, same bytes.
  const EstimateReport b = run_estimate(loaded.data, cfg);
  CHECK(format_estimate_json(a) == format_estimate_json(b));
  CHECK(format_estimate_table(a) == format_estimate_table(b));

  const auto j = nlohmann::json::parse(format_estimate_json(a));
  CHECK(j["seed"] == 21);
  CHECK(j["intervals"].size() == 3);
  CHECK(j["intervals"][0].contains("adml"));
  CHECK(j["intervals"][0].contains("naive"));
  CHECK(j["intervals"][1]["adml"]["theta"].get<double>() == a.rows[1].theta_adml);
  CHECK_FALSE(j.contains("runtime"));

  SUBCASE("single estimator drops the other columns") {
    RunConfig only = cfg;
    only.set("estimator", "adml");
    const EstimateReport c = run_estimate(loaded.data, only);
    const std::string table = format_estimate_table(c);
    CHECK(table.find("theta_naive") == std::string::npos);
    CHECK(table.find("theta_adml") != std::string::npos);
    CHECK(format_estimate_csv(c).find("theta_naive") == std::string::npos);
    CHECK_FALSE(nlohmann::json::parse(format_estimate_json(c))["intervals"][0].contains("naive"));
    CHECK(c.rows[0].theta_adml == a.rows[0].theta_adml);
  }
  SUBCASE("an interval outside the data is flagged, not fatal") {
    RunConfig wide = cfg;
    const double top = loaded.data.y.maxCoeff();
    wide.set("intervals", "q0.4:q0.6," + num(top + 1.0) + ":" + num(top + 2.0));
    const EstimateReport c = run_estimate(loaded.data, wide);
    CHECK(c.rows[0].usable);
    CHECK_FALSE(c.rows[1].usable);
    CHECK_FALSE(c.rows[1].flag.empty());
    CHECK_FALSE(c.homogeneity_adml.has_value());
  }
}

TEST_CASE("writers") {
  const fs::path prefix = scratch_dir() / "nested" / "out";
  const auto written = write_outputs(prefix.string(), "csv", "table\n", "{}\n", "a,b\n");
  REQUIRE(written.size() == 2);
  CHECK(fs::exists(prefix.string() + ".txt"));
  CHECK(fs::exists(prefix.string() + ".csv"));
  CHECK(kind_of([] { write_outputs("", "json", "", "", ""); }) == ErrorKind::Config);

  DerivativeComparison d;
  d.config.p = 5;
  d.tau = {0.5};
  d.mean_dist_partial = {0.01};
  d.mean_dist_direct = {0.02};
  d.reps_requested = d.reps_used = 1;
  const auto j = nlohmann::json::parse(format_derivative_json(d));
  CHECK(j["rows"][0]["tau"] == 0.5);
  CHECK(j["design"] == "i");
  CHECK(format_derivative_csv(d) == "tau,mean_dist_partial,mean_dist_direct\n0.5,0.01,0.02\n");
}
