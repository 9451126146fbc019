// Exercises the shared library through its C header only.
#include <doctest.h>

#include <oasd/oasd.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace {

struct Arrays {
  std::vector<double> y, d, x;
  size_t n = 0, k = 0;
};

Arrays linear_sample(size_t n, size_t k, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Arrays a;
  a.n = n;
  a.k = k;
  for (size_t i = 0; i < n; ++i) {
    double index = 0.0;
    for (size_t j = 0; j < k; ++j) {
      const double xj = z(rng);
      a.x.push_back(xj);
      index += xj / static_cast<double>(j + 1);
    }
    const double d = 0.5 * index + z(rng);
    a.d.push_back(d);
    a.y.push_back(d + index + z(rng));
  }
  return a;
}

oasd_config* config(const char* command, std::initializer_list<std::pair<const char*, const char*>> kv) {
  oasd_config* cfg = nullptr;
  REQUIRE(oasd_config_create(command, &cfg) == OASD_OK);
  for (const auto& [k, v] : kv) REQUIRE(oasd_config_set(cfg, k, v) == OASD_OK);
  return cfg;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(oasd_version()) == "1.0.0");
  CHECK(std::string(oasd_status_name(OASD_OK)) == "ok");
  CHECK(std::string(oasd_status_name(OASD_ERR_CONFIG)) == "config error");
  CHECK(std::string(oasd_status_name(OASD_ERR_IO)) == "i/o error");
}

TEST_CASE("datasets") {
  const Arrays a = linear_sample(40, 2, 1);
  oasd_dataset* data = nullptr;
  REQUIRE(oasd_dataset_from_arrays(a.n, a.k, a.y.data(), a.d.data(), a.x.data(), &data) == OASD_OK);
  CHECK(oasd_dataset_rows(data) == 40);
  CHECK(oasd_dataset_covariates(data) == 2);
  CHECK(oasd_dataset_warning_count(data) == 1);  // n < 50
  CHECK(oasd_dataset_warning(data, 5) == nullptr);
  oasd_dataset_free(data);

  std::vector<double> bad = a.y;
  bad[3] = std::nan("");
  data = reinterpret_cast<oasd_dataset*>(0x1);
  CHECK(oasd_dataset_from_arrays(a.n, a.k, bad.data(), a.d.data(), a.x.data(), &data) == OASD_ERR_DATA);
  CHECK(data == nullptr);
  CHECK(std::strstr(oasd_last_error(), "row 3") != nullptr);

  CHECK(oasd_dataset_from_arrays(0, 0, nullptr, nullptr, nullptr, &data) == OASD_ERR_INVALID_ARGUMENT);
  CHECK(oasd_dataset_from_arrays(5, 1, a.y.data(), a.d.data(), nullptr, &data) == OASD_ERR_INVALID_ARGUMENT);
  CHECK(oasd_dataset_load("/nonexistent/file.csv", "y", "d", nullptr, &data) == OASD_ERR_IO);
  CHECK(std::strlen(oasd_last_error()) > 0);

  const auto path = std::filesystem::temp_directory_path() / "oasd_c_api.csv";
  std::ofstream(path) << "y,d,a,b\n1,2,3,4\n5,6,7,8\n";
  REQUIRE(oasd_dataset_load(path.c_str(), "y", "d", "b", &data) == OASD_OK);
  CHECK(oasd_dataset_covariates(data) == 1);
  CHECK(std::strstr(oasd_dataset_summary(data), "2 rows") != nullptr);
  oasd_dataset_free(data);

  // Freeing null handles is a no-op.
  oasd_dataset_free(nullptr);
  oasd_config_free(nullptr);
  oasd_estimate_free(nullptr);
  oasd_simulation_free(nullptr);
  oasd_derivative_free(nullptr);
}

TEST_CASE("configuration") {
  oasd_config* cfg = nullptr;
  CHECK(oasd_config_create("fit", &cfg) == OASD_ERR_CONFIG);
  cfg = config("estimate", {{"input", "data.csv"}, {"covariates", "x1,x2"}});
  CHECK(oasd_config_set(cfg, "rd2", "0.2") == OASD_ERR_CONFIG);
  CHECK(std::strstr(oasd_last_error(), "rd2") != nullptr);
  CHECK(oasd_config_set(cfg, nullptr, "1") == OASD_ERR_INVALID_ARGUMENT);
  CHECK(std::string(oasd_config_get(cfg, "input")) == "data.csv");
  CHECK(std::string(oasd_config_get(cfg, "covariates")) == "x1,x2");
  CHECK(oasd_config_get(cfg, "bogus") == nullptr);
  CHECK(oasd_config_validate(cfg) == OASD_OK);
  CHECK(oasd_config_set(cfg, "alpha", "0.7") == OASD_OK);
  CHECK(oasd_config_validate(cfg) == OASD_ERR_CONFIG);
  CHECK(oasd_config_load_file(cfg, "/nonexistent.conf") == OASD_ERR_IO);
  oasd_config_free(cfg);
}

TEST_CASE("estimate through the C interface") {
  const Arrays a = linear_sample(300, 3, 2);
  oasd_dataset* data = nullptr;
  REQUIRE(oasd_dataset_from_arrays(a.n, a.k, a.y.data(), a.d.data(), a.x.data(), &data) == OASD_OK);
  oasd_config* cfg = config("estimate", {{"input", "-"},
                                         {"seed", "5"},
                                         {"bootstrap", "200"},
                                         {"intervals", "q0.2:q0.5,q0.5:q0.8"}});
  oasd_estimate* est = nullptr;
  REQUIRE(oasd_run_estimate(cfg, data, &est) == OASD_OK);
  CHECK(oasd_estimate_seed(est) == 5);
  REQUIRE(oasd_estimate_interval_count(est) == 2);
  for (size_t i = 0; i < 2; ++i) {
    oasd_interval_result r;
    REQUIRE(oasd_estimate_interval(est, i, &r) == OASD_OK);
    CHECK(r.usable == 1);
    CHECK(r.y1 < r.y2);
    // Constant unit effect: estimates land near one.
    CHECK(std::fabs(r.theta_adml - 1.0) < 5.0 * r.se_adml + 0.2);
    CHECK(r.band_adml_lo <= r.ci_adml_lo);
    CHECK(r.ci_adml_hi <= r.band_adml_hi);
  }
  oasd_interval_result r;
  CHECK(oasd_estimate_interval(est, 2, &r) == OASD_ERR_INVALID_ARGUMENT);

  const std::string json = oasd_estimate_render(est, "json");
  CHECK(json.find("\"seed\": 5") != std::string::npos);
  CHECK(std::string(oasd_estimate_render(est, "table")).find("theta_adml") != std::string::npos);
  CHECK(oasd_estimate_render(est, "yaml") == nullptr);

  const auto prefix = std::filesystem::temp_directory_path() / "oasd_c_api_out";
  CHECK(oasd_estimate_write(est, prefix.c_str(), "csv") == OASD_OK);
  CHECK(std::filesystem::exists(prefix.string() + ".csv"));

  // Reproducible for a fixed seed.
  oasd_estimate* again = nullptr;
  REQUIRE(oasd_run_estimate(cfg, data, &again) == OASD_OK);
  CHECK(json == oasd_estimate_render(again, "json"));

  // A config for another command is refused.
  oasd_config* sim = config("simulate", {});
  oasd_estimate* wrong = nullptr;
  CHECK(oasd_run_estimate(sim, data, &wrong) == OASD_ERR_CONFIG);
  CHECK(wrong == nullptr);

  oasd_config_free(sim);
  oasd_estimate_free(again);
  oasd_estimate_free(est);
  oasd_config_free(cfg);
  oasd_dataset_free(data);
}

TEST_CASE("simulation and derivative comparison") {
  oasd_config* cfg = config("simulate", {{"seed", "3"}, {"reps", "1"}, {"n", "300"}, {"K", "4"}});
  oasd_simulation* sim = nullptr;
  REQUIRE(oasd_run_simulate(cfg, &sim) == OASD_OK);
  CHECK(oasd_simulation_seed(sim) == 3);
  REQUIRE(oasd_simulation_row_count(sim) == 18);  // 9 bands x 2 estimators
  oasd_mc_cell cell;
  REQUIRE(oasd_simulation_row(sim, 1, &cell) == OASD_OK);
  CHECK(std::string(cell.band) == "5%-15%");
  CHECK(std::string(cell.estimator) == "adml");
  CHECK(cell.rd2 == 0.1);
  CHECK(oasd_simulation_flag_count(sim) >= 1);  // a single replication is flagged
  CHECK(std::string(oasd_simulation_flag(sim, 0)).rfind("cell (0.1, 0.1): ", 0) == 0);
  CHECK(oasd_simulation_flag(sim, 99) == nullptr);
  CHECK(std::string(oasd_simulation_render(sim, "csv")).rfind("rd2,ry2,band", 0) == 0);
  oasd_simulation_free(sim);
  oasd_config_free(cfg);

  cfg = config("compare-derivative", {{"seed", "4"}, {"reps", "1"}, {"p", "5"}, {"tau", "0.25,0.75"}});
  oasd_derivative* cmp = nullptr;
  REQUIRE(oasd_run_compare_derivative(cfg, &cmp) == OASD_OK);
  REQUIRE(oasd_derivative_row_count(cmp) == 2);
  double tau = 0.0, partial = -1.0, direct = -1.0;
  REQUIRE(oasd_derivative_row(cmp, 1, &tau, &partial, &direct) == OASD_OK);
  CHECK(tau == 0.75);
  CHECK(partial >= 0.0);
  CHECK(direct >= 0.0);
  CHECK(oasd_derivative_row(cmp, 2, &tau, &partial, &direct) == OASD_ERR_INVALID_ARGUMENT);
  oasd_derivative_free(cmp);
  oasd_config_free(cfg);

  cfg = config("simulate", {{"ry2", "1.0"}});
  CHECK(oasd_run_simulate(cfg, &sim) == OASD_ERR_CONFIG);
  oasd_config_free(cfg);
}
