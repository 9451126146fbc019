#include <doctest.h>

#include "oasd/simulation.hpp"
#include "oasd/stats.hpp"

#include <cmath>
#include <numbers>
#include <set>

using namespace oasd;

namespace {

Matrix sample_cov(const Matrix& x) {
  const Matrix centered = x.rowwise() - x.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(x.rows());
}

// Share of var(D) explained by X under the linear projection.
double linear_r2(const Vector& d, const Matrix& x) {
  Matrix design(x.rows(), x.cols() + 1);
  design << Vector::Ones(x.rows()), x;
  const Vector coef = design.colPivHouseholderQr().solve(d);
  const Vector resid = d - design * coef;
  const double var = (d.array() - d.mean()).square().mean();
  return 1.0 - resid.squaredNorm() / static_cast<double>(d.size()) / var;
}

}  // namespace

TEST_CASE("main design scale constants") {
  MainDgpConfig cfg;
  cfg.rd2 = 0.4;
  cfg.ry2 = 0.1;
  const double dsd = cfg.delta_sigma_delta();
  // delta0 = 1/j^2 with Sigma = 0.5^{|j-k|}: the first two terms alone give 1 + 1/16 + 2 * 0.5 / 4.
  CHECK(dsd > 1.3125);
  const double logistic_var = std::numbers::pi * std::numbers::pi / 3.0;
  const double sd = cfg.c_d() * cfg.c_d() * dsd;
  CHECK(sd / (sd + logistic_var) == doctest::Approx(0.4).epsilon(1e-12));
  const double sy = cfg.c_y() * cfg.c_y() * dsd;
  CHECK(sy / (sy + 1.0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(cfg.sd_d() == doctest::Approx(std::sqrt(sd + 1.0)).epsilon(1e-14));

  MainDgpConfig zero;
  zero.rd2 = 0.0;
  zero.ry2 = 0.0;
  CHECK(zero.c_d() == 0.0);
  CHECK(zero.c_y() == 0.0);
  CHECK(zero.sd_d() == 1.0);
}

TEST_CASE("main design draws: covariance and realized R^2") {
  MainDgpConfig cfg;
  cfg.n = 100'000;
  cfg.num_covariates = 6;
  cfg.rd2 = 0.4;
  cfg.seed = 2;
  const Dataset data = draw_main_dgp(cfg);
  const Matrix cov = sample_cov(data.x);
  for (Index j = 0; j < 6; ++j) {
    for (Index k = 0; k < 6; ++k) {
      CHECK(std::fabs(cov(j, k) - std::pow(0.5, std::abs(j - k))) < 0.02);
    }
  }
  // Implied share of D explained by X: c_d^2 d'Sd / (c_d^2 d'Sd + 1).
  const double signal = cfg.c_d() * cfg.c_d() * cfg.delta_sigma_delta();
  CHECK(std::fabs(linear_r2(data.d, data.x) - signal / (signal + 1.0)) < 0.01);
  const double sd = std::sqrt((data.d.array() - data.d.mean()).square().mean());
  CHECK(std::fabs(sd / cfg.sd_d() - 1.0) < 0.01);
  CHECK(data.covariate_names.front() == "x1");
}

TEST_CASE("zero signal gives a treatment independent of covariates") {
  MainDgpConfig cfg;
  cfg.n = 20'000;
  cfg.num_covariates = 4;
  cfg.rd2 = 0.0;
  cfg.ry2 = 0.0;
  const Dataset data = draw_main_dgp(cfg);
  CHECK(linear_r2(data.d, data.x) < 0.002);
}

TEST_CASE("configuration checks") {
  MainDgpConfig cfg;
  cfg.rd2 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.rd2 = 0.1;
  cfg.num_covariates = 0;
  CHECK_THROWS_AS(draw_main_dgp(cfg), Error);
  MainDgpConfig ok;
  CHECK_THROWS_AS(true_theta_oracle(ok, decile_bands(), 999'999, 1), Error);
}

TEST_CASE("decile bands") {
  const auto bands = decile_bands();
  REQUIRE(bands.size() == 9);
  CHECK(bands.front().lo == doctest::Approx(0.05));
  CHECK(bands.back().hi == doctest::Approx(0.95));
  CHECK(bands[0].label() == "5%-15%");
  CHECK(bands[8].label() == "85%-95%");
}

TEST_CASE("truth oracle") {
  MainDgpConfig cfg;
  cfg.num_covariates = 30;
  SUBCASE("without the interaction every band has effect one") {
    cfg.interaction = false;
    for (double t : true_theta_oracle(cfg, decile_bands(), 1'000'000, 3)) CHECK(t == 1.0);
  }
  SUBCASE("stable in the mega-sample size, heterogeneous, rising over the upper bands") {
    const auto small = true_theta_oracle(cfg, decile_bands(), 1'000'000, 4);
    const auto large = true_theta_oracle(cfg, decile_bands(), 4'000'000, 5);
    for (std::size_t b = 0; b < small.size(); ++b) {
      CHECK(std::fabs(small[b] - large[b]) < 0.01);
      if (b >= 3) CHECK(large[b] > large[b - 1]);
    }
    CHECK(large.back() - large[2] > 0.5);
  }
}

TEST_CASE("derivative design") {
  const Vector a = partial_linear_coefficients(1, 5);
  for (Index j = 0; j < 5; ++j) CHECK(a[j] == doctest::Approx(std::pow(0.5, j + 2.0)).epsilon(1e-15));
  CHECK(partial_linear_coefficients(2, 3)[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(partial_linear_coefficients(2, 3)[1] == doctest::Approx(std::pow(0.5, 2.5)).epsilon(1e-15));
  CHECK(parse_design("iii") == 3);
  CHECK(design_name(4) == "iv");
  CHECK_THROWS_AS(parse_design("v"), Error);

  for (int dgp = 1; dgp <= 3; ++dgp) {
    for (double d : {-2.0, 0.3, 1.7}) {
      const double eps = 1e-5;
      const double fd = (partial_linear_g(dgp, d + eps) - partial_linear_g(dgp, d - eps)) / (2.0 * eps);
      CHECK(std::fabs(fd - partial_linear_g_prime(dgp, d)) < 1e-8);
    }
  }
  CHECK(partial_linear_g_prime(3, 2.0) == doctest::Approx(1.0 - 0.4 + 0.12).epsilon(1e-15));

  PartialLinearConfig cfg;
  cfg.n = 100'000;
  cfg.p = 4;
  cfg.dgp = 3;
  const Dataset data = draw_partial_linear_dgp(cfg);
  const Matrix cov = sample_cov(data.x);
  for (Index r = 0; r < 4; ++r) {
    for (Index c = 0; c < 4; ++c) {
      CHECK(std::fabs(cov(r, c) - std::pow(0.5, 2.0 * (std::abs(r - c) + 1))) < 0.01);
    }
  }

  // The true derivative matches a central difference of Phi(y - g(d) - x'alpha).
  PartialLinearConfig small = cfg;
  small.n = 20;
  const Dataset few = draw_partial_linear_dgp(small);
  const double y = 0.4;
  const Vector truth = partial_linear_true_derivative(small, few, y);
  const Vector index = few.x * partial_linear_coefficients(small.design, small.p);
  for (Index i = 0; i < few.n(); ++i) {
    const double eps = 1e-5;
    auto f = [&](double d) { return stats::normal_cdf(y - partial_linear_g(small.dgp, d) - index[i]); };
    CHECK(std::fabs((f(few.d[i] + eps) - f(few.d[i] - eps)) / (2.0 * eps) - truth[i]) < 1e-7);
  }

  CHECK(mean_sq_distance(truth, truth) == 0.0);
  CHECK(mean_sq_distance(Vector::Ones(4), Vector::Zero(4)) == 1.0);
  CHECK_THROWS_AS(mean_sq_distance(Vector::Ones(2), Vector::Ones(3)), Error);
}

TEST_CASE("substreams are distinct and reproducible") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t stream = 0; stream < 4; ++stream) {
    for (std::uint64_t rep = 0; rep < 50; ++rep) seen.insert(substream_seed(7, stream, rep));
  }
  CHECK(seen.size() == 200);
  CHECK(substream_seed(7, 1, 2) == substream_seed(7, 1, 2));
  CHECK(substream_seed(7, 1, 2) != substream_seed(8, 1, 2));
}

TEST_CASE("Monte Carlo report") {
  MainDgpConfig cfg;
  cfg.num_covariates = 5;
  McOptions opt;
  opt.reps = 3;
  opt.seed = 9;
  const std::vector<QuantileBand> bands = {{0.25, 0.35}, {0.45, 0.55}};
  const McReport a = run_main_mc(cfg, bands, opt);
  CHECK(a.reps_used + a.failures == 3);
  REQUIRE(a.cells.size() == 4);
  for (const auto& c : a.cells) {
    CHECK(c.reps == a.reps_used);
    CHECK(c.mse == doctest::Approx(c.std * c.std + (c.mean_theta - c.theta_true) * (c.mean_theta - c.theta_true))
                       .epsilon(1e-10));
    CHECK(c.bias_ratio == doctest::Approx((c.mean_theta - c.theta_true) / c.theta_true).epsilon(1e-12));
    CHECK(c.coverage >= 0.0);
    CHECK(c.coverage <= 1.0);
  }
  CHECK(a.cell("25%-35%", "adml").estimator == "adml");
  CHECK_THROWS_AS(a.cell("0%-10%", "adml"), Error);
  CHECK(a.max_abs_mean_psi < 1e-8);

  // Same seed, different worker count: identical cells.
  McOptions par = opt;
  par.workers = 2;
  const McReport b = run_main_mc(cfg, bands, par);
  for (std::size_t k = 0; k < a.cells.size(); ++k) {
    CHECK(a.cells[k].mean_theta == b.cells[k].mean_theta);
    CHECK(a.cells[k].std == b.cells[k].std);
    CHECK(a.cells[k].coverage == b.cells[k].coverage);
  }

  McOptions one = opt;
  one.reps = 1;
  const McReport c = run_main_mc(cfg, bands, one);
  CHECK(c.reps_used == 1);
  CHECK_FALSE(c.flags.empty());
  CHECK(c.cells[0].std == 0.0);

  McOptions bad = opt;
  bad.reps = 0;
  CHECK_THROWS_AS(run_main_mc(cfg, bands, bad), Error);
}

TEST_CASE("derivative comparison smoke run") {
  PartialLinearConfig cfg;
  cfg.p = 10;
  DerivativeOptions opt;
  opt.reps = 2;
  const auto a = run_derivative_comparison(cfg, {0.3, 0.7}, opt);
  CHECK(a.reps_used == 2);
  for (std::size_t t = 0; t < 2; ++t) {
    CHECK(std::isfinite(a.mean_dist_partial[t]));
    CHECK(a.mean_dist_partial[t] >= 0.0);
    CHECK(a.mean_dist_direct[t] >= 0.0);
  }
  const auto b = run_derivative_comparison(cfg, {0.3, 0.7}, opt);
  CHECK(a.mean_dist_partial == b.mean_dist_partial);
  CHECK(a.mean_dist_direct == b.mean_dist_direct);
  CHECK_THROWS_AS(run_derivative_comparison(cfg, {1.2}, opt), Error);
  CHECK(default_tau_list().size() == 9);
}
