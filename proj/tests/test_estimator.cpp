#include <doctest.h>

#include "oasd/basis.hpp"
#include "oasd/estimator.hpp"
#include "oasd/simulation.hpp"
#include "oasd/stats.hpp"
#include "support/known_design.hpp"

#include <algorithm>
#include <cmath>

using namespace oasd;

namespace {

Dataset outcomes(std::initializer_list<double> ys) {
  Dataset data;
  data.y.resize(static_cast<Index>(ys.size()));
  Index i = 0;
  for (double y : ys) data.y[i++] = y;
  data.d = Vector::Zero(data.y.size());
  data.x = Matrix(data.y.size(), 0);
  return data;
}

NuisanceBundle hand_bundle() {
  NuisanceBundle b;
  b.u = IntervalU::make(0.0, 1.0);
  b.p_hat = 2.0 / 3.0;
  b.dif_values = Vector(3);
  b.dif_values << 0.3, 0.6, 0.9;
  b.l_values = Vector(3);
  b.l_values << 1.0, -1.0, 0.0;
  b.if_values = Vector(3);
  b.if_values << 0.2, 0.5, 0.1;
  b.indicator_integrals = Vector(3);
  b.indicator_integrals << 0.1, 0.5, 0.4;
  b.in_interval = Vector(3);
  b.in_interval << 1.0, 1.0, 0.0;
  return b;
}

const IntervalU kU = IntervalU::make(0.0, 1.5);

}  // namespace

TEST_CASE("P_hat counts strict interior points") {
  const Dataset data = outcomes({1.0, 2.0, 3.0});
  CHECK(p_hat(data, IntervalU::make(0.5, 3.5)) == 1.0);
  CHECK(p_hat(data, IntervalU::make(1.0, 3.0)) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  try {
    p_hat(data, IntervalU::make(3.0, 4.0));
    FAIL("expected an empty-interval error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numerical);
  }
  CHECK(min_p_hat(500) == doctest::Approx(0.01));
}

TEST_CASE("score on hand-computed inputs") {
  const NuisanceBundle b = hand_bundle();
  const Vector psi = score_psi(b, 0.0, b.dif_values.mean());
  CHECK(std::fabs(psi[0] + 0.15) < 1e-12);
  CHECK(std::fabs(psi[1] + 0.45) < 1e-12);
  CHECK(std::fabs(psi[2] + 2.25) < 1e-12);
  const OasdEstimate est = theta_adml(b);
  CHECK(std::fabs(est.theta + 0.95) < 1e-12);
  CHECK(std::fabs(est.psi_values.mean()) < 1e-12);
  CHECK(est.se == doctest::Approx(stats::sd(est.psi_values) / std::sqrt(3.0)).epsilon(1e-14));
  CHECK(theta_naive(b).theta == doctest::Approx(-0.6 / (2.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("degenerate bundles") {
  SUBCASE("all-zero nuisances give a zero score") {
    NuisanceBundle b = hand_bundle();
    b.dif_values.setZero();
    b.l_values.setZero();
    b.in_interval.setConstant(b.p_hat);
    CHECK(score_psi(b, 0.0, 0.0).isZero());
    CHECK(theta_adml(b).theta == 0.0);
    CHECK(theta_naive(b).theta == 0.0);
  }
  SUBCASE("without the Riesz term both estimators agree") {
    NuisanceBundle b = hand_bundle();
    b.l_values.setZero();
    b.in_interval.setConstant(b.p_hat);
    CHECK(theta_adml(b).theta == doctest::Approx(theta_naive(b).theta).epsilon(1e-14));
  }
  SUBCASE("constant DIF = -c with P = 1/2 gives 2c") {
    NuisanceBundle b = hand_bundle();
    b.p_hat = 0.5;
    b.dif_values.setConstant(-0.7);
    CHECK(theta_naive(b).theta == doctest::Approx(1.4).epsilon(1e-14));
  }
  SUBCASE("mismatched lengths and non-positive P are rejected") {
    NuisanceBundle b = hand_bundle();
    b.l_values = Vector::Zero(2);
    CHECK_THROWS_AS(theta_adml(b), Error);
    b = hand_bundle();
    b.p_hat = 0.0;
    CHECK_THROWS_AS(score_psi(b, 0.0, 0.0), Error);
  }
}

TEST_CASE("property: the fitted score has zero sample mean") {
  const known::Design g;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset data = known::draw(g, 400, seed);
    const NuisanceBundle b = known::bundle(g, data, kU, {seed % 2 == 0, seed % 3 == 0});
    const OasdEstimate est = theta_adml(b);
    CHECK(std::fabs(est.psi_values.mean()) < 1e-10);
    CHECK(est.se == doctest::Approx(stats::sd(est.psi_values) / 20.0).epsilon(1e-12));
  }
}

TEST_CASE("known design: quadrature and Monte Carlo oracles agree") {
  const known::Design g;
  const double quad = known::theta_quadrature(g, kU);
  const double mc = known::theta_monte_carlo(g, kU, 4'000'000, 99);
  CHECK(std::fabs(quad - mc) < 3e-3);
  // The population bundle reproduces the same value through the library score.
  const known::Population pop = known::population(g, kU);
  const double theta_pop = pop.mean(score_psi(pop.bundle, 0.0, pop.mean(pop.bundle.dif_values)));
  CHECK(std::fabs(theta_pop - quad) < 1e-6);
}

TEST_CASE("known nuisances: estimate within 3 standard errors of the truth") {
  const known::Design g;
  const double truth = known::theta_quadrature(g, kU);
  const Dataset data = known::draw(g, 100'000, 7);
  const OasdEstimate est = theta_adml(known::bundle(g, data, kU));
  CHECK(std::fabs(est.theta - truth) < 3.0 * est.se);
}

TEST_CASE("double robustness: one wrong nuisance is tolerated") {
  const known::Design g;
  const double truth = known::theta_quadrature(g, kU);
  const Dataset data = known::draw(g, 10'000, 11);
  for (known::Misspecify miss : {known::Misspecify{true, false}, known::Misspecify{false, true}}) {
    const OasdEstimate est = theta_adml(known::bundle(g, data, kU, miss));
    CHECK(std::fabs(est.theta - truth) < 5.0 * est.se);
  }
  // The plug-in estimator has no such protection.
  const OasdEstimate naive = theta_naive(known::bundle(g, data, kU, {true, false}));
  CHECK(std::fabs(naive.theta - truth) > 10.0 * naive.se);
}

TEST_CASE("sign of the Riesz correction") {
  // With consistent but wrong CDF nuisances only the subtracting sign cancels the error.
  const known::Design g;
  const double truth = known::theta_quadrature(g, kU);
  const Dataset data = known::draw(g, 10'000, 13);
  const NuisanceBundle b = known::bundle(g, data, kU, {true, false});
  const OasdEstimate est = theta_adml(b);
  const double flipped = known::flipped_score(b, 0.0, b.dif_values.mean()).mean();
  CHECK(std::fabs(est.theta - truth) < 5.0 * est.se);
  CHECK(std::fabs(flipped - truth) > 10.0 * est.se);
}

TEST_CASE("Neyman orthogonality: no first-order response to nuisance directions") {
  const known::Design g;
  const known::Population pop = known::population(g, kU);
  const double theta = pop.mean(score_psi(pop.bundle, 0.0, pop.mean(pop.bundle.dif_values)));
  const auto fit = known::gateaux(pop, theta, [](const NuisanceBundle& b, double t, double md) {
    return score_psi(b, t, md);
  });
  CHECK(std::fabs(fit.linear) < 0.1 * std::fabs(fit.quadratic) * 0.02);
  const auto naive = known::gateaux(pop, theta, [](const NuisanceBundle& b, double t, double) {
    return naive_psi(b, t);
  });
  const auto flipped = known::gateaux(pop, theta, known::flipped_score);
  CHECK(std::fabs(naive.linear) > 0.05);
  CHECK(std::fabs(flipped.linear) > 0.05);
}

TEST_CASE("assembler on a fitted sample") {
  MainDgpConfig cfg;
  cfg.num_covariates = 5;
  cfg.seed = 3;
  const Dataset data = draw_main_dgp(cfg);
  PipelineOptions opt;
  const std::vector<double> grid = outcome_grid(data, {}, opt.grid_quantiles);
  const BasisExpansion e = build_basis(data, opt.basis);
  const DistRegFit dist = fit_distribution_regression(data, e, grid, opt.dist);
  const RieszFit riesz = fit_riesz_tuned(e, opt.riesz);
  NuisanceModel model;
  model.data = &data;
  model.dist = &dist;
  model.riesz = &riesz;
  model.scheme = DiffScheme::make(1, bandwidth(data.n(), 1));
  NuisanceAssembler assembler(model);

  const IntervalU u = IntervalU::make(grid[4], grid[12]);
  const NuisanceBundle b = assembler.bundle(u);
  CHECK(b.n() == data.n());
  CHECK(b.if_values.minCoeff() >= 0.0);
  CHECK(b.if_values.maxCoeff() <= u.width() + 1e-12);
  CHECK(b.p_hat == doctest::Approx(b.in_interval.mean()).epsilon(1e-15));
  CHECK(b.l_values == l_hat(riesz, data.d, data.x));
  for (Index i = 0; i < data.n(); ++i) {
    CHECK(b.indicator_integrals[i] == indicator_integral(data.y[i], u));
  }

  // An interval holding fewer than 5 points is rejected.
  std::vector<double> ys(data.y.data(), data.y.data() + data.n());
  std::sort(ys.begin(), ys.end());
  const IntervalU thin = IntervalU::make(0.5 * (ys[100] + ys[99]), 0.5 * (ys[103] + ys[104]));
  try {
    assembler.bundle(thin);
    FAIL("expected a thin-interval error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::Numerical);
  }
  NuisanceModel incomplete = model;
  incomplete.riesz = nullptr;
  CHECK_THROWS_AS(NuisanceAssembler{incomplete}, Error);
}
