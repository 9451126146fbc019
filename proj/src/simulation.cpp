#include "oasd/simulation.hpp"

#include "oasd/cdf_tools.hpp"
#include "oasd/inference.hpp"
#include "oasd/parallel.hpp"
#include "oasd/stats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>

namespace oasd {

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t rep) {
  // splitmix64 over the three words
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ stream) ^ rep);
}

namespace {

std::mt19937_64 make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return std::mt19937_64(seq);
}

Vector delta0(Index k) {
  Vector delta(k);
  for (Index j = 0; j < k; ++j) delta[j] = 1.0 / static_cast<double>((j + 1) * (j + 1));
  return delta;
}

// Fills x with one N(0, Sigma) draw where Sigma_{jk} = scale^2 * phi^{|j-k|}.
void draw_ar1(std::mt19937_64& rng, std::normal_distribution<double>& normal, double phi, double scale,
              Eigen::Ref<Eigen::RowVectorXd> x) {
  const double innovation = std::sqrt(1.0 - phi * phi);
  double prev = normal(rng);
  x[0] = scale * prev;
  for (Index j = 1; j < x.size(); ++j) {
    prev = phi * prev + innovation * normal(rng);
    x[j] = scale * prev;
  }
}

struct MainDgpConstants {
  Vector d_coef;
  Vector y_coef;
  double q30 = 0.0;
  double q70 = 0.0;
};

MainDgpConstants main_constants(const MainDgpConfig& cfg) {
  const Vector delta = delta0(cfg.num_covariates);
  MainDgpConstants c;
  c.d_coef = cfg.c_d() * delta;
  c.y_coef = cfg.c_y() * delta;
  c.q30 = cfg.sd_d() * stats::normal_quantile(0.3);
  c.q70 = cfg.sd_d() * stats::normal_quantile(0.7);
  return c;
}

// One observation; x receives the covariates. Returns (y, d).
std::pair<double, double> draw_main_row(const MainDgpConfig& cfg, const MainDgpConstants& c,
                                        std::mt19937_64& rng, std::normal_distribution<double>& normal,
                                        Eigen::Ref<Eigen::RowVectorXd> x) {
  draw_ar1(rng, normal, 0.5, 1.0, x);
  const double v1 = normal(rng);
  const double v2 = normal(rng);
  const double v3 = normal(rng);
  const double v4 = normal(rng);
  const double d = x.dot(c.d_coef.transpose()) + v1;
  const double u = d < c.q30 ? v2 : (d < c.q70 ? v3 : v4);
  double y = d + x.dot(c.y_coef.transpose()) + u;
  if (cfg.interaction) y += d * x[0];
  return {y, d};
}

}  // namespace

void MainDgpConfig::validate() const {
  if (n < 1) throw Error(ErrorKind::Config, "n must be positive");
  if (num_covariates < 1) throw Error(ErrorKind::Config, "the design needs at least one covariate");
  if (!(rd2 >= 0.0 && rd2 < 1.0)) throw Error(ErrorKind::Config, "rd2 must lie in [0, 1)");
  if (!(ry2 >= 0.0 && ry2 < 1.0)) throw Error(ErrorKind::Config, "ry2 must lie in [0, 1)");
}

double MainDgpConfig::delta_sigma_delta() const {
  const Vector delta = delta0(num_covariates);
  double total = 0.0;
  for (Index j = 0; j < num_covariates; ++j) {
    for (Index k = 0; k < num_covariates; ++k) {
      total += delta[j] * delta[k] * std::pow(0.5, static_cast<double>(std::abs(j - k)));
    }
  }
  return total;
}

double MainDgpConfig::c_d() const {
  return std::sqrt((std::numbers::pi * std::numbers::pi / 3.0) * rd2 / ((1.0 - rd2) * delta_sigma_delta()));
}

double MainDgpConfig::c_y() const { return std::sqrt(ry2 / ((1.0 - ry2) * delta_sigma_delta())); }

double MainDgpConfig::sd_d() const {
  const double cd = c_d();
  return std::sqrt(cd * cd * delta_sigma_delta() + 1.0);
}

Dataset draw_main_dgp(const MainDgpConfig& cfg) {
  auto rng = make_rng(cfg.seed);
  return draw_main_dgp(cfg, rng);
}

Dataset draw_main_dgp(const MainDgpConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const MainDgpConstants c = main_constants(cfg);
  std::normal_distribution<double> normal;
  Dataset data;
  data.y.resize(cfg.n);
  data.d.resize(cfg.n);
  data.x.resize(cfg.n, cfg.num_covariates);
  Eigen::RowVectorXd row(cfg.num_covariates);
  for (Index i = 0; i < cfg.n; ++i) {
    const auto [y, d] = draw_main_row(cfg, c, rng, normal, row);
    data.y[i] = y;
    data.d[i] = d;
    data.x.row(i) = row;
  }
  for (Index k = 0; k < cfg.num_covariates; ++k) data.covariate_names.push_back("x" + std::to_string(k + 1));
  return data;
}

std::string QuantileBand::label() const {
  std::ostringstream out;
  out << std::lround(lo * 100) << "%-" << std::lround(hi * 100) << "%";
  return out.str();
}

std::vector<QuantileBand> decile_bands() {
  std::vector<QuantileBand> bands;
  for (int k = 0; k < 9; ++k) bands.push_back({0.05 + 0.1 * k, 0.15 + 0.1 * k});
  return bands;
}

std::vector<double> true_theta_oracle(const MainDgpConfig& cfg, const std::vector<QuantileBand>& bands,
                                      Index oracle_n, std::uint64_t oracle_seed) {
  cfg.validate();
  if (oracle_n < 1000000) {
    throw Error(ErrorKind::Config, "the truth oracle needs at least 10^6 draws");
  }
  const MainDgpConstants c = main_constants(cfg);
  auto rng = make_rng(oracle_seed);
  std::normal_distribution<double> normal;
  std::vector<double> y(static_cast<std::size_t>(oracle_n));
  std::vector<double> deriv(static_cast<std::size_t>(oracle_n));
  Eigen::RowVectorXd row(cfg.num_covariates);
  for (Index i = 0; i < oracle_n; ++i) {
    const auto [yi, di] = draw_main_row(cfg, c, rng, normal, row);
    (void)di;
    y[static_cast<std::size_t>(i)] = yi;
    deriv[static_cast<std::size_t>(i)] = cfg.interaction ? 1.0 + row[0] : 1.0;
  }
  std::vector<double> sorted = y;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  for (const auto& band : bands) {
    const double lo = stats::sample_quantile(sorted, band.lo);
    const double hi = stats::sample_quantile(sorted, band.hi);
    double total = 0.0;
    Index count = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] > lo && y[i] < hi) {
        total += deriv[i];
        ++count;
      }
    }
    out.push_back(count > 0 ? total / static_cast<double>(count) : 0.0);
  }
  return out;
}

const McCell& McReport::cell(const std::string& band, const std::string& estimator) const {
  for (const auto& c : cells) {
    if (c.band == band && c.estimator == estimator) return c;
  }
  throw Error(ErrorKind::InvalidArgument, "no report cell for " + band + " / " + estimator);
}

namespace {

struct RepOutcome {
  bool ok = false;
  std::string error;
  std::vector<double> adml, adml_se, naive, naive_se;
  double max_abs_mean_psi = 0.0;
  std::optional<bool> homogeneity_reject;
};

RepOutcome run_one_rep(const MainDgpConfig& cfg, const std::vector<QuantileBand>& bands,
                       const McOptions& options, int rep) {
  RepOutcome out;
  try {
    MainDgpConfig rep_cfg = cfg;
    rep_cfg.seed = substream_seed(options.seed, 0, static_cast<std::uint64_t>(rep));
    const Dataset data = draw_main_dgp(rep_cfg);
    std::vector<double> sorted(data.y.data(), data.y.data() + data.n());
    std::sort(sorted.begin(), sorted.end());
    std::vector<IntervalU> intervals;
    for (const auto& band : bands) {
      intervals.push_back(
          IntervalU::make(stats::sample_quantile(sorted, band.lo), stats::sample_quantile(sorted, band.hi)));
    }
    PipelineOptions pipeline = options.pipeline;
    pipeline.dist.workers = 1;
    const PipelineResult result = run_pipeline(data, intervals, pipeline);
    Matrix psi(data.n(), static_cast<Index>(bands.size()));
    Vector theta(static_cast<Index>(bands.size()));
    for (std::size_t b = 0; b < result.intervals.size(); ++b) {
      const auto& row = result.intervals[b];
      if (!row.usable) {
        out.error = "band " + bands[b].label() + ": " + row.flag;
        return out;
      }
      if (!std::isfinite(row.adml.theta) || !std::isfinite(row.naive.theta)) {
        out.error = "band " + bands[b].label() + ": non-finite estimate";
        return out;
      }
      out.adml.push_back(row.adml.theta);
      out.adml_se.push_back(row.adml.se);
      out.naive.push_back(row.naive.theta);
      out.naive_se.push_back(row.naive.se);
      out.max_abs_mean_psi = std::max(out.max_abs_mean_psi, std::fabs(row.adml.psi_values.mean()));
      psi.col(static_cast<Index>(b)) = row.adml.psi_values;
      theta[static_cast<Index>(b)] = row.adml.theta;
    }
    if (options.bootstrap_draws > 0 && bands.size() >= 2) {
      const Matrix draws = multiplier_draws(psi, options.bootstrap_draws,
                                            substream_seed(options.seed, 2, static_cast<std::uint64_t>(rep)),
                                            MultiplierLaw::Normal, 1);
      out.homogeneity_reject = homogeneity_test(draws, theta, data.n()).p_value < options.alpha;
    }
    out.ok = true;
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

McCell summarize(const std::string& band, const std::string& estimator, double truth,
                 const std::vector<double>& theta, const std::vector<double>& se, double z) {
  McCell cell;
  cell.band = band;
  cell.estimator = estimator;
  cell.theta_true = truth;
  cell.reps = static_cast<Index>(theta.size());
  if (theta.empty()) return cell;
  const Eigen::Map<const Vector> t(theta.data(), static_cast<Index>(theta.size()));
  cell.mean_theta = t.mean();
  cell.bias_ratio = (cell.mean_theta - truth) / truth;
  cell.std = std::sqrt((t.array() - cell.mean_theta).square().mean());
  cell.mse = (t.array() - truth).square().mean();
  Index covered = 0;
  for (std::size_t r = 0; r < theta.size(); ++r) {
    if (std::fabs(theta[r] - truth) <= z * se[r]) ++covered;
  }
  cell.coverage = static_cast<double>(covered) / static_cast<double>(theta.size());
  return cell;
}

}  // namespace

McReport run_main_mc(const MainDgpConfig& cfg, const std::vector<QuantileBand>& bands,
                     const McOptions& options) {
  cfg.validate();
  if (options.reps < 1) throw Error(ErrorKind::Config, "reps must be >= 1");
  if (bands.empty()) throw Error(ErrorKind::Config, "no bands to simulate");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw Error(ErrorKind::Config, "alpha must lie in (0, 1)");
  const auto start = std::chrono::steady_clock::now();

  McReport report;
  report.config = cfg;
  report.bands = bands;
  report.reps_requested = options.reps;
  const std::vector<double> truth =
      true_theta_oracle(cfg, bands, options.oracle_n, substream_seed(options.seed, 1, 0));

  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(options.reps));
  parallel_for(outcomes.size(), options.workers, [&](std::size_t r) {
    outcomes[r] = run_one_rep(cfg, bands, options, static_cast<int>(r));
  });

  const std::size_t num_bands = bands.size();
  std::vector<std::vector<double>> adml(num_bands), adml_se(num_bands), naive(num_bands), naive_se(num_bands);
  int rejections = 0;
  int tested = 0;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    const RepOutcome& o = outcomes[r];
    if (!o.ok) {
      ++report.failures;
      report.flags.push_back("rep " + std::to_string(r) + " failed: " + o.error);
      continue;
    }
    ++report.reps_used;
    report.max_abs_mean_psi = std::max(report.max_abs_mean_psi, o.max_abs_mean_psi);
    for (std::size_t b = 0; b < num_bands; ++b) {
      adml[b].push_back(o.adml[b]);
      adml_se[b].push_back(o.adml_se[b]);
      naive[b].push_back(o.naive[b]);
      naive_se[b].push_back(o.naive_se[b]);
    }
    if (o.homogeneity_reject) {
      ++tested;
      rejections += *o.homogeneity_reject ? 1 : 0;
    }
  }
  if (tested > 0) report.homogeneity_rejection_rate = static_cast<double>(rejections) / tested;
  if (report.reps_used < 2) report.flags.emplace_back("fewer than two usable replications: std reported as 0");

  const double z = stats::normal_quantile(1.0 - options.alpha / 2.0);
  for (std::size_t b = 0; b < num_bands; ++b) {
    const std::string label = bands[b].label();
    report.cells.push_back(summarize(label, "naive", truth[b], naive[b], naive_se[b], z));
    report.cells.push_back(summarize(label, "adml", truth[b], adml[b], adml_se[b], z));
  }
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void PartialLinearConfig::validate() const {
  if (dgp < 1 || dgp > 3) throw Error(ErrorKind::Config, "dgp must be 1, 2 or 3");
  if (design < 1 || design > 4) throw Error(ErrorKind::Config, "design must be one of i, ii, iii, iv");
  if (n < 10) throw Error(ErrorKind::Config, "n must be >= 10");
  if (p < 1) throw Error(ErrorKind::Config, "p must be >= 1");
}

double partial_linear_g(int dgp, double d) {
  switch (dgp) {
    case 1:
      return d;
    case 2:
      return d - 0.1 * d * d;
    case 3:
      return d - 0.1 * d * d + 0.01 * d * d * d;
    default:
      throw Error(ErrorKind::InvalidArgument, "dgp must be 1, 2 or 3");
  }
}

double partial_linear_g_prime(int dgp, double d) {
  switch (dgp) {
    case 1:
      return 1.0;
    case 2:
      return 1.0 - 0.2 * d;
    case 3:
      return 1.0 - 0.2 * d + 0.03 * d * d;
    default:
      throw Error(ErrorKind::InvalidArgument, "dgp must be 1, 2 or 3");
  }
}

Vector partial_linear_coefficients(int design, Index p) {
  if (design < 1 || design > 4) throw Error(ErrorKind::InvalidArgument, "design must be 1..4");
  Vector out(p);
  for (Index j = 1; j <= p; ++j) {
    out[j - 1] = std::pow(0.5, static_cast<double>(j + 2 * design - 1) / design);
  }
  return out;
}

int parse_design(const std::string& roman) {
  if (roman == "i" || roman == "1") return 1;
  if (roman == "ii" || roman == "2") return 2;
  if (roman == "iii" || roman == "3") return 3;
  if (roman == "iv" || roman == "4") return 4;
  throw Error(ErrorKind::Config, "design must be one of i, ii, iii, iv (got '" + roman + "')");
}

std::string design_name(int design) {
  static const char* names[] = {"i", "ii", "iii", "iv"};
  if (design < 1 || design > 4) throw Error(ErrorKind::InvalidArgument, "design must be 1..4");
  return names[design - 1];
}

Dataset draw_partial_linear_dgp(const PartialLinearConfig& cfg) {
  auto rng = make_rng(cfg.seed);
  return draw_partial_linear_dgp(cfg, rng);
}

Dataset draw_partial_linear_dgp(const PartialLinearConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const Vector coef = partial_linear_coefficients(cfg.design, cfg.p);
  std::normal_distribution<double> normal;
  Dataset data;
  data.y.resize(cfg.n);
  data.d.resize(cfg.n);
  data.x.resize(cfg.n, cfg.p);
  Eigen::RowVectorXd row(cfg.p);
  for (Index i = 0; i < cfg.n; ++i) {
    // Sigma_p = 0.25 * 0.25^{|r-c|}: a unit AR(1) with phi = 0.25 scaled by 0.5.
    draw_ar1(rng, normal, 0.25, 0.5, row);
    const double index = row.dot(coef.transpose());
    const double d = index + normal(rng);
    data.d[i] = d;
    data.y[i] = partial_linear_g(cfg.dgp, d) + index + normal(rng);
    data.x.row(i) = row;
  }
  for (Index k = 0; k < cfg.p; ++k) data.covariate_names.push_back("x" + std::to_string(k + 1));
  return data;
}

Vector partial_linear_true_derivative(const PartialLinearConfig& cfg, const Dataset& data, double y) {
  const Vector coef = partial_linear_coefficients(cfg.design, data.num_covariates());
  const Vector index = data.x * coef;
  Vector out(data.n());
  for (Index i = 0; i < data.n(); ++i) {
    const double d = data.d[i];
    out[i] = -stats::normal_pdf(y - partial_linear_g(cfg.dgp, d) - index[i]) * partial_linear_g_prime(cfg.dgp, d);
  }
  return out;
}

std::vector<double> default_tau_list() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}; }

double mean_sq_distance(const Vector& estimate, const Vector& truth) {
  if (estimate.size() != truth.size() || estimate.size() == 0) {
    throw Error(ErrorKind::InvalidArgument, "distance needs two non-empty vectors of equal length");
  }
  return (estimate - truth).squaredNorm() / static_cast<double>(estimate.size());
}

DerivativeComparison run_derivative_comparison(const PartialLinearConfig& cfg, const std::vector<double>& tau_list,
                                               const DerivativeOptions& options) {
  cfg.validate();
  if (options.reps < 1) throw Error(ErrorKind::Config, "reps must be >= 1");
  if (tau_list.empty()) throw Error(ErrorKind::Config, "tau list is empty");
  for (double t : tau_list) {
    if (!(t > 0.0 && t < 1.0)) throw Error(ErrorKind::Config, "tau values must lie in (0, 1)");
  }
  const auto start = std::chrono::steady_clock::now();
  const std::size_t num_tau = tau_list.size();

  struct Rep {
    bool ok = false;
    std::vector<double> partial, direct;
  };
  std::vector<Rep> reps(static_cast<std::size_t>(options.reps));

  parallel_for(reps.size(), options.workers, [&](std::size_t r) {
    Rep& rep = reps[r];
    try {
      PartialLinearConfig rep_cfg = cfg;
      rep_cfg.seed = substream_seed(options.seed, 3, r);
      const Dataset data = draw_partial_linear_dgp(rep_cfg);
      std::vector<double> sorted(data.y.data(), data.y.data() + data.n());
      std::sort(sorted.begin(), sorted.end());
      std::vector<double> grid;
      for (double t : tau_list) grid.push_back(stats::sample_quantile(sorted, t));
      std::vector<double> order = grid;
      std::sort(order.begin(), order.end());

      BasisSpec spec;
      spec.kind = BasisKind::Powers;
      spec.degree = 3;
      DistRegOptions dist = options.dist;
      dist.workers = 1;
      const DistRegFit fit = fit_distribution_regression(data, spec, order, dist);
      const DiffScheme scheme = DiffScheme::make(1, bandwidth(data.n(), 1));
      IndexTable table(fit, data.d, data.x);
      for (std::size_t t = 0; t < num_tau; ++t) {
        const Index g = fit.grid_index_at_or_below(grid[t]);
        if (g < 0 || !fit.points[static_cast<std::size_t>(g)].usable) return;
        const auto logistic = [](double v) { return stats::logistic(v); };
        Vector partial = Vector::Zero(data.n());
        for (int l = 1; l <= scheme.ell; ++l) {
          const double step = l * scheme.bandwidth;
          const Vector up = table.at_shift(step).col(g).unaryExpr(logistic);
          const Vector down = table.at_shift(-step).col(g).unaryExpr(logistic);
          partial += scheme.eta[static_cast<std::size_t>(l - 1)] * (up - down);
        }
        partial /= 2.0 * scheme.bandwidth;
        const Vector level = table.at_shift(0.0).col(g);
        const Vector direct = (level.unaryExpr([](double v) { return stats::logistic_deriv(v); }).array() *
                               table.derivative().col(g).array())
                                  .matrix();
        const Vector truth = partial_linear_true_derivative(rep_cfg, data, grid[t]);
        rep.partial.push_back(mean_sq_distance(partial, truth));
        rep.direct.push_back(mean_sq_distance(direct, truth));
      }
      rep.ok = true;
    } catch (const Error&) {
      rep.ok = false;
    }
  });

  DerivativeComparison out;
  out.config = cfg;
  out.tau = tau_list;
  out.reps_requested = options.reps;
  out.mean_dist_partial.assign(num_tau, 0.0);
  out.mean_dist_direct.assign(num_tau, 0.0);
  for (const Rep& rep : reps) {
    if (!rep.ok) {
      ++out.failures;
      continue;
    }
    ++out.reps_used;
    for (std::size_t t = 0; t < num_tau; ++t) {
      out.mean_dist_partial[t] += rep.partial[t];
      out.mean_dist_direct[t] += rep.direct[t];
    }
  }
  if (out.reps_used > 0) {
    for (std::size_t t = 0; t < num_tau; ++t) {
      out.mean_dist_partial[t] /= out.reps_used;
      out.mean_dist_direct[t] /= out.reps_used;
    }
  }
  out.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace oasd
