#include "oasd/inference.hpp"

#include "oasd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace oasd {

MultiplierLaw parse_multiplier_law(const std::string& name) {
  if (name == "normal" || name == "gaussian") return MultiplierLaw::Normal;
  if (name == "rademacher") return MultiplierLaw::Rademacher;
  if (name == "mammen") return MultiplierLaw::Mammen;
  if (name == "zero") return MultiplierLaw::Zero;
  throw Error(ErrorKind::Config, "unknown multiplier law '" + name + "' (normal, rademacher, mammen)");
}

std::string to_string(MultiplierLaw law) {
  switch (law) {
    case MultiplierLaw::Normal:
      return "normal";
    case MultiplierLaw::Rademacher:
      return "rademacher";
    case MultiplierLaw::Mammen:
      return "mammen";
    case MultiplierLaw::Zero:
      return "zero";
  }
  return "normal";
}

namespace {

Vector draw_multipliers(Index n, std::uint64_t seed, std::uint64_t index, MultiplierLaw law) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x6d75u};
  std::mt19937_64 rng(seq);
  Vector xi(n);
  switch (law) {
    case MultiplierLaw::Normal: {
      std::normal_distribution<double> dist;
      for (Index i = 0; i < n; ++i) xi[i] = dist(rng);
      break;
    }
    case MultiplierLaw::Rademacher: {
      std::bernoulli_distribution coin(0.5);
      for (Index i = 0; i < n; ++i) xi[i] = coin(rng) ? 1.0 : -1.0;
      break;
    }
    case MultiplierLaw::Mammen: {
      const double s5 = std::sqrt(5.0);
      std::bernoulli_distribution coin((s5 + 1.0) / (2.0 * s5));
      for (Index i = 0; i < n; ++i) xi[i] = coin(rng) ? -(s5 - 1.0) / 2.0 : (s5 + 1.0) / 2.0;
      break;
    }
    case MultiplierLaw::Zero:
      xi.setZero();
      break;
  }
  return xi;
}

}  // namespace

Matrix multiplier_draws(const Matrix& psi, int num_draws, std::uint64_t seed, MultiplierLaw law,
                        std::size_t workers) {
  if (num_draws < 1) {
    throw Error(ErrorKind::InvalidArgument, "bootstrap needs at least one draw");
  }
  const Index n = psi.rows();
  if (n == 0) {
    throw Error(ErrorKind::InvalidArgument, "bootstrap needs at least one observation");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Matrix draws(num_draws, psi.cols());
  parallel_for(static_cast<std::size_t>(num_draws), workers, [&](std::size_t b) {
    const Vector xi = draw_multipliers(n, seed, b, law);
    draws.row(static_cast<Index>(b)) = scale * (xi.transpose() * psi);
  });
  return draws;
}

double upper_quantile(std::vector<double> values, double level) {
  if (values.empty()) {
    throw Error(ErrorKind::InvalidArgument, "quantile of an empty set");
  }
  const auto count = static_cast<double>(values.size());
  auto k = static_cast<std::size_t>(std::ceil(level * count - 1e-9));
  k = std::clamp<std::size_t>(k, 1, values.size());
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k - 1), values.end());
  return values[k - 1];
}

BandResult uniform_band(const Matrix& draws, const Vector& theta, Index n, double alpha) {
  if (draws.cols() != theta.size()) {
    throw Error(ErrorKind::InvalidArgument, "draws and estimates disagree on |U|");
  }
  if (!(alpha > 0.0 && alpha < 0.5)) {
    throw Error(ErrorKind::InvalidArgument, "alpha must lie in (0, 0.5)");
  }
  const Index num_u = theta.size();
  const Index num_b = draws.rows();
  const double root_n = std::sqrt(static_cast<double>(n));
  BandResult out;
  out.sigma = Vector::Zero(num_u);
  out.excluded.assign(static_cast<std::size_t>(num_u), false);
  for (Index u = 0; u < num_u; ++u) {
    const double mean = draws.col(u).mean();
    out.sigma[u] = std::sqrt((draws.col(u).array() - mean).square().mean());
    out.excluded[static_cast<std::size_t>(u)] = !(out.sigma[u] > 0.0);
  }

  std::vector<double> sup_t(static_cast<std::size_t>(num_b), 0.0);
  for (Index b = 0; b < num_b; ++b) {
    double worst = 0.0;
    for (Index u = 0; u < num_u; ++u) {
      if (out.excluded[static_cast<std::size_t>(u)]) continue;
      worst = std::max(worst, std::fabs(draws(b, u)) / out.sigma[u]);
    }
    sup_t[static_cast<std::size_t>(b)] = worst;
  }
  out.critical_value = upper_quantile(sup_t, 1.0 - alpha);

  for (Index u = 0; u < num_u; ++u) {
    const double th = theta[u];
    if (out.excluded[static_cast<std::size_t>(u)]) {
      out.pointwise_critical.push_back(0.0);
      out.uniform.push_back({th, th});
      out.pointwise.push_back({th, th});
      continue;
    }
    std::vector<double> t(static_cast<std::size_t>(num_b));
    for (Index b = 0; b < num_b; ++b) t[static_cast<std::size_t>(b)] = std::fabs(draws(b, u)) / out.sigma[u];
    const double c_u = upper_quantile(std::move(t), 1.0 - alpha);
    out.pointwise_critical.push_back(c_u);
    const double half_uniform = out.critical_value * out.sigma[u] / root_n;
    const double half_pointwise = c_u * out.sigma[u] / root_n;
    out.uniform.push_back({th - half_uniform, th + half_uniform});
    out.pointwise.push_back({th - half_pointwise, th + half_pointwise});
  }
  return out;
}

HomogeneityTest homogeneity_test(const Matrix& draws, const Vector& theta, Index n) {
  if (theta.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "homogeneity test needs at least two intervals");
  }
  if (draws.cols() != theta.size()) {
    throw Error(ErrorKind::InvalidArgument, "draws and estimates disagree on |U|");
  }
  HomogeneityTest out;
  out.statistic =
      std::sqrt(static_cast<double>(n)) * (theta.array() - theta.mean()).abs().maxCoeff();
  Index exceed = 0;
  for (Index b = 0; b < draws.rows(); ++b) {
    const double centered = (draws.row(b).array() - draws.row(b).mean()).abs().maxCoeff();
    if (centered >= out.statistic) ++exceed;
  }
  out.p_value = static_cast<double>(exceed) / static_cast<double>(draws.rows());
  return out;
}

BootstrapResult bootstrap_inference(const Matrix& psi, const Vector& theta, int num_draws, double alpha,
                                    std::uint64_t seed, MultiplierLaw law, std::size_t workers) {
  if (psi.cols() != theta.size()) {
    throw Error(ErrorKind::InvalidArgument, "scores and estimates disagree on |U|");
  }
  BootstrapResult out;
  if (num_draws < 100) out.warnings.emplace_back("fewer than 100 bootstrap draws");
  out.draws = multiplier_draws(psi, num_draws, seed, law, workers);
  out.bands = uniform_band(out.draws, theta, psi.rows(), alpha);
  for (std::size_t u = 0; u < out.bands.excluded.size(); ++u) {
    if (out.bands.excluded[u]) {
      std::ostringstream msg;
      msg << "interval " << u << " has zero bootstrap variance and is excluded from the sup-t band";
      out.warnings.push_back(msg.str());
    }
  }
  if (theta.size() >= 2) {
    out.homogeneity = homogeneity_test(out.draws, theta, psi.rows());
  }
  return out;
}

}  // namespace oasd
