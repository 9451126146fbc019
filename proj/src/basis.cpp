#include "oasd/basis.hpp"

#include <cmath>
#include <sstream>

namespace oasd {

namespace {

// Raw (unstandardized) columns or their d-derivatives, in the documented order.
Matrix raw_columns(const BasisSpec& spec, const Vector& d, const Matrix& x, double shift,
                   bool derivative) {
  const Index n = d.size();
  const Index k_cov = x.cols();
  Matrix out(n, spec.dimension(k_cov));
  const Eigen::ArrayXd dd = d.array() + shift;
  Index col = 0;
  auto put_zero = [&] { out.col(col++).setZero(); };

  if (spec.kind == BasisKind::Interactions) {
    if (derivative) {
      out.col(col++).setOnes();
      for (Index k = 0; k < k_cov; ++k) put_zero();
    } else {
      out.col(col++) = dd.matrix();
      for (Index k = 0; k < k_cov; ++k) out.col(col++) = x.col(k);
    }
    if (spec.degree == 2) {
      if (derivative) {
        out.col(col++) = (2.0 * dd).matrix();
        for (Index k = 0; k < k_cov; ++k) put_zero();
        for (Index k = 0; k < k_cov; ++k) out.col(col++) = x.col(k);
        for (Index j = 0; j < k_cov; ++j) {
          for (Index k = j + 1; k < k_cov; ++k) put_zero();
        }
      } else {
        out.col(col++) = dd.square().matrix();
        for (Index k = 0; k < k_cov; ++k) out.col(col++) = x.col(k).array().square().matrix();
        for (Index k = 0; k < k_cov; ++k) out.col(col++) = (dd * x.col(k).array()).matrix();
        for (Index j = 0; j < k_cov; ++j) {
          for (Index k = j + 1; k < k_cov; ++k) {
            out.col(col++) = (x.col(j).array() * x.col(k).array()).matrix();
          }
        }
      }
    }
    return out;
  }

  for (int power = 1; power <= spec.degree; ++power) {
    if (derivative) {
      if (power == 1) {
        out.col(col++).setOnes();
      } else {
        out.col(col++) = (static_cast<double>(power) * dd.pow(power - 1)).matrix();
      }
      for (Index k = 0; k < k_cov; ++k) put_zero();
    } else {
      out.col(col++) = dd.pow(power).matrix();
      for (Index k = 0; k < k_cov; ++k) out.col(col++) = x.col(k).array().pow(power).matrix();
    }
  }
  return out;
}

std::vector<std::string> make_names(const BasisSpec& spec, const std::vector<std::string>& cov) {
  std::vector<std::string> names;
  const auto k_cov = static_cast<Index>(cov.size());
  if (spec.kind == BasisKind::Interactions) {
    names.emplace_back("d");
    for (const auto& c : cov) names.push_back(c);
    if (spec.degree == 2) {
      names.emplace_back("d^2");
      for (const auto& c : cov) names.push_back(c + "^2");
      for (const auto& c : cov) names.push_back("d*" + c);
      for (Index j = 0; j < k_cov; ++j) {
        for (Index k = j + 1; k < k_cov; ++k) {
          names.push_back(cov[j] + "*" + cov[k]);
        }
      }
    }
  } else {
    for (int power = 1; power <= spec.degree; ++power) {
      const std::string suffix = power == 1 ? "" : "^" + std::to_string(power);
      names.push_back("d" + suffix);
      for (const auto& c : cov) names.push_back(c + suffix);
    }
  }
  return names;
}

}  // namespace

void BasisSpec::validate() const {
  if (!include_treatment) {
    throw Error(ErrorKind::Config, "basis must include the treatment");
  }
  const int max_degree = kind == BasisKind::Interactions ? 2 : 3;
  if (degree < 1 || degree > max_degree) {
    std::ostringstream msg;
    msg << "basis degree must lie in {1.." << max_degree << "}, got " << degree;
    throw Error(ErrorKind::Config, msg.str());
  }
}

Index BasisSpec::dimension(Index num_covariates) const {
  const Index k = num_covariates;
  if (kind == BasisKind::Powers) {
    return degree * (k + 1);
  }
  return degree == 1 ? k + 1 : 2 * (k + 1) + k * (k + 1) / 2;
}

Basis Basis::fit(const Dataset& data, const BasisSpec& spec) {
  spec.validate();
  data.validate();
  if (data.n() < 2) {
    throw Error(ErrorKind::Data, "basis construction needs at least two observations");
  }
  Basis basis;
  basis.spec_ = spec;
  basis.num_covariates_ = data.num_covariates();
  std::vector<std::string> cov = data.covariate_names;
  if (static_cast<Index>(cov.size()) != data.num_covariates()) {
    cov.clear();
    for (Index k = 0; k < data.num_covariates(); ++k) cov.push_back("x" + std::to_string(k + 1));
  }
  basis.names_ = make_names(spec, cov);

  const Index p = spec.dimension(data.num_covariates());
  basis.center_ = Vector::Zero(p);
  basis.scale_ = Vector::Ones(p);
  if (spec.standardize) {
    const Matrix raw = raw_columns(spec, data.d, data.x, 0.0, false);
    for (Index k = 0; k < p; ++k) {
      const double mean = raw.col(k).mean();
      const double var = (raw.col(k).array() - mean).square().mean();
      basis.center_[k] = mean;
      basis.scale_[k] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
  }
  return basis;
}

void Basis::check_covariates(const Matrix& x) const {
  if (x.cols() != num_covariates_) {
    std::ostringstream msg;
    msg << "basis was fitted on " << num_covariates_ << " covariates, got " << x.cols();
    throw Error(ErrorKind::InvalidArgument, msg.str());
  }
}

Matrix Basis::evaluate(const Vector& d, const Matrix& x, double shift) const {
  check_covariates(x);
  Matrix out = raw_columns(spec_, d, x, shift, false);
  if (spec_.standardize) {
    out.rowwise() -= center_.transpose();
    out.array().rowwise() /= scale_.transpose().array();
  }
  return out;
}

Matrix Basis::evaluate_derivative(const Vector& d, const Matrix& x, double shift) const {
  check_covariates(x);
  Matrix out = raw_columns(spec_, d, x, shift, true);
  if (spec_.standardize) {
    out.array().rowwise() /= scale_.transpose().array();
  }
  return out;
}

Vector Basis::evaluate_row(double d, const Vector& x) const {
  return evaluate(Vector::Constant(1, d), x.transpose()).row(0).transpose();
}

Vector Basis::evaluate_derivative_row(double d, const Vector& x) const {
  return evaluate_derivative(Vector::Constant(1, d), x.transpose()).row(0).transpose();
}

void Basis::to_raw_coefficients(double intercept, const Vector& beta, double& raw_intercept,
                                Vector& raw_beta) const {
  raw_beta = beta.array() / scale_.array();
  raw_intercept = intercept - raw_beta.dot(center_);
}

bool Basis::same_layout(const Basis& other) const {
  return spec_.kind == other.spec_.kind && spec_.degree == other.spec_.degree &&
         spec_.standardize == other.spec_.standardize &&
         num_covariates_ == other.num_covariates_ && center_ == other.center_ &&
         scale_ == other.scale_;
}

BasisExpansion build_basis(const Dataset& data, const BasisSpec& spec) {
  Basis basis = Basis::fit(data, spec);
  Matrix columns = basis.evaluate(data.d, data.x);
  Matrix deriv = basis.evaluate_derivative(data.d, data.x);
  return BasisExpansion{std::move(basis), std::move(columns), std::move(deriv)};
}

Matrix evaluate_basis_at_shifted_treatment(const Basis& basis, const Dataset& data, double shift) {
  return basis.evaluate(data.d, data.x, shift);
}

}  // namespace oasd
