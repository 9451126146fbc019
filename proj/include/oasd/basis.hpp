#pragma once

#include "oasd/types.hpp"

#include <string>
#include <vector>

namespace oasd {

/// Dictionary families.
///
/// Interactions (degree 1 or 2): (D, X_1..X_K) for degree 1; for degree 2 the
/// columns are ordered
///   D, X_1..X_K, D^2, X_1^2..X_K^2, D*X_1..D*X_K, X_1X_2, X_1X_3, ..., X_{K-1}X_K
/// so p = 2(K+1) + K(K+1)/2.
///
/// Powers (degree 1..3): D, X, D^2, X^2, D^3, X^3 (no cross terms), p = degree*(K+1).
enum class BasisKind { Interactions, Powers };

struct BasisSpec {
  BasisKind kind = BasisKind::Interactions;
  int degree = 2;
  bool include_treatment = true;
  bool standardize = true;

  void validate() const;
  /// Number of columns produced for K raw covariates.
  Index dimension(Index num_covariates) const;
};

/// A dictionary bound to a covariate count and to the centering/scaling
/// constants estimated on the fitting sample. Evaluation at any (d, x) reuses
/// the stored constants, so shifted evaluations stay on the fitting scale.
class Basis {
 public:
  static Basis fit(const Dataset& data, const BasisSpec& spec);

  const BasisSpec& spec() const { return spec_; }
  Index num_covariates() const { return num_covariates_; }
  Index dimension() const { return center_.size(); }
  const Vector& center() const { return center_; }
  const Vector& scale() const { return scale_; }
  const std::vector<std::string>& column_names() const { return names_; }

  /// Rows b(d_i + shift, x_i) under the stored standardization.
  Matrix evaluate(const Vector& d, const Matrix& x, double shift = 0.0) const;
  /// Rows of the treatment derivative of b at (d_i + shift, x_i).
  Matrix evaluate_derivative(const Vector& d, const Matrix& x, double shift = 0.0) const;

  /// Single-point versions.
  Vector evaluate_row(double d, const Vector& x) const;
  Vector evaluate_derivative_row(double d, const Vector& x) const;

  /// Maps coefficients on standardized columns back to raw columns. The
  /// returned intercept absorbs the centering terms.
  void to_raw_coefficients(double intercept, const Vector& beta, double& raw_intercept,
                           Vector& raw_beta) const;

  bool same_layout(const Basis& other) const;

 private:
  void check_covariates(const Matrix& x) const;

  BasisSpec spec_;
  Index num_covariates_ = 0;
  Vector center_;
  Vector scale_;
  std::vector<std::string> names_;
};

struct BasisExpansion {
  Basis basis;
  Matrix columns;        // n x p, b(D_i, X_i)
  Matrix deriv_columns;  // n x p, d/dD b(D_i, X_i)
};

BasisExpansion build_basis(const Dataset& data, const BasisSpec& spec);

/// Rows b(D_i + shift, X_i). Throws ErrorKind::InvalidArgument when the data
/// does not match the covariate layout the basis was fitted on.
Matrix evaluate_basis_at_shifted_treatment(const Basis& basis, const Dataset& data, double shift);

}  // namespace oasd
