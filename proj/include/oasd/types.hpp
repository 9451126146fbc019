#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace oasd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class ErrorKind {
  InvalidArgument,
  Config,
  Data,
  Numerical,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// n observations of (Y, D, X). X is n x K, row i holds the covariates of observation i.
struct Dataset {
  Vector y;
  Vector d;
  Matrix x;
  std::vector<std::string> covariate_names;

  Index n() const { return y.size(); }
  Index num_covariates() const { return x.cols(); }

  /// Throws ErrorKind::Data naming the first row with a non-finite value.
  void validate() const;
};

/// Outcome interval u = (y1, y2) with y1 < y2.
struct IntervalU {
  double y1 = 0.0;
  double y2 = 0.0;

  double width() const { return y2 - y1; }
  static IntervalU make(double y1, double y2);
};

}  // namespace oasd
