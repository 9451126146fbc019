#pragma once

#include "oasd/cdf_tools.hpp"
#include "oasd/lasso_logit.hpp"
#include "oasd/riesz.hpp"
#include "oasd/types.hpp"

#include <string>
#include <vector>

namespace oasd {

/// Estimated nuisances for one interval u, evaluated at every observation.
struct NuisanceBundle {
  IntervalU u;
  double p_hat = 0.0;
  Vector if_values;            // IF_hat(u, D_i, X_i)
  Vector dif_values;           // DIF_hat(u, D_i, X_i)
  Vector l_values;             // L_hat(D_i, X_i)
  Vector indicator_integrals;  // integral of 1{Y_i < y} over u
  Vector in_interval;          // 1{y1 < Y_i < y2}

  Index n() const { return if_values.size(); }
  void validate() const;
};

struct OasdEstimate {
  IntervalU u;
  double theta = 0.0;
  Vector psi_values;
  double se = 0.0;
  double p_hat = 0.0;
  std::vector<std::string> flags;
};

/// (1/n) sum_i 1{y1 < Y_i < y2}. Throws ErrorKind::Numerical when it is zero.
double p_hat(const Dataset& data, const IntervalU& u);

/// Smallest admissible P_hat: intervals with fewer than this share of the
/// sample are rejected.
double min_p_hat(Index n);

/// Orthogonal score at theta:
///   psi_i = -DIF_i/P - theta - (L_i/P)(IF_i - I_i) + (mean_dif/P^2)(1{y1<Y_i<y2} - P)
Vector score_psi(const NuisanceBundle& bundle, double theta, double mean_dif);

/// Non-orthogonal score of the plug-in identification: -DIF_i/P - theta.
Vector naive_psi(const NuisanceBundle& bundle, double theta);

/// Root of the empirical orthogonal moment.
OasdEstimate theta_adml(const NuisanceBundle& bundle);
/// theta = -mean(DIF)/P.
OasdEstimate theta_naive(const NuisanceBundle& bundle);

/// Shared fitted nuisances for a sample; per-interval bundles are assembled from it.
struct NuisanceModel {
  const Dataset* data = nullptr;
  const DistRegFit* dist = nullptr;
  const RieszFit* riesz = nullptr;
  DiffScheme scheme;
  IntegralOptions integral;
};

class NuisanceAssembler {
 public:
  explicit NuisanceAssembler(const NuisanceModel& model);

  /// Throws ErrorKind::Numerical when the interval is not usable.
  NuisanceBundle bundle(const IntervalU& u);

 private:
  NuisanceModel model_;
  IndexTable table_;
  Vector l_values_;
};

}  // namespace oasd
