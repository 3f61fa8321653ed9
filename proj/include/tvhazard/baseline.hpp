#pragma once

#include <span>
#include <string>

#include <Eigen/Dense>

#include "tvhazard/likelihood.hpp"

namespace tvhazard {

/// Additive hazard with time-constant coefficients.
struct ConstantAdditiveModel {
  double intercept = 0.0;
  Eigen::VectorXd weights;
  bool converged = false;

  /// The same hazard as a (single-segment) HazardModel on [0, horizon].
  HazardModel to_hazard_model(double horizon) const;
};

/// Constant baseline rate times exp(w . x(t)).
struct ProportionalModel {
  double base_rate = 1.0;
  Eigen::VectorXd weights;
  bool converged = false;
  /// Set when the weights hit the box |w_j| <= 50.
  std::string diagnostic;
};

inline constexpr double kDefaultBaselineRidge = 1e-6;
inline constexpr double kProportionalWeightCap = 50.0;
/// Fitted weights beyond this size (hazard ratios above e^20) are reported
/// as diverging even when the gradient vanished before the cap.
inline constexpr double kProportionalDivergence = 20.0;

/// Minimizes the censored NLL over constant nonnegative rows plus
/// l2_weight * ||weights||^2, using the proximal solver on one segment.
ConstantAdditiveModel fit_constant_additive(std::span<const Observation> observations,
                                            double l2_weight = kDefaultBaselineRidge);

double constant_additive_nll(const ConstantAdditiveModel& model, std::span<const Observation> observations);

double proportional_cumulative_hazard(const ProportionalModel& model, const FeaturePath& p, double a, double b);
double proportional_nll(const ProportionalModel& model, std::span<const Observation> observations);
/// Gradient of proportional_nll with respect to (log base_rate, weights).
Eigen::VectorXd proportional_nll_gradient(const ProportionalModel& model, std::span<const Observation> observations);

/// L-BFGS on (log base_rate, weights) with the ridge on weights; weights are
/// boxed to |w_j| <= 50. The diagnostic is set when the box binds or a
/// weight exceeds kProportionalDivergence.
ProportionalModel fit_proportional(std::span<const Observation> observations,
                                   double l2_weight = kDefaultBaselineRidge);

}  // namespace tvhazard
