#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tvhazard/error.hpp"
#include "tvhazard/timeline.hpp"

namespace tvhazard {

/**
 * Additive hazard lambda(x, t) = w_0(t) + sum_j x_j(t) w_{j+1}(t) with every
 * coefficient path piecewise constant on a shared knot set.
 *
 * Stored as a dense (d+1) x segments matrix; row 0 is the baseline w_0 and
 * row j+1 belongs to feature j. All entries are finite and nonnegative, so the
 * hazard is valid for every nonnegative feature path. Rows are kept in
 * canonical form (see canonical_levels) so that jump-list serialization is
 * lossless.
 */
class HazardModel {
public:
  HazardModel(KnotSetPtr knots, Eigen::MatrixXd values);

  static HazardModel zeros(KnotSetPtr knots, int dimension);

  int dimension() const { return static_cast<int>(values_.rows()) - 1; }
  const KnotSet& knots() const { return *knots_; }
  const KnotSetPtr& knot_ptr() const { return knots_; }
  const Eigen::MatrixXd& values() const { return values_; }

  StepFunction intercept() const { return row(0); }
  /// Coefficient path of feature j.
  StepFunction coefficient(int j) const { return row(j + 1); }
  StepFunction row(int r) const;

private:
  KnotSetPtr knots_;
  Eigen::MatrixXd values_;
};

double hazard(const HazardModel& m, const FeaturePath& p, double t);
double cumulative_hazard(const HazardModel& m, const FeaturePath& p, double a, double b);
double survival(const HazardModel& m, const FeaturePath& p, double t);

/// -log(1 - exp(-x)) for x >= 0; +infinity at 0.
double neg_log_one_minus_exp(double x);

/**
 * Negative log-likelihood of one site. Right(at): Lambda(0, at).
 * Interval(l, r): Lambda(0, l) - log(1 - exp(-Lambda(l, r))). A bracket the
 * model gives zero mass yields +infinity and, when `warnings` is set, a
 * "zero_interval_mass" warning.
 */
double nll_observation(const HazardModel& m, const Observation& o, std::vector<Warning>* warnings = nullptr);

/// Sum of per-site terms in input order.
double nll_dataset(const HazardModel& m, std::span<const Observation> observations,
                   std::vector<Warning>* warnings = nullptr);

/// d nll_dataset / d values(r, k). Throws NumericalError if a bracket has zero
/// mass (the gradient is unbounded there).
Eigen::MatrixXd nll_gradient(const HazardModel& m, std::span<const Observation> observations);

/**
 * Dataset compiled against a fixed knot set for repeated evaluation: each
 * site's cumulative hazards become sparse inner products with the
 * coefficient matrix. Evaluation order is the input order.
 */
class CensoredDesign {
public:
  CensoredDesign(KnotSetPtr knots, int dimension, std::span<const Observation> observations);

  std::size_t size() const { return terms_.size(); }
  int rows() const { return dimension_ + 1; }
  int cols() const { return static_cast<int>(knots_->num_segments()); }
  const KnotSetPtr& knots() const { return knots_; }

  double nll(const Eigen::MatrixXd& w) const;
  double nll(const Eigen::MatrixXd& w, std::span<const std::size_t> subset) const;

  /// Writes the gradient into `grad` (resized) and returns the NLL. Throws
  /// NumericalError on a zero-mass bracket.
  double nll_and_gradient(const Eigen::MatrixXd& w, Eigen::MatrixXd& grad) const;
  double nll_and_gradient(const Eigen::MatrixXd& w, std::span<const std::size_t> subset,
                          Eigen::MatrixXd& grad) const;

  /// Total time at risk and number of interval-censored sites.
  double total_exposure() const { return total_exposure_; }
  std::size_t event_count() const { return events_; }

private:
  struct Term {
    std::vector<ExposureEntry> before;
    std::vector<ExposureEntry> bracket;
    bool interval;
  };

  double term_nll(const Term& t, const Eigen::MatrixXd& w) const;
  double term_gradient(const Term& t, const Eigen::MatrixXd& w, Eigen::MatrixXd& grad) const;

  KnotSetPtr knots_;
  int dimension_;
  std::vector<Term> terms_;
  double total_exposure_ = 0.0;
  std::size_t events_ = 0;
};

}  // namespace tvhazard
