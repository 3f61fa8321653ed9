#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace tvhazard {

/// Knots closer than this (in input time units) are merged into one.
inline constexpr double kKnotMergeTolerance = 1e-9;

/**
 * Sorted candidate jump times on [0, horizon].
 *
 * The knots split time into `size() + 1` segments. Segment 0 is
 * [0, times[0]), segment k is [times[k-1], times[k]) and the last segment
 * starts at the last knot and is open to the right. Lookups are
 * right-continuous: a time equal to a knot belongs to the segment that
 * starts there.
 */
class KnotSet {
public:
  /// Sorts, drops knots at the origin, merges near-duplicates. Throws
  /// ValidationError for non-finite times, times outside [0, horizon] or a
  /// non-positive horizon.
  KnotSet(std::vector<double> times, double horizon);

  const std::vector<double>& times() const { return times_; }
  double origin() const { return 0.0; }
  double horizon() const { return horizon_; }
  std::size_t size() const { return times_.size(); }
  std::size_t num_segments() const { return times_.size() + 1; }

  /// Index of the segment containing t (t >= 0).
  std::size_t segment_of(double t) const;
  double segment_begin(std::size_t k) const;
  /// +infinity for the last segment.
  double segment_end(std::size_t k) const;

  bool operator==(const KnotSet& other) const = default;

private:
  std::vector<double> times_;
  double horizon_;
};

using KnotSetPtr = std::shared_ptr<const KnotSet>;

KnotSetPtr make_knot_set(std::vector<double> times, double horizon);

/// Rewrites a level sequence so that rebuilding it from its jumps by running
/// floating-point sums reproduces it bit for bit. Moves each entry by at most
/// one rounding of the corresponding jump.
Eigen::VectorXd canonical_levels(const Eigen::VectorXd& levels);

/// Running-sum reconstruction used by every jump-list consumer.
Eigen::VectorXd levels_from_jumps(double base, std::span<const double> jumps);
std::vector<double> jumps_from_levels(const Eigen::VectorXd& levels);

/// Right-continuous piecewise-constant function on a knot partition.
class StepFunction {
public:
  /// One value per segment; values are canonicalized (see canonical_levels).
  StepFunction(KnotSetPtr knots, Eigen::VectorXd values);

  static StepFunction constant(KnotSetPtr knots, double value);
  /// base + sum over knots tau <= t of jumps[tau].
  static StepFunction from_jumps(KnotSetPtr knots, double base, std::span<const double> jumps);

  const KnotSet& knots() const { return *knots_; }
  const KnotSetPtr& knot_ptr() const { return knots_; }
  const Eigen::VectorXd& values() const { return values_; }
  double base() const { return values_[0]; }
  std::vector<double> jumps() const { return jumps_from_levels(values_); }

  /// Throws std::domain_error outside [origin, horizon].
  double operator()(double t) const;

private:
  KnotSetPtr knots_;
  Eigen::VectorXd values_;
};

double eval_step(const StepFunction& f, double t);

struct FeatureChange {
  double t;
  double value;
};

struct FeatureTrack {
  int index;
  std::vector<FeatureChange> changes;
};

/**
 * Sparse covariate trajectory of one site. Each listed feature is 0 until its
 * first change and then holds the most recent value (right-continuous);
 * unlisted features are identically zero.
 */
class FeaturePath {
public:
  FeaturePath() = default;
  explicit FeaturePath(int dimension) : dimension_(dimension) {}
  /// Throws ValidationError on duplicate or out-of-range indices,
  /// non-increasing change times, negative times or negative/non-finite values.
  FeaturePath(int dimension, std::vector<FeatureTrack> tracks);

  int dimension() const { return dimension_; }
  /// Sorted by feature index.
  const std::vector<FeatureTrack>& tracks() const { return tracks_; }
  const FeatureTrack* track(int j) const;

  /// Throws std::out_of_range when j is not in [0, dimension).
  double value(int j, double t) const;

  bool operator==(const FeaturePath&) const = default;

private:
  int dimension_ = 0;
  std::vector<FeatureTrack> tracks_;
};

double eval_feature(const FeaturePath& p, int j, double t);

struct IntervalCensored {
  double left;
  double right;
};

struct RightCensored {
  double at;
};

using Censoring = std::variant<IntervalCensored, RightCensored>;

struct Observation {
  std::string id;
  Censoring censoring;
  FeaturePath path;

  bool is_interval() const { return std::holds_alternative<IntervalCensored>(censoring); }
  /// Right end of the bracket, or the right-censoring time.
  double end_time() const;
};

inline bool operator==(const IntervalCensored& a, const IntervalCensored& b) {
  return a.left == b.left && a.right == b.right;
}
inline bool operator==(const RightCensored& a, const RightCensored& b) { return a.at == b.at; }
inline bool operator==(const FeatureChange& a, const FeatureChange& b) {
  return a.t == b.t && a.value == b.value;
}
inline bool operator==(const FeatureTrack& a, const FeatureTrack& b) {
  return a.index == b.index && a.changes == b.changes;
}
inline bool operator==(const Observation& a, const Observation& b) {
  return a.id == b.id && a.censoring == b.censoring && a.path == b.path;
}

/// Throws ValidationError("invalid censoring bracket") unless
/// 0 <= left < right (interval) or 0 < at (right), all finite.
void validate_censoring(const Censoring& c);

/// Largest feature dimension across the observations.
int dataset_dimension(std::span<const Observation> observations);

/**
 * Candidate knots for the penalized fit: every censoring boundary and every
 * feature change time, deduplicated, with horizon = latest censoring time.
 */
KnotSetPtr build_knot_set(std::span<const Observation> observations);

/// Exact integral of x_j(t) f(t) over [a, b].
double integrate_step_product(const StepFunction& f, const FeaturePath& p, int j, double a, double b);

/// One nonzero of an exposure matrix: integral over [a, b] of the covariate
/// of `row` (row 0 is the constant 1, row j+1 is feature j) restricted to
/// `segment`.
struct ExposureEntry {
  int row;
  int segment;
  double weight;
};

/// Sparse (d+1) x segments matrix E with <W, E> = integral of the hazard over
/// [a, b] for any coefficient matrix W on `knots`. Sorted by (row, segment).
std::vector<ExposureEntry> exposure(const KnotSet& knots, const FeaturePath& p, double a, double b);

}  // namespace tvhazard
