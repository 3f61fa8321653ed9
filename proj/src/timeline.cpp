#include "tvhazard/timeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tvhazard/error.hpp"

namespace tvhazard {

KnotSet::KnotSet(std::vector<double> times, double horizon) : horizon_(horizon) {
  if (!std::isfinite(horizon) || horizon <= 0.0) {
    throw ValidationError("knot set horizon must be finite and positive");
  }
  for (double t : times) {
    if (!std::isfinite(t) || t < 0.0 || t > horizon + kKnotMergeTolerance) {
      throw ValidationError("knot time outside [0, horizon]");
    }
  }
  std::sort(times.begin(), times.end());
  times_.reserve(times.size());
  double last = origin();
  for (double t : times) {
    // A knot at the origin would only duplicate the base level.
    if (t - last < kKnotMergeTolerance) continue;
    times_.push_back(std::min(t, horizon));
    last = t;
  }
}

std::size_t KnotSet::segment_of(double t) const {
  return static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
}

double KnotSet::segment_begin(std::size_t k) const { return k == 0 ? origin() : times_[k - 1]; }

double KnotSet::segment_end(std::size_t k) const {
  return k < times_.size() ? times_[k] : std::numeric_limits<double>::infinity();
}

KnotSetPtr make_knot_set(std::vector<double> times, double horizon) {
  return std::make_shared<const KnotSet>(std::move(times), horizon);
}

Eigen::VectorXd levels_from_jumps(double base, std::span<const double> jumps) {
  Eigen::VectorXd levels(static_cast<Eigen::Index>(jumps.size()) + 1);
  levels[0] = base;
  for (std::size_t k = 0; k < jumps.size(); ++k) {
    levels[static_cast<Eigen::Index>(k) + 1] = levels[static_cast<Eigen::Index>(k)] + jumps[k];
  }
  return levels;
}

std::vector<double> jumps_from_levels(const Eigen::VectorXd& levels) {
  std::vector<double> jumps;
  if (levels.size() == 0) return jumps;
  jumps.reserve(static_cast<std::size_t>(levels.size() - 1));
  // Differences against the running reconstruction: zeros come back exactly
  // and nonnegative levels never rebuild to negative ones.
  double running = levels[0];
  for (Eigen::Index k = 1; k < levels.size(); ++k) {
    jumps.push_back(levels[k] - running);
    running += jumps.back();
  }
  return jumps;
}

Eigen::VectorXd canonical_levels(const Eigen::VectorXd& levels) {
  if (levels.size() == 0) return levels;
  Eigen::VectorXd current = levels;
  // One pass normally reaches the fixed point; the loop guards pathological
  // magnitude mixes.
  for (int pass = 0; pass < 8; ++pass) {
    Eigen::VectorXd rebuilt = levels_from_jumps(current[0], jumps_from_levels(current));
    if (rebuilt == current) break;
    current = std::move(rebuilt);
  }
  return current;
}

StepFunction::StepFunction(KnotSetPtr knots, Eigen::VectorXd values) : knots_(std::move(knots)) {
  if (!knots_) throw ValidationError("step function needs a knot set");
  if (values.size() != static_cast<Eigen::Index>(knots_->num_segments())) {
    throw ValidationError("step function needs one value per segment");
  }
  if (!values.allFinite()) throw ValidationError("step function values must be finite");
  values_ = canonical_levels(values);
}

StepFunction StepFunction::constant(KnotSetPtr knots, double value) {
  const auto n = static_cast<Eigen::Index>(knots->num_segments());
  return StepFunction(std::move(knots), Eigen::VectorXd::Constant(n, value));
}

StepFunction StepFunction::from_jumps(KnotSetPtr knots, double base, std::span<const double> jumps) {
  if (jumps.size() != knots->size()) throw ValidationError("one jump per knot required");
  return StepFunction(std::move(knots), levels_from_jumps(base, jumps));
}

double StepFunction::operator()(double t) const {
  if (!(t >= knots_->origin() && t <= knots_->horizon())) {
    throw std::domain_error("time outside [origin, horizon]");
  }
  return values_[static_cast<Eigen::Index>(knots_->segment_of(t))];
}

double eval_step(const StepFunction& f, double t) { return f(t); }

FeaturePath::FeaturePath(int dimension, std::vector<FeatureTrack> tracks)
    : dimension_(dimension), tracks_(std::move(tracks)) {
  if (dimension < 0) throw ValidationError("negative feature dimension");
  std::sort(tracks_.begin(), tracks_.end(),
            [](const FeatureTrack& a, const FeatureTrack& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    const auto& track = tracks_[i];
    if (track.index < 0 || track.index >= dimension) {
      throw ValidationError("feature index " + std::to_string(track.index) + " outside [0, d)");
    }
    if (i > 0 && tracks_[i - 1].index == track.index) {
      throw ValidationError("duplicate feature index " + std::to_string(track.index));
    }
    for (std::size_t c = 0; c < track.changes.size(); ++c) {
      const auto& change = track.changes[c];
      if (!std::isfinite(change.t) || change.t < 0.0) {
        throw ValidationError("feature change time must be finite and nonnegative");
      }
      if (!std::isfinite(change.value) || change.value < 0.0) {
        throw ValidationError("feature values must be finite and nonnegative");
      }
      if (c > 0 && !(change.t > track.changes[c - 1].t)) {
        throw ValidationError("feature change times must be strictly increasing");
      }
    }
  }
}

const FeatureTrack* FeaturePath::track(int j) const {
  auto it = std::lower_bound(tracks_.begin(), tracks_.end(), j,
                             [](const FeatureTrack& t, int idx) { return t.index < idx; });
  return (it != tracks_.end() && it->index == j) ? &*it : nullptr;
}

namespace {

double track_value(const FeatureTrack& track, double t) {
  auto it = std::upper_bound(track.changes.begin(), track.changes.end(), t,
                             [](double time, const FeatureChange& c) { return time < c.t; });
  return it == track.changes.begin() ? 0.0 : std::prev(it)->value;
}

// Calls fn(begin, end, value) for every maximal piece of [a, b] on which the
// track is constant and nonzero.
template <class Fn>
void for_each_piece(const FeatureTrack& track, double a, double b, Fn&& fn) {
  const auto& ch = track.changes;
  for (std::size_t c = 0; c < ch.size(); ++c) {
    const double begin = std::max(ch[c].t, a);
    const double end = std::min(c + 1 < ch.size() ? ch[c + 1].t : b, b);
    if (end > begin && ch[c].value != 0.0) fn(begin, end, ch[c].value);
    if (c + 1 < ch.size() && ch[c + 1].t >= b) break;
  }
}

// Calls fn(segment, overlap_length) for every segment overlapping [a, b].
template <class Fn>
void for_each_segment(const KnotSet& knots, double a, double b, Fn&& fn) {
  for (std::size_t k = knots.segment_of(a); k < knots.num_segments(); ++k) {
    const double begin = std::max(knots.segment_begin(k), a);
    const double end = std::min(knots.segment_end(k), b);
    if (begin >= b) break;
    if (end > begin) fn(k, end - begin);
  }
}

void check_range(const KnotSet& knots, double a, double b) {
  if (!(a >= knots.origin() && b <= knots.horizon())) {
    throw std::domain_error("integration range outside [origin, horizon]");
  }
  if (b < a) throw ValidationError("reversed integration interval");
}

}  // namespace

double FeaturePath::value(int j, double t) const {
  if (j < 0 || j >= dimension_) throw std::out_of_range("feature index outside [0, d)");
  const FeatureTrack* tr = track(j);
  return tr ? track_value(*tr, t) : 0.0;
}

double eval_feature(const FeaturePath& p, int j, double t) { return p.value(j, t); }

double Observation::end_time() const {
  return std::visit(
      [](const auto& c) {
        if constexpr (std::is_same_v<std::decay_t<decltype(c)>, IntervalCensored>) {
          return c.right;
        } else {
          return c.at;
        }
      },
      censoring);
}

void validate_censoring(const Censoring& c) {
  if (const auto* iv = std::get_if<IntervalCensored>(&c)) {
    if (!std::isfinite(iv->left) || !std::isfinite(iv->right) || iv->left < 0.0 ||
        !(iv->left < iv->right)) {
      throw ValidationError("invalid censoring bracket");
    }
  } else {
    const double at = std::get<RightCensored>(c).at;
    if (!std::isfinite(at) || !(at > 0.0)) throw ValidationError("invalid censoring bracket");
  }
}

int dataset_dimension(std::span<const Observation> observations) {
  int d = 0;
  for (const auto& o : observations) d = std::max(d, o.path.dimension());
  return d;
}

KnotSetPtr build_knot_set(std::span<const Observation> observations) {
  if (observations.empty()) throw ValidationError("no observations");
  double horizon = 0.0;
  for (const auto& o : observations) {
    validate_censoring(o.censoring);
    horizon = std::max(horizon, o.end_time());
  }
  std::vector<double> times;
  for (const auto& o : observations) {
    if (const auto* iv = std::get_if<IntervalCensored>(&o.censoring)) {
      times.push_back(iv->left);
      times.push_back(iv->right);
    } else {
      times.push_back(std::get<RightCensored>(o.censoring).at);
    }
    for (const auto& track : o.path.tracks()) {
      for (const auto& change : track.changes) {
        // Changes past the horizon never enter an integral.
        if (change.t <= horizon) times.push_back(change.t);
      }
    }
  }
  return make_knot_set(std::move(times), horizon);
}

double integrate_step_product(const StepFunction& f, const FeaturePath& p, int j, double a, double b) {
  check_range(f.knots(), a, b);
  if (j < 0 || j >= p.dimension()) throw std::out_of_range("feature index outside [0, d)");
  const FeatureTrack* track = p.track(j);
  if (!track || a == b) return 0.0;
  double total = 0.0;
  for_each_piece(*track, a, b, [&](double begin, double end, double x) {
    for_each_segment(f.knots(), begin, end, [&](std::size_t k, double len) {
      total += len * x * f.values()[static_cast<Eigen::Index>(k)];
    });
  });
  return total;
}

std::vector<ExposureEntry> exposure(const KnotSet& knots, const FeaturePath& p, double a, double b) {
  check_range(knots, a, b);
  std::vector<ExposureEntry> entries;
  if (a == b) return entries;
  auto add = [&](int row, std::size_t segment, double w) {
    const int seg = static_cast<int>(segment);
    if (!entries.empty() && entries.back().row == row && entries.back().segment == seg) {
      entries.back().weight += w;
    } else {
      entries.push_back({row, seg, w});
    }
  };
  for_each_segment(knots, a, b, [&](std::size_t k, double len) { add(0, k, len); });
  for (const auto& track : p.tracks()) {
    for_each_piece(track, a, b, [&](double begin, double end, double x) {
      for_each_segment(knots, begin, end, [&](std::size_t k, double len) { add(track.index + 1, k, len * x); });
    });
  }
  return entries;
}

}  // namespace tvhazard
