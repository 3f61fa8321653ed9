#pragma once

#include <random>
#include <vector>

#include "tvhazard/likelihood.hpp"

namespace tvhazard::testing {

/// Random sparse feature path: each feature present with probability
/// `density`, switched on at a random time and possibly changed later.
inline FeaturePath random_path(std::mt19937_64& rng, int d, double horizon, double density = 0.5) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<FeatureTrack> tracks;
  for (int j = 0; j < d; ++j) {
    if (u(rng) >= density) continue;
    FeatureTrack track{j, {}};
    double t = u(rng) < 0.5 ? 0.0 : 0.5 * horizon * u(rng);
    track.changes.push_back({t, 0.5 + u(rng)});
    if (u(rng) < 0.5) {
      t += (horizon - t) * u(rng) + 1e-3;
      track.changes.push_back({t, u(rng) < 0.3 ? 0.0 : 0.25 + u(rng)});
    }
    tracks.push_back(std::move(track));
  }
  return FeaturePath(d, std::move(tracks));
}

/// Mixed interval/right-censored sites on [0, horizon] with brackets drawn
/// from a small grid of scan times.
inline std::vector<Observation> random_observations(std::mt19937_64& rng, int n, int d, double horizon,
                                                    int scans) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, scans);
  std::vector<Observation> out;
  for (int i = 0; i < n; ++i) {
    Observation o;
    o.id = "s" + std::to_string(i);
    o.path = random_path(rng, d, horizon);
    if (u(rng) < 0.6) {
      int a = pick(rng), b = pick(rng);
      if (a == b) b = a + 1;
      if (a > b) std::swap(a, b);
      const double step = horizon / (scans + 1);
      o.censoring = IntervalCensored{a * step, std::min(b * step, horizon)};
    } else {
      o.censoring = RightCensored{horizon * (0.3 + 0.7 * u(rng))};
    }
    out.push_back(std::move(o));
  }
  return out;
}

/// Coefficient matrix with entries in [lo, hi).
inline Eigen::MatrixXd random_values(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo,
                                     double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd w(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = u(rng);
  }
  return w;
}

/// Composite Simpson rule with `n` (even) panels.
template <class F>
double simpson(F&& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Composite midpoint rule; never samples the endpoints, so it is exact for
/// integrands that are constant on (a, b) whatever their values at a and b.
template <class F>
double midpoint(F&& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += f(a + (i + 0.5) * h);
  return s * h;
}

}  // namespace tvhazard::testing
