#include "tvhazard/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tvhazard {

CampaignSpec default_campaign_spec() {
  CampaignSpec spec;
  spec.d = 40;
  spec.horizon = 9.0;
  spec.n = 1000;
  spec.baseline_level = 0.0;
  spec.feature_density = 0.15;
  spec.scan_times.clear();
  for (int k = 1; k <= 17; ++k) spec.scan_times.push_back(0.5 * k);
  spec.seed = 1;
  spec.active = {
      {3, {{0.5, 1.2}, {2.0, 0.0}}},
      {11, {{2.5, 1.0}, {4.0, 0.0}}},
      {20, {{1.0, 0.5}, {3.0, 1.5}, {4.0, 0.0}}},
      {33, {{1.5, 1.0}, {3.0, 0.0}, {6.0, 1.0}}},
  };
  return spec;
}

void validate(const CampaignSpec& spec) {
  if (spec.d < 1) throw ValidationError("campaign needs at least one feature");
  if (!std::isfinite(spec.horizon) || spec.horizon <= 0.0) throw ValidationError("horizon must be positive");
  if (spec.n == 0) throw ValidationError("campaign needs at least one site");
  if (!(spec.feature_density >= 0.0 && spec.feature_density <= 1.0)) {
    throw ValidationError("feature_density must lie in [0, 1]");
  }
  if (!(spec.toggle_fraction >= 0.0 && spec.toggle_fraction <= 1.0)) {
    throw ValidationError("toggle_fraction must lie in [0, 1]");
  }
  if (!std::isfinite(spec.baseline_level) || spec.baseline_level < 0.0) {
    throw ValidationError("baseline level must be finite and nonnegative");
  }
  for (std::size_t i = 0; i < spec.scan_times.size(); ++i) {
    const double s = spec.scan_times[i];
    if (!(s > 0.0 && s < spec.horizon)) throw ValidationError("scan times must lie in (0, horizon)");
    if (i > 0 && !(s > spec.scan_times[i - 1])) throw ValidationError("scan times must be strictly increasing");
  }
  bool any_level = false;
  std::vector<int> seen;
  for (const auto& a : spec.active) {
    if (a.index < 0 || a.index >= spec.d) throw ValidationError("active feature index outside [0, d)");
    if (std::find(seen.begin(), seen.end(), a.index) != seen.end()) {
      throw ValidationError("active feature listed twice");
    }
    seen.push_back(a.index);
    for (std::size_t i = 0; i < a.levels.size(); ++i) {
      const auto& l = a.levels[i];
      if (!std::isfinite(l.level) || l.level < 0.0) throw ValidationError("planted levels must be nonnegative");
      if (!(l.t >= 0.0 && l.t <= spec.horizon)) throw ValidationError("planted change outside [0, horizon]");
      if (i > 0 && !(l.t > a.levels[i - 1].t)) throw ValidationError("planted change times must increase");
      any_level = any_level || l.level > 0.0;
    }
  }
  if (!spec.active.empty() && !any_level && spec.baseline_level == 0.0) {
    throw ValidationError("degenerate truth");
  }
}

HazardModel planted_model(const CampaignSpec& spec) {
  validate(spec);
  std::vector<double> times;
  for (const auto& a : spec.active) {
    for (const auto& l : a.levels) times.push_back(l.t);
  }
  auto knots = make_knot_set(std::move(times), spec.horizon);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(spec.d + 1, static_cast<Eigen::Index>(knots->num_segments()));
  w.row(0).setConstant(spec.baseline_level);
  for (const auto& a : spec.active) {
    double running_max = 0.0;
    std::size_t next = 0;
    double level = 0.0;
    for (std::size_t k = 0; k < knots->num_segments(); ++k) {
      const double start = knots->segment_begin(k);
      while (next < a.levels.size() && a.levels[next].t <= start + kKnotMergeTolerance) {
        level = a.levels[next].level;
        running_max = std::max(running_max, level);
        ++next;
      }
      w(a.index + 1, static_cast<Eigen::Index>(k)) = spec.monotone_truth ? running_max : level;
    }
  }
  return HazardModel(std::move(knots), std::move(w));
}

double uniform_open(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

std::optional<double> event_time_for_uniform(const FeaturePath& path, const HazardModel& truth, double u) {
  if (!(u > 0.0 && u < 1.0)) throw ValidationError("uniform draw must lie in (0, 1)");
  const double target = -std::log(u);
  const double horizon = truth.knots().horizon();
  std::vector<double> cuts = truth.knots().times();
  for (const auto& track : path.tracks()) {
    for (const auto& c : track.changes) {
      if (c.t > 0.0 && c.t < horizon) cuts.push_back(c.t);
    }
  }
  cuts.push_back(horizon);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  double accumulated = 0.0;
  double start = 0.0;
  for (double end : cuts) {
    if (end <= start) continue;
    const double rate = hazard(truth, path, start);
    const double piece = rate * (end - start);
    if (rate > 0.0 && accumulated + piece >= target) {
      return std::min(end, start + (target - accumulated) / rate);
    }
    accumulated += piece;
    start = end;
  }
  return std::nullopt;
}

std::optional<double> sample_event_time(const FeaturePath& path, const HazardModel& truth, std::mt19937_64& rng) {
  return event_time_for_uniform(path, truth, uniform_open(rng));
}

SimulatedData generate(const CampaignSpec& spec) {
  HazardModel truth = planted_model(spec);
  std::vector<double> scans = spec.scan_times;
  // The end of observation acts as a final scan so every compromise before
  // the horizon gets a bracket.
  scans.push_back(spec.horizon);

  SimulatedData out{std::move(truth), {}, {}};
  out.observations.reserve(spec.n);
  out.event_times.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
    std::mt19937_64 rng(seq);
    std::vector<FeatureTrack> tracks;
    for (int j = 0; j < spec.d; ++j) {
      if (uniform_open(rng) >= spec.feature_density) continue;
      FeatureTrack track{j, {{0.0, 1.0}}};
      if (uniform_open(rng) < spec.toggle_fraction) track.changes.push_back({uniform_open(rng) * spec.horizon, 0.0});
      tracks.push_back(std::move(track));
    }
    FeaturePath path(spec.d, std::move(tracks));
    const std::optional<double> tau = sample_event_time(path, out.truth, rng);

    Censoring censoring = RightCensored{spec.horizon};
    if (tau) {
      auto first = std::lower_bound(scans.begin(), scans.end(), *tau);
      const double right = *first;
      const double left = first == scans.begin() ? 0.0 : *std::prev(first);
      censoring = IntervalCensored{left, right};
    }
    out.observations.push_back({"site" + std::to_string(i), censoring, std::move(path)});
    out.event_times.push_back(tau);
  }
  return out;
}

}  // namespace tvhazard
