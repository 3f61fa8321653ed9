#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "tvhazard/likelihood.hpp"

namespace tvhazard {

struct PlantedLevel {
  double t;
  double level;
};

/// Coefficient path of one attacked feature: 0 until the first change, then
/// the level of the latest change.
struct ActiveFeature {
  int index;
  std::vector<PlantedLevel> levels;
};

/**
 * Synthetic attack-campaign scenario. Sites carry binary features drawn
 * independently with probability `feature_density`; global blacklist scans at
 * `scan_times` turn each compromise into an interval-censored bracket and
 * sites that survive the horizon are right-censored there.
 */
struct CampaignSpec {
  int d = 40;
  std::vector<ActiveFeature> active;
  double baseline_level = 0.0;
  double horizon = 1.0;
  std::size_t n = 1000;
  double feature_density = 0.15;
  std::vector<double> scan_times;
  /// Replace every planted level sequence by its running maximum.
  bool monotone_truth = false;
  std::uint64_t seed = 0;
  /// Probability that a present feature is switched off at a uniform random
  /// time (a patch or upgrade) instead of staying on.
  double toggle_fraction = 0.0;
};

/// 40 features, 4 attacked in campaigns that start and stop, no background
/// rate, n = 1000, horizon 9 and a scan every 0.5.
CampaignSpec default_campaign_spec();

/// Throws ValidationError on an ill-formed spec, including "degenerate truth"
/// when campaigns are listed but every planted level and the baseline are 0.
void validate(const CampaignSpec& spec);

HazardModel planted_model(const CampaignSpec& spec);

struct SimulatedData {
  HazardModel truth;
  std::vector<Observation> observations;
  /// Exact compromise time per site; empty when the site survived the horizon.
  std::vector<std::optional<double>> event_times;
};

/// Deterministic given spec.seed; site i draws from its own stream.
SimulatedData generate(const CampaignSpec& spec);

/// Uniform draw in (0, 1) from 53 random bits.
double uniform_open(std::mt19937_64& rng);

/**
 * Inverse of t -> cumulative_hazard(0, t): the time at which the cumulative
 * hazard reaches -log(u), or nullopt (survived) if that exceeds the horizon.
 */
std::optional<double> event_time_for_uniform(const FeaturePath& path, const HazardModel& truth, double u);

std::optional<double> sample_event_time(const FeaturePath& path, const HazardModel& truth, std::mt19937_64& rng);

}  // namespace tvhazard
