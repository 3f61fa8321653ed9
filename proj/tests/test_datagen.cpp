#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "tvhazard/datagen.hpp"

using namespace tvhazard;

namespace {

HazardModel baseline_only(std::vector<double> knots, std::vector<double> levels, double horizon) {
  Eigen::MatrixXd w(1, static_cast<Eigen::Index>(levels.size()));
  for (std::size_t k = 0; k < levels.size(); ++k) w(0, static_cast<Eigen::Index>(k)) = levels[k];
  return HazardModel(make_knot_set(std::move(knots), horizon), w);
}

CampaignSpec tiny_spec() {
  CampaignSpec spec;
  spec.d = 3;
  spec.horizon = 5.0;
  spec.n = 500;
  spec.baseline_level = 0.1;
  spec.feature_density = 0.5;
  spec.scan_times = {1.0, 2.0, 3.0, 4.0};
  spec.seed = 77;
  spec.active = {{1, {{0.0, 0.3}, {2.5, 1.0}}}};
  spec.toggle_fraction = 0.3;
  return spec;
}

}  // namespace

TEST_CASE("constant hazard gives exponential event times") {
  const auto m = baseline_only({}, {0.7}, 1e6);
  std::mt19937_64 rng(1);
  std::vector<double> sample;
  for (int i = 0; i < 5000; ++i) sample.push_back(sample_event_time(FeaturePath(0), m, rng).value());
  const double ks = oracle::ks_statistic(sample, [](double t) { return 1.0 - std::exp(-0.7 * t); });
  CHECK(ks < oracle::ks_critical_1pct(sample.size()));
}

TEST_CASE("two-segment hazard matches the piecewise exponential law") {
  // Hazard 0.5 on [0, 1), 2.0 afterwards: F(t) = 1 - exp(-Lambda(t)).
  const auto m = baseline_only({1.0}, {0.5, 2.0}, 1e6);
  const auto cdf = [](double t) { return 1.0 - std::exp(-(t < 1.0 ? 0.5 * t : 0.5 + 2.0 * (t - 1.0))); };
  const auto quantile = [](double p) {
    const double target = -std::log(1.0 - p);
    return target < 0.5 ? target / 0.5 : 1.0 + (target - 0.5) / 2.0;
  };
  constexpr int kBins = 10;
  constexpr int kDraws = 20000;
  std::vector<double> edges;
  for (int b = 1; b < kBins; ++b) edges.push_back(quantile(static_cast<double>(b) / kBins));
  std::vector<int> counts(kBins, 0);
  std::mt19937_64 rng(2);
  for (int i = 0; i < kDraws; ++i) {
    const double t = sample_event_time(FeaturePath(0), m, rng).value();
    counts[static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), t) - edges.begin())]++;
  }
  double chi2 = 0.0;
  for (int c : counts) chi2 += std::pow(c - kDraws / kBins, 2) / (kDraws / kBins);
  CHECK(chi2 < 21.666);  // 99th percentile of chi-square with 9 degrees of freedom
  CHECK(cdf(quantile(0.3)) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("inverse sampling is consistent with the cumulative hazard") {
  std::mt19937_64 rng(3);
  const auto knots = make_knot_set({0.5, 2.0, 3.5}, 6.0);
  for (int c = 0; c < 300; ++c) {
    const HazardModel m(knots, testing::random_values(rng, 4, 4, 0.0, 1.0));
    const auto p = testing::random_path(rng, 3, 6.0);
    const double u = uniform_open(rng);
    const auto t = event_time_for_uniform(p, m, u);
    const double total = cumulative_hazard(m, p, 0.0, 6.0);
    if (t) {
      CHECK(std::abs(cumulative_hazard(m, p, 0.0, *t) + std::log(u)) < 1e-10);
    } else {
      CHECK(total < -std::log(u));
    }
  }
}

TEST_CASE("draws beyond the total hazard survive") {
  const auto m = baseline_only({}, {0.1}, 2.0);
  CHECK_FALSE(event_time_for_uniform(FeaturePath(0), m, std::exp(-0.3)).has_value());
  CHECK(event_time_for_uniform(FeaturePath(0), m, std::exp(-0.1)).value() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(event_time_for_uniform(FeaturePath(0), m, 0.0), ValidationError);
}

TEST_CASE("brackets contain the true event time") {
  const auto data = generate(tiny_spec());
  std::size_t events = 0;
  for (std::size_t i = 0; i < data.observations.size(); ++i) {
    const auto& o = data.observations[i];
    const auto& tau = data.event_times[i];
    if (const auto* iv = std::get_if<IntervalCensored>(&o.censoring)) {
      REQUIRE(tau.has_value());
      CHECK(iv->left < *tau);
      CHECK(*tau <= iv->right);
      ++events;
    } else {
      CHECK(std::get<RightCensored>(o.censoring).at == 5.0);
      CHECK_FALSE(tau.has_value());
    }
  }
  CHECK(events > 100);
}

TEST_CASE("survivor fraction of a constant hazard") {
  CampaignSpec spec;
  spec.d = 1;
  spec.horizon = 2.0;
  spec.n = 1000;
  spec.baseline_level = 0.5;
  spec.feature_density = 0.0;
  spec.scan_times = {1.0};
  spec.seed = 4;
  const auto data = generate(spec);
  double survived = 0.0;
  for (const auto& o : data.observations) survived += o.is_interval() ? 0.0 : 1.0;
  const double p = std::exp(-1.0);
  const double sigma = std::sqrt(p * (1.0 - p) / 1000.0);
  CHECK(std::abs(survived / 1000.0 - p) < 3.0 * sigma);
}

TEST_CASE("zero baseline without campaigns leaves every site right-censored") {
  CampaignSpec spec;
  spec.d = 2;
  spec.horizon = 3.0;
  spec.n = 50;
  spec.scan_times = {1.0, 2.0};
  for (const auto& o : generate(spec).observations) {
    REQUIRE_FALSE(o.is_interval());
    CHECK(std::get<RightCensored>(o.censoring).at == 3.0);
  }
}

TEST_CASE("no compromise is bracketed before a campaign starts") {
  CampaignSpec spec;
  spec.d = 1;
  spec.horizon = 4.0;
  spec.n = 300;
  spec.feature_density = 1.0;
  spec.scan_times = {0.5, 1.0, 1.5, 2.0, 3.0};
  spec.active = {{0, {{1.0, 2.0}}}};
  spec.seed = 5;
  for (const auto& o : generate(spec).observations) {
    if (const auto* iv = std::get_if<IntervalCensored>(&o.censoring)) CHECK(iv->right >= 1.5);
  }
}

TEST_CASE("generation is deterministic per seed and per site") {
  auto spec = tiny_spec();
  const auto a = generate(spec), b = generate(spec);
  CHECK(a.observations == b.observations);
  CHECK(a.event_times == b.event_times);
  spec.n = 100;
  const auto prefix = generate(spec);
  CHECK(std::equal(prefix.observations.begin(), prefix.observations.end(), a.observations.begin()));
  spec.seed = 78;
  CHECK_FALSE(generate(spec).observations == prefix.observations);
}

TEST_CASE("planted model and monotone truth") {
  auto spec = tiny_spec();
  spec.active = {{0, {{1.0, 0.8}, {3.0, 0.2}}}};
  const HazardModel plain = planted_model(spec);
  const FeaturePath on(3, {FeatureTrack{0, {{0.0, 1.0}}}});
  CHECK(hazard(plain, on, 0.5) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(hazard(plain, on, 2.0) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(hazard(plain, on, 4.0) == doctest::Approx(0.3).epsilon(1e-15));
  spec.monotone_truth = true;
  CHECK(hazard(planted_model(spec), on, 4.0) == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("spec validation") {
  auto spec = tiny_spec();
  spec.baseline_level = 0.0;
  spec.active = {{0, {{1.0, 0.0}}}};
  CHECK_THROWS_WITH_AS(validate(spec), "degenerate truth", ValidationError);
  spec = tiny_spec();
  spec.scan_times = {2.0, 1.0};
  CHECK_THROWS_AS(validate(spec), ValidationError);
  spec = tiny_spec();
  spec.active = {{3, {{1.0, 1.0}}}};
  CHECK_THROWS_AS(validate(spec), ValidationError);
  spec = tiny_spec();
  spec.active = {{0, {{1.0, -1.0}}}};
  CHECK_THROWS_AS(validate(spec), ValidationError);
  CHECK_NOTHROW(validate(default_campaign_spec()));
}

TEST_CASE("default scenario shape") {
  const auto spec = default_campaign_spec();
  CHECK(spec.d == 40);
  CHECK(spec.n == 1000);
  CHECK(spec.active.size() == 4);
  for (const auto& a : spec.active) {
    CHECK(a.levels.size() >= 2);
    CHECK(a.levels.size() <= 3);
  }
}
