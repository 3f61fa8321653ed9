#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "tvhazard/datagen.hpp"
#include "tvhazard/solver.hpp"

using namespace tvhazard;

namespace {

std::vector<Observation> small_campaign(std::uint64_t seed, std::size_t n = 300) {
  CampaignSpec spec;
  spec.d = 4;
  spec.horizon = 6.0;
  spec.n = n;
  spec.baseline_level = 0.05;
  spec.feature_density = 0.4;
  spec.scan_times = {1.0, 2.0, 3.0, 4.0, 5.0};
  spec.seed = seed;
  spec.active = {{1, {{0.0, 0.2}, {2.0, 1.0}}}, {3, {{3.0, 0.6}}}};
  return generate(spec).observations;
}

/// Scalar NLL of an intercept-only model, minimized by golden section.
double intercept_mle(const std::vector<Observation>& obs, double horizon) {
  const auto nll = [&](double rate) {
    Eigen::MatrixXd w(1, 1);
    w(0, 0) = rate;
    return nll_dataset(HazardModel(make_knot_set({}, horizon), w), obs);
  };
  double lo = 1e-6, hi = 10.0;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int i = 0; i < 200; ++i) {
    const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
    (nll(a) < nll(b) ? hi : lo) = (nll(a) < nll(b) ? b : a);
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("objective adds the likelihood and the weighted total variation") {
  std::mt19937_64 rng(1);
  const auto obs = testing::random_observations(rng, 30, 3, 5.0, 4);
  const auto knots = make_knot_set({1.0, 2.0, 3.0}, 5.0);
  const HazardModel m(knots, testing::random_values(rng, 4, 4, 0.05, 1.0));
  PenaltyConfig p;
  CHECK(objective(m, obs, p) == nll_dataset(m, obs));
  p.gamma = 0.7;
  double tv_sum = 0.0;
  for (Eigen::Index r = 0; r < 4; ++r) {
    for (Eigen::Index k = 1; k < 4; ++k) tv_sum += std::abs(m.values()(r, k) - m.values()(r, k - 1));
  }
  CHECK(objective(m, obs, p) == doctest::Approx(nll_dataset(m, obs) + 0.7 * tv_sum).epsilon(1e-14));
  const HazardModel flat(knots, Eigen::MatrixXd::Constant(4, 4, 0.3));
  CHECK(objective(flat, obs, p) == doctest::Approx(nll_dataset(flat, obs)).epsilon(1e-15));
}

TEST_CASE("parameter count follows the jump list") {
  const auto knots = make_knot_set({1.0, 2.0, 3.0}, 3.0);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 4);
  w.row(0).setConstant(0.5);
  w.row(2) << 0.0, 1.0, 2.0, 5.0;
  // Row 0: base only. Row 2: zero base, jumps at 1 and 2; the knot at the
  // horizon starts an empty segment and is not counted.
  CHECK(nonzero_parameter_count(HazardModel(knots, w)) == 3);
}

TEST_CASE("embedding on a finer knot set keeps the function") {
  std::mt19937_64 rng(2);
  const HazardModel m(make_knot_set({1.0, 3.0}, 5.0), testing::random_values(rng, 3, 3, 0.0, 1.0));
  const HazardModel fine = embed(m, make_knot_set({0.5, 1.0, 2.0, 3.0, 4.0}, 5.0));
  const auto p = testing::random_path(rng, 2, 5.0, 1.0);
  for (double t = 0.0; t <= 5.0; t += 0.25) CHECK(hazard(fine, p, t) == hazard(m, p, t));
}

TEST_CASE("full-batch descent keeps every iterate feasible") {
  const auto obs = small_campaign(3);
  for (bool monotone : {false, true}) {
    SolverConfig cfg;
    cfg.penalty.gamma = 2.0;
    cfg.penalty.monotone = monotone;
    const FitResult r = fit(obs, cfg);
    CHECK(r.converged);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
      CHECK(r.objective_trace[i].objective <= r.objective_trace[i - 1].objective + 1e-12);
    }
    CHECK((r.model.values().array() >= 0.0).all());
    if (monotone) {
      for (Eigen::Index row = 0; row < r.model.values().rows(); ++row) {
        for (Eigen::Index k = 1; k < r.model.values().cols(); ++k) {
          CHECK(r.model.values()(row, k) >= r.model.values()(row, k - 1));
        }
      }
    }
    CHECK(r.final_objective() == doctest::Approx(objective(r.model, obs, cfg.penalty)).epsilon(1e-12));
    CHECK(r.train_nll == doctest::Approx(nll_dataset(r.model, obs)).epsilon(1e-12));
  }
}

TEST_CASE("fits are bitwise reproducible") {
  const auto obs = small_campaign(4);
  for (BatchMode mode : {BatchMode::FullBatch, BatchMode::VarianceReduced}) {
    SolverConfig cfg;
    cfg.penalty.gamma = 1.0;
    cfg.batch_mode = mode;
    cfg.max_iterations = 200;
    cfg.seed = 9;
    const FitResult a = fit(obs, cfg), b = fit(obs, cfg);
    CHECK(a.model.values() == b.model.values());
    REQUIRE(a.objective_trace.size() == b.objective_trace.size());
    for (std::size_t i = 0; i < a.objective_trace.size(); ++i) {
      CHECK(a.objective_trace[i].objective == b.objective_trace[i].objective);
    }
  }
}

TEST_CASE("variance-reduced mode reaches the full-batch optimum") {
  const auto obs = small_campaign(5);
  SolverConfig cfg;
  cfg.penalty.gamma = 1.0;
  const FitResult full = fit(obs, cfg);
  cfg.batch_mode = BatchMode::VarianceReduced;
  cfg.max_iterations = 3000;
  cfg.tolerance = 1e-10;
  const FitResult vr = fit(obs, cfg);
  CHECK(vr.final_objective() == doctest::Approx(full.final_objective()).epsilon(1e-3));
  CHECK((vr.model.values().array() >= 0.0).all());
}

TEST_CASE("intercept-only fit recovers the scalar MLE") {
  CampaignSpec spec;
  spec.d = 1;
  spec.horizon = 4.0;
  spec.n = 2000;
  spec.baseline_level = 0.5;
  spec.feature_density = 0.0;
  spec.scan_times = {0.5, 1.0, 1.5, 2.0, 3.0};
  spec.seed = 6;
  const auto obs = generate(spec).observations;
  SolverConfig cfg;
  cfg.penalty.gamma = 1e6;
  cfg.tolerance = 1e-12;
  const FitResult r = fit(obs, cfg);
  const double mle = intercept_mle(obs, 4.0);
  CHECK(r.model.values().row(0).maxCoeff() == doctest::Approx(mle).epsilon(1e-5));
  CHECK(r.model.values().row(0).minCoeff() == doctest::Approx(mle).epsilon(1e-5));
  CHECK(std::abs(mle - 0.5) < 0.05);
}

TEST_CASE("a dominant penalty makes every row constant") {
  const auto obs = small_campaign(7);
  SolverConfig cfg;
  cfg.penalty.gamma = 1e5;
  const FitResult r = fit(obs, cfg);
  CHECK(tv_rows(r.model.values()) < 1e-8);
}

TEST_CASE("parameter count shrinks along the penalty path") {
  const auto obs = small_campaign(8);
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (double gamma : {0.01, 0.1, 1.0, 10.0, 100.0}) {
    SolverConfig cfg;
    cfg.penalty.gamma = gamma;
    cfg.tolerance = 1e-10;
    const std::size_t count = fit(obs, cfg).nonzero_parameter_count;
    CHECK(count <= previous);
    previous = count;
  }
}

TEST_CASE("refining the knots does not improve the optimum") {
  const auto obs = small_campaign(10, 150);
  SolverConfig cfg;
  cfg.penalty.gamma = 0.5;
  cfg.tolerance = 1e-12;
  cfg.max_iterations = 20000;
  const FitResult r = fit(obs, cfg);
  CHECK(refine_and_compare(r, obs, 0) == 0.0);
  CHECK(refine_and_compare(r, obs, r.model.knots().size()) >= -1e-4);

  CampaignSpec spec;
  spec.d = 1;
  spec.horizon = 4.0;
  spec.n = 300;
  spec.baseline_level = 0.5;
  spec.feature_density = 0.0;
  spec.scan_times = {1.0, 2.0, 3.0};
  spec.seed = 11;
  const auto constant = generate(spec).observations;
  const FitResult c = fit(constant, cfg);
  CHECK(refine_and_compare(c, constant, 5) >= -1e-4);
}

TEST_CASE("multiple starts never do worse than one") {
  const auto obs = small_campaign(12);
  SolverConfig cfg;
  cfg.penalty.gamma = 1.0;
  const double single = fit(obs, cfg).final_objective();
  cfg.starts = 3;
  CHECK(fit(obs, cfg).final_objective() <= single + 1e-9);
}

TEST_CASE("anchored penalty counts the initial rise of feature rows") {
  const auto obs = small_campaign(13);
  SolverConfig cfg;
  cfg.penalty.gamma = 1.0;
  cfg.penalty.anchor_features = true;
  const FitResult r = fit(obs, cfg);
  double anchor = 0.0;
  for (Eigen::Index row = 1; row < r.model.values().rows(); ++row) anchor += r.model.values()(row, 0);
  PenaltyConfig plain = cfg.penalty;
  plain.anchor_features = false;
  CHECK(r.final_objective() == doctest::Approx(objective(r.model, obs, plain) + anchor).epsilon(1e-12));
  cfg.penalty.nonnegative = false;
  CHECK_THROWS_AS(fit(obs, cfg), ValidationError);
}

TEST_CASE("solver rejects bad input") {
  CHECK_THROWS_AS(fit(std::vector<Observation>{}, SolverConfig{}), ValidationError);
  SolverConfig cfg;
  cfg.penalty.gamma = -1.0;
  CHECK_THROWS_AS(fit(small_campaign(14, 20), cfg), ValidationError);
}
