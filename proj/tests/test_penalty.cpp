#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "tvhazard/penalty.hpp"

using namespace tvhazard;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, int n, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

}  // namespace

TEST_CASE("total variation") {
  CHECK(tv(vec({1, 1, 1})) == 0.0);
  CHECK(tv(vec({0, 1, 0})) == 2.0);
  CHECK(tv(vec({0, 0.5, 2.0})) == 2.0);
  CHECK(tv(vec({3.0})) == 0.0);
  CHECK_THROWS_AS(tv(Eigen::VectorXd()), ValidationError);
  Eigen::MatrixXd w(2, 3);
  w << 0, 1, 0, 2, 2, 5;
  CHECK(tv_rows(w) == 5.0);
}

TEST_CASE("fused lasso prox: trivial weights") {
  std::mt19937_64 rng(1);
  const Eigen::VectorXd y = random_vector(rng, 7);
  CHECK(fused_lasso_prox(y, 0.0) == y);
  const double range = y.maxCoeff() - y.minCoeff();
  const Eigen::VectorXd flat = fused_lasso_prox(y, 7 * range);
  CHECK((flat.array() - y.mean()).abs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(fused_lasso_prox(y, -1.0), ValidationError);
}

TEST_CASE("fused lasso prox: two-step example") {
  // One jump survives; each block moves toward the other by weight / |block|.
  const Eigen::VectorXd w = fused_lasso_prox(vec({0, 0, 1, 1}), 0.25);
  const Eigen::VectorXd expected = vec({0.125, 0.125, 0.875, 0.875});
  CHECK((w - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((oracle::tv_prox(vec({0, 0, 1, 1}), 0.25, false) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fused lasso prox matches the enumeration oracle") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> weight(0.0, 2.0);
  for (int c = 0; c < 300; ++c) {
    const Eigen::VectorXd y = random_vector(rng, 1 + c % 7);
    const double lam = weight(rng);
    CHECK((fused_lasso_prox(y, lam) - oracle::tv_prox(y, lam, false)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("fused lasso prox satisfies the optimality conditions") {
  // With u = y - w and cumulative sums c_k, every |c_k| <= weight, with
  // c_k = weight * sign(w[k+1] - w[k]) wherever the solution jumps.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> weight(0.01, 1.0);
  for (int c = 0; c < 200; ++c) {
    const Eigen::VectorXd y = random_vector(rng, 2 + c % 40, -5.0, 5.0);
    const double lam = weight(rng);
    const Eigen::VectorXd w = fused_lasso_prox(y, lam);
    double cum = 0.0;
    for (Eigen::Index k = 0; k + 1 < y.size(); ++k) {
      cum += y[k] - w[k];
      CHECK(std::abs(cum) <= lam + 1e-9);
      const double jump = w[k + 1] - w[k];
      if (std::abs(jump) > 1e-9) CHECK(cum == doctest::Approx(jump > 0 ? -lam : lam).epsilon(1e-8));
    }
    CHECK(std::abs(cum + y[y.size() - 1] - w[w.size() - 1]) < 1e-9);
  }
}

TEST_CASE("fused lasso prox is non-expansive") {
  std::mt19937_64 rng(4);
  for (int c = 0; c < 100; ++c) {
    const int n = 1 + c % 20;
    const Eigen::VectorXd a = random_vector(rng, n), b = random_vector(rng, n);
    const double lam = 0.3 + 0.01 * c;
    CHECK((fused_lasso_prox(a, lam) - fused_lasso_prox(b, lam)).norm() <= (a - b).norm() + 1e-12);
  }
}

TEST_CASE("isotonic projection") {
  CHECK(isotonic_project(vec({1, 2, 3})) == vec({1, 2, 3}));
  CHECK(isotonic_project(vec({2, 1})) == vec({1.5, 1.5}));
  std::mt19937_64 rng(5);
  for (int c = 0; c < 200; ++c) {
    const Eigen::VectorXd y = random_vector(rng, 1 + c % 8);
    const Eigen::VectorXd w = isotonic_project(y);
    CHECK((w - oracle::isotonic(y)).cwiseAbs().maxCoeff() < 1e-10);
    for (Eigen::Index k = 1; k < w.size(); ++k) CHECK(w[k] >= w[k - 1]);
    CHECK(w.sum() == doctest::Approx(y.sum()).epsilon(1e-12));
    CHECK(isotonic_project(w) == w);
  }
}

TEST_CASE("nonnegative clipping") {
  CHECK(nonneg_clip(vec({-1, 2})) == vec({0, 2}));
  CHECK(nonneg_clip(vec({0.5, 0, 3})) == vec({0.5, 0, 3}));
  CHECK(nonneg_clip(vec({-1, -0.5})) == vec({0, 0}));
}

TEST_CASE("composed proximal step") {
  PenaltyConfig monotone;
  monotone.monotone = true;
  CHECK(prox_step(vec({0, 0.5, 0.5, 2}), 1.0, monotone) == vec({0, 0.5, 0.5, 2}));
  CHECK(prox_step(vec({1, 0, -1}), 1.0, monotone) == vec({0, 0, 0}));
  PenaltyConfig plain;
  CHECK(prox_step(vec({0.2, 1.5, 0.0}), 0.0, plain) == vec({0.2, 1.5, 0.0}));

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> weight(0.0, 1.5);
  for (int c = 0; c < 200; ++c) {
    const Eigen::VectorXd y = random_vector(rng, 1 + c % 5);
    const double lam = weight(rng);
    CHECK((prox_step(y, lam, plain) - oracle::tv_prox(y, lam, true)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("monotone baseline row is free unless requested") {
  PenaltyConfig cfg;
  cfg.monotone = true;
  cfg.monotone_intercept = false;
  CHECK_FALSE(is_monotone_row(cfg, RowKind::Intercept));
  CHECK(is_monotone_row(cfg, RowKind::Feature));
  const Eigen::VectorXd w = prox_step(vec({0, 0, 1, 1}), 0.25, cfg, RowKind::Intercept);
  CHECK((w - vec({0.125, 0.125, 0.875, 0.875})).cwiseAbs().maxCoeff() < 1e-12);
}
