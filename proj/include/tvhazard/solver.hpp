#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tvhazard/likelihood.hpp"
#include "tvhazard/penalty.hpp"

namespace tvhazard {

enum class BatchMode { FullBatch, VarianceReduced };

struct SolverConfig {
  PenaltyConfig penalty;
  int max_iterations = 5000;
  /// Stop once |F_k - F_{k+1}| / max(|F_k|, 1) falls below this.
  double tolerance = 1e-7;
  double step_size = 1.0;
  bool line_search = true;
  /// Nesterov momentum with restart in full-batch mode; the objective trace
  /// stays nonincreasing either way.
  bool accelerate = true;
  BatchMode batch_mode = BatchMode::FullBatch;
  /// Inner steps per epoch in variance-reduced mode; 0 means one pass.
  int epoch_length = 0;
  int batch_size = 32;
  std::uint64_t seed = 0;
  /// Number of initializations; the best final objective wins.
  int starts = 1;
  /// Ridge weight on the feature rows (not the baseline).
  double l2_weight = 0.0;
};

struct TracePoint {
  int iteration;
  double objective;
};

struct FitResult {
  HazardModel model;
  /// Penalized objective after every accepted iterate (epoch in
  /// variance-reduced mode), starting with the initial point.
  std::vector<TracePoint> objective_trace;
  double train_nll = 0.0;
  bool converged = false;
  std::size_t nonzero_parameter_count = 0;
  int iterations = 0;
  std::string diagnostic;
  SolverConfig config;
  std::vector<Warning> warnings;

  double final_objective() const { return objective_trace.back().objective; }
};

/// nll_dataset + gamma * sum of row total variations (+ ridge, if any).
double objective(const HazardModel& model, std::span<const Observation> observations,
                 const PenaltyConfig& penalty, double l2_weight = 0.0);

/**
 * Jump-list parameter count: per row, the base level plus every jump at a
 * knot before the horizon whose magnitude exceeds 1e-6 x the largest
 * absolute coefficient.
 */
std::size_t nonzero_parameter_count(const HazardModel& model);

/// Same function re-expressed on a knot superset.
HazardModel embed(const HazardModel& model, KnotSetPtr finer);

/// Penalized maximum likelihood on the knots from build_knot_set.
FitResult fit(std::span<const Observation> observations, const SolverConfig& config);
/// Same on an explicit, frozen knot set.
FitResult fit(std::span<const Observation> observations, KnotSetPtr knots, const SolverConfig& config);
/// Continue from `start` (one start, no perturbation).
FitResult fit_from(std::span<const Observation> observations, const HazardModel& start,
                   const SolverConfig& config);

/**
 * Adds `extra_knots` evenly spaced knots on (0, horizon), refits from the
 * original optimum and returns refined objective minus original objective.
 * Values well below zero would mean the original knot set missed a better
 * optimum.
 */
double refine_and_compare(const FitResult& fit_result, std::span<const Observation> observations,
                          std::size_t extra_knots);

}  // namespace tvhazard
