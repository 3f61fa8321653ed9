#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tvhazard/solver.hpp"

namespace tvhazard {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitNumerical = 3, kExitIo = 4 };

/// Deterministic train/validation split by a seeded shuffle; the first
/// round(fraction * n) shuffled sites form the training part. Input order is
/// kept within each part.
std::pair<std::vector<Observation>, std::vector<Observation>> split_observations(
    std::span<const Observation> observations, double train_fraction, std::uint64_t seed);

struct SweepRow {
  double gamma;
  double train_nll;       ///< mean per site
  double validation_nll;  ///< mean per site
  std::size_t nonzero_parameters;
  bool converged;
};

/// Fits on the knots of `train` for every gamma and scores both parts.
std::vector<SweepRow> gamma_sweep(std::span<const Observation> train, std::span<const Observation> validation,
                                  std::span<const double> gammas, const SolverConfig& base);

/// Fit report written by `fit`.
nlohmann::json fit_report(const FitResult& r);

/// {"observations", "total_nll", "mean_nll", "warnings"} for a model on data.
nlohmann::json evaluation_report(const HazardModel& model, std::span<const Observation> observations);

/// Long-format table (feature, t, w) sampled at the origin, every knot and
/// every midpoint in between. `features` are feature indices; the baseline
/// is emitted as "intercept" when `include_intercept`.
std::string export_paths_csv(const HazardModel& model, std::span<const int> features, bool include_intercept);

/// Entry point of the `tvhazard` tool. Errors are reported on `err` as one
/// JSON object and mapped to ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tvhazard
