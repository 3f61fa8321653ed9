#include "tvhazard/commands.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "tvhazard/baseline.hpp"
#include "tvhazard/datagen.hpp"
#include "tvhazard/io.hpp"

namespace tvhazard {

using nlohmann::json;

std::pair<std::vector<Observation>, std::vector<Observation>> split_observations(
    std::span<const Observation> observations, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("split fraction must lie in (0, 1)");
  std::vector<std::size_t> order(observations.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with explicit index draws keeps the split identical across
  // standard library implementations.
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(order.size())));
  std::vector<bool> in_train(observations.size(), false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;
  std::pair<std::vector<Observation>, std::vector<Observation>> parts;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    (in_train[i] ? parts.first : parts.second).push_back(observations[i]);
  }
  return parts;
}

std::vector<SweepRow> gamma_sweep(std::span<const Observation> train, std::span<const Observation> validation,
                                  std::span<const double> gammas, const SolverConfig& base) {
  const KnotSetPtr knots = build_knot_set(train);
  std::vector<SweepRow> rows;
  for (double gamma : gammas) {
    SolverConfig cfg = base;
    cfg.penalty.gamma = gamma;
    const FitResult r = fit(train, knots, cfg);
    const double val = nll_dataset(r.model, validation);
    rows.push_back({gamma, r.train_nll / static_cast<double>(train.size()),
                    val / static_cast<double>(validation.size()), r.nonzero_parameter_count, r.converged});
  }
  return rows;
}

json fit_report(const FitResult& r) {
  json trace = json::array();
  for (const auto& p : r.objective_trace) trace.push_back({p.iteration, p.objective});
  json warnings = json::array();
  for (const auto& w : r.warnings) warnings.push_back({{"code", w.code}, {"id", w.observation_id}, {"message", w.message}});
  const auto& c = r.config;
  return {{"train_nll", r.train_nll},
          {"final_objective", r.final_objective()},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"nonzero_parameter_count", r.nonzero_parameter_count},
          {"diagnostic", r.diagnostic},
          {"objective_trace", std::move(trace)},
          {"warnings", std::move(warnings)},
          {"config",
           {{"gamma", c.penalty.gamma},
            {"monotone", c.penalty.monotone},
            {"monotone_intercept", c.penalty.monotone_intercept},
            {"anchor_features", c.penalty.anchor_features},
            {"max_iterations", c.max_iterations},
            {"tolerance", c.tolerance},
            {"step_size", c.step_size},
            {"line_search", c.line_search},
            {"accelerate", c.accelerate},
            {"batch_mode", c.batch_mode == BatchMode::FullBatch ? "full" : "vr"},
            {"batch_size", c.batch_size},
            {"epoch_length", c.epoch_length},
            {"starts", c.starts},
            {"seed", c.seed}}}};
}

json evaluation_report(const HazardModel& model, std::span<const Observation> observations) {
  std::vector<Warning> warnings;
  const double total = nll_dataset(model, observations, &warnings);
  json w = json::array();
  for (const auto& x : warnings) w.push_back({{"code", x.code}, {"id", x.observation_id}, {"message", x.message}});
  const double n = static_cast<double>(observations.size());
  return {{"observations", observations.size()},
          {"total_nll", total},
          {"mean_nll", observations.empty() ? 0.0 : total / n},
          {"warnings", std::move(w)}};
}

std::string export_paths_csv(const HazardModel& model, std::span<const int> features, bool include_intercept) {
  const KnotSet& knots = model.knots();
  std::vector<double> grid{knots.origin()};
  for (double t : knots.times()) {
    grid.push_back(0.5 * (grid.back() + t));
    grid.push_back(t);
  }
  if (grid.back() < knots.horizon()) {
    grid.push_back(0.5 * (grid.back() + knots.horizon()));
    grid.push_back(knots.horizon());
  }
  std::ostringstream out;
  out.precision(17);
  out << "feature,t,w\n";
  auto emit = [&](const std::string& label, const StepFunction& f) {
    for (double t : grid) out << label << ',' << t << ',' << f(t) << '\n';
  };
  if (include_intercept) emit("intercept", model.intercept());
  for (int j : features) {
    if (j < 0 || j >= model.dimension()) {
      throw ValidationError("feature " + std::to_string(j) + " outside model dimension " +
                            std::to_string(model.dimension()));
    }
    emit(std::to_string(j), model.coefficient(j));
  }
  return out.str();
}

namespace {

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("not a number: '" + item + "'");
    }
  }
  return values;
}

struct SolverFlags {
  double gamma = 0.0;
  bool monotone = false;
  bool free_intercept = false;
  int max_iter = 5000;
  double tol = 1e-7;
  double step = 1.0;
  std::uint64_t seed = 0;
  std::string batch_mode = "full";
  int batch_size = 32;
  int epoch_length = 0;
  int starts = 1;
  bool plain = false;
  bool anchor = false;

  void attach(CLI::App* cmd, bool with_gamma) {
    if (with_gamma) cmd->add_option("--gamma", gamma, "total-variation weight")->check(CLI::NonNegativeNumber);
    auto* mono = cmd->add_flag("--monotone", monotone, "nondecreasing coefficient paths");
    cmd->add_flag("--no-monotone{false}", monotone, "unconstrained paths (default)")->excludes(mono);
    cmd->add_flag("--free-intercept", free_intercept, "leave w_0 unconstrained in monotone mode");
    cmd->add_option("--max-iter", max_iter, "iteration (epoch) limit")->check(CLI::PositiveNumber);
    cmd->add_option("--tol", tol, "relative objective change to stop at")->check(CLI::PositiveNumber);
    cmd->add_option("--step-size", step, "initial step size")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "seed for batching and restarts");
    cmd->add_option("--batch-mode", batch_mode, "full or vr")->check(CLI::IsMember({"full", "vr"}));
    cmd->add_option("--batch-size", batch_size, "mini-batch size (vr)")->check(CLI::PositiveNumber);
    cmd->add_option("--epoch-length", epoch_length, "inner steps per epoch (vr)");
    cmd->add_option("--starts", starts, "number of initializations")->check(CLI::PositiveNumber);
    cmd->add_flag("--anchor", anchor, "also penalize each feature path's rise from zero at the origin");
    cmd->add_flag("--no-accelerate", plain, "plain proximal gradient without momentum");
  }

  SolverConfig config() const {
    SolverConfig c;
    c.penalty.gamma = gamma;
    c.penalty.monotone = monotone;
    c.penalty.monotone_intercept = !free_intercept;
    c.max_iterations = max_iter;
    c.tolerance = tol;
    c.step_size = step;
    c.seed = seed;
    c.batch_mode = batch_mode == "vr" ? BatchMode::VarianceReduced : BatchMode::FullBatch;
    c.batch_size = batch_size;
    c.epoch_length = epoch_length;
    c.starts = starts;
    c.accelerate = !plain;
    c.penalty.anchor_features = anchor;
    return c;
  }
};

void check_dimensions(const HazardModel& model, const DatasetHeader& header) {
  if (model.dimension() != header.d) {
    throw ValidationError("dimension mismatch: model has d=" + std::to_string(model.dimension()) +
                          ", data has d=" + std::to_string(header.d));
  }
}

int report_error(std::ostream& err, const char* kind, const std::string& message, int code) {
  err << json{{"error", kind}, {"message", message}}.dump() << '\n';
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time-varying additive hazard regression with total-variation penalties", "tvhazard"};
  app.require_subcommand(1);
  bool force = false;

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic campaign dataset");
  std::string spec_path, sim_out, truth_out;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("--spec", spec_path, "campaign spec JSON (default scenario if omitted)");
  sim->add_option("--out", sim_out, "observation file to write")->required();
  sim->add_option("--truth", truth_out, "planted model file to write")->required();
  sim->add_option("--seed", sim_seed, "overrides the spec seed");
  sim->add_flag("--force", force, "overwrite existing files");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit a penalized time-varying hazard model");
  std::string fit_data, fit_out, fit_report_path;
  SolverFlags fit_flags;
  fit_cmd->add_option("--data", fit_data, "observation file")->required();
  fit_cmd->add_option("--out", fit_out, "model file to write")->required();
  fit_cmd->add_option("--report", fit_report_path, "fit report JSON (stdout if omitted)");
  fit_cmd->add_flag("--force", force, "overwrite existing files");
  fit_flags.attach(fit_cmd, true);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "negative log-likelihood of a model on data");
  std::string eval_model, eval_data, eval_out;
  eval_cmd->add_option("--model", eval_model, "model file")->required();
  eval_cmd->add_option("--data", eval_data, "observation file")->required();
  eval_cmd->add_option("--out", eval_out, "report JSON (stdout if omitted)");
  eval_cmd->add_flag("--force", force, "overwrite existing files");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "train/validation scores over a gamma grid");
  std::string sweep_data, sweep_out, sweep_grid = "0,0.5,1,2,5,10,20,50";
  double split = 0.7;
  std::uint64_t split_seed = 0;
  SolverFlags sweep_flags;
  sweep_cmd->add_option("--data", sweep_data, "observation file")->required();
  sweep_cmd->add_option("--gammas", sweep_grid, "comma-separated gamma grid");
  sweep_cmd->add_option("--split", split, "training fraction")->check(CLI::Range(0.0, 1.0));
  sweep_cmd->add_option("--split-seed", split_seed, "seed of the train/validation shuffle");
  sweep_cmd->add_option("--out", sweep_out, "CSV table (stdout if omitted)");
  sweep_cmd->add_flag("--force", force, "overwrite existing files");
  sweep_flags.attach(sweep_cmd, false);

  // export
  auto* exp_cmd = app.add_subcommand("export", "coefficient paths as a long-format CSV");
  std::string exp_model, exp_out, exp_features;
  bool exp_intercept = false;
  exp_cmd->add_option("--model", exp_model, "model file")->required();
  exp_cmd->add_option("--features", exp_features, "comma-separated feature indices (default: all nonzero)");
  exp_cmd->add_flag("--intercept", exp_intercept, "include the baseline w_0");
  exp_cmd->add_option("--out", exp_out, "CSV file (stdout if omitted)");
  exp_cmd->add_flag("--force", force, "overwrite existing files");

  std::vector<const char*> argv{"tvhazard"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }

  auto emit = [&](const std::string& path, const std::string& text) {
    if (path.empty()) {
      out << text;
    } else {
      save_text(path, text, force);
    }
  };

  try {
    if (*sim) {
      CampaignSpec spec = spec_path.empty() ? default_campaign_spec() : campaign_spec_from_json(load_json(spec_path));
      if (sim_seed) spec.seed = *sim_seed;
      if (!force) {
        for (const auto& p : {sim_out, truth_out}) {
          if (std::filesystem::exists(p)) throw IoError("refusing to overwrite " + p + " (pass --force)");
        }
      }
      const SimulatedData data = generate(spec);
      Dataset ds{{spec.d, spec.horizon, "unit"}, data.observations};
      save_dataset(sim_out, ds, force);
      save_text(truth_out, model_to_json(data.truth).dump(2) + "\n", force);
      std::size_t events = 0;
      for (const auto& o : ds.observations) events += o.is_interval() ? 1 : 0;
      out << json{{"observations", ds.observations.size()}, {"interval_censored", events}, {"seed", spec.seed}}.dump()
          << '\n';
    } else if (*fit_cmd) {
      const Dataset ds = load_dataset(fit_data);
      if (ds.observations.empty()) throw ValidationError("no observations");
      if (!force) {
        for (const auto& p : {fit_out, fit_report_path}) {
          if (!p.empty() && std::filesystem::exists(p)) throw IoError("refusing to overwrite " + p + " (pass --force)");
        }
      }
      const FitResult r = fit(ds.observations, fit_flags.config());
      const HazardModel& m = r.model;
      // Pad to the header dimension so that model and data files agree.
      const HazardModel padded =
          m.dimension() == ds.header.d
              ? m
              : HazardModel(m.knot_ptr(), [&] {
                  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(ds.header.d + 1, m.values().cols());
                  w.topRows(m.values().rows()) = m.values();
                  return w;
                }());
      save_text(fit_out, model_to_json(padded).dump(2) + "\n", force);
      emit(fit_report_path, fit_report(r).dump(2) + "\n");
    } else if (*eval_cmd) {
      const HazardModel model = model_from_json(load_json(eval_model));
      const Dataset ds = load_dataset(eval_data);
      check_dimensions(model, ds.header);
      emit(eval_out, evaluation_report(model, ds.observations).dump(2) + "\n");
    } else if (*sweep_cmd) {
      const Dataset ds = load_dataset(sweep_data);
      if (ds.observations.size() < 2) throw ValidationError("sweep needs at least two observations");
      const std::vector<double> gammas = parse_list(sweep_grid);
      if (gammas.empty()) throw ValidationError("empty gamma grid");
      if (!sweep_out.empty() && !force && std::filesystem::exists(sweep_out)) {
        throw IoError("refusing to overwrite " + sweep_out + " (pass --force)");
      }
      const auto [train, validation] = split_observations(ds.observations, split, split_seed);
      const auto rows = gamma_sweep(train, validation, gammas, sweep_flags.config());
      std::ostringstream table;
      table.precision(17);
      table << "gamma,train_nll,validation_nll,nonzero_parameters,converged\n";
      for (const auto& r : rows) {
        table << r.gamma << ',' << r.train_nll << ',' << r.validation_nll << ',' << r.nonzero_parameters << ','
              << (r.converged ? "true" : "false") << '\n';
      }
      emit(sweep_out, table.str());
    } else if (*exp_cmd) {
      const HazardModel model = model_from_json(load_json(exp_model));
      std::vector<int> features;
      if (exp_features.empty()) {
        for (int j = 0; j < model.dimension(); ++j) {
          if ((model.values().row(j + 1).array() != 0.0).any()) features.push_back(j);
        }
      } else {
        for (double v : parse_list(exp_features)) {
          if (v != std::floor(v)) throw ValidationError("feature indices must be integers");
          features.push_back(static_cast<int>(v));
        }
      }
      emit(exp_out, export_paths_csv(model, features, exp_intercept));
    }
  } catch (const IoError& e) {
    return report_error(err, "io", e.what(), kExitIo);
  } catch (const NumericalError& e) {
    return report_error(err, "numerical", e.what(), kExitNumerical);
  } catch (const ParseError& e) {
    return report_error(err, "parse", e.what(), kExitValidation);
  } catch (const ValidationError& e) {
    return report_error(err, "validation", e.what(), kExitValidation);
  } catch (const std::domain_error& e) {
    return report_error(err, "validation", e.what(), kExitValidation);
  } catch (const std::out_of_range& e) {
    return report_error(err, "validation", e.what(), kExitValidation);
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error(err, "io", e.what(), kExitIo);
  }
  return kExitOk;
}

}  // namespace tvhazard
