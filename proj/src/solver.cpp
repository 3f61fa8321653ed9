#include "tvhazard/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace tvhazard {

namespace {

constexpr double kStepFloor = 1e-12;
constexpr double kStepShrink = 0.5;
constexpr double kStepGrow = 1.2;

RowKind row_kind(Eigen::Index r) { return r == 0 ? RowKind::Intercept : RowKind::Feature; }

// Smooth part: NLL, the linearized TV of monotone rows, and the ridge.
// Nonsmooth part: gamma * TV of the free rows, handled by the prox.
class Problem {
public:
  Problem(const CensoredDesign& design, const SolverConfig& cfg)
      : design_(design), penalty_(cfg.penalty), l2_(cfg.l2_weight) {
    if (penalty_.anchor_features && !penalty_.nonnegative) {
      throw ValidationError("anchored feature penalty requires nonnegative coefficients");
    }
  }

  const CensoredDesign& design() const { return design_; }

  double smooth_extras(const Eigen::MatrixXd& w) const {
    double value = 0.0;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      if (is_monotone_row(penalty_, row_kind(r))) value += penalty_.gamma * (w(r, w.cols() - 1) - w(r, 0));
      if (anchored(r)) value += penalty_.gamma * w(r, 0);
    }
    if (l2_ > 0.0 && w.rows() > 1) value += l2_ * w.bottomRows(w.rows() - 1).squaredNorm();
    return value;
  }

  void add_extras_gradient(const Eigen::MatrixXd& w, Eigen::MatrixXd& grad) const {
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      if (is_monotone_row(penalty_, row_kind(r))) {
        grad(r, 0) -= penalty_.gamma;
        grad(r, w.cols() - 1) += penalty_.gamma;
      }
      if (anchored(r)) grad(r, 0) += penalty_.gamma;
    }
    if (l2_ > 0.0 && w.rows() > 1) grad.bottomRows(w.rows() - 1) += 2.0 * l2_ * w.bottomRows(w.rows() - 1);
  }

  double smooth(const Eigen::MatrixXd& w) const { return design_.nll(w) + smooth_extras(w); }

  double smooth_and_gradient(const Eigen::MatrixXd& w, Eigen::MatrixXd& grad) const {
    const double value = design_.nll_and_gradient(w, grad);
    add_extras_gradient(w, grad);
    return value + smooth_extras(w);
  }

  double nonsmooth(const Eigen::MatrixXd& w) const {
    double value = 0.0;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      if (!is_monotone_row(penalty_, row_kind(r))) value += tv(w.row(r));
    }
    return penalty_.gamma * value;
  }

  double total(const Eigen::MatrixXd& w) const { return smooth(w) + nonsmooth(w); }

  Eigen::MatrixXd prox(const Eigen::MatrixXd& v, double step) const {
    Eigen::MatrixXd out(v.rows(), v.cols());
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      out.row(r) = prox_step(v.row(r), penalty_.gamma * step, penalty_, row_kind(r)).transpose();
    }
    return out;
  }

private:
  bool anchored(Eigen::Index r) const { return penalty_.anchor_features && r > 0; }

  const CensoredDesign& design_;
  PenaltyConfig penalty_;
  double l2_;
};

struct RunState {
  Eigen::MatrixXd w;
  std::vector<TracePoint> trace;
  bool converged = false;
  int iterations = 0;
  std::string diagnostic;
};

double relative_change(double before, double after) {
  return std::abs(before - after) / std::max(std::abs(before), 1.0);
}

// Backtracking proximal step from `y`. Returns false on step underflow.
bool proximal_step(const Problem& problem, const Eigen::MatrixXd& y, double f_y, const Eigen::MatrixXd& grad,
                   bool line_search, double& step, Eigen::MatrixXd& next, double& f_next) {
  while (step >= kStepFloor) {
    next = problem.prox(y - step * grad, step);
    f_next = problem.smooth(next);
    if (std::isfinite(f_next)) {
      if (!line_search) return true;
      const Eigen::MatrixXd delta = next - y;
      const double model = f_y + (grad.array() * delta.array()).sum() + delta.squaredNorm() / (2.0 * step);
      if (f_next <= model + 1e-12 * (1.0 + std::abs(f_y))) return true;
    }
    step *= kStepShrink;
  }
  return false;
}

// Monotone accelerated variant: the extrapolated candidate is kept only when
// it does not raise the objective, otherwise momentum restarts and a plain
// step is taken from the current iterate.
RunState run_full_batch(const Problem& problem, Eigen::MatrixXd w, const SolverConfig& cfg) {
  RunState st;
  double f_total = problem.total(w);
  if (!std::isfinite(f_total)) throw NumericalError("objective is not finite at the initial point");
  st.trace.push_back({0, f_total});
  double step = cfg.step_size;
  double t = 1.0;
  Eigen::MatrixXd previous = w;
  Eigen::MatrixXd grad, next;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    double f_next = 0.0;
    bool accepted = false;
    if (cfg.accelerate && t > 1.0) {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const Eigen::MatrixXd y = w + ((t - 1.0) / t_next) * (w - previous);
      grad.resize(0, 0);
      double f_y = std::numeric_limits<double>::infinity();
      try {
        f_y = problem.smooth_and_gradient(y, grad);
      } catch (const NumericalError&) {
      }
      if (std::isfinite(f_y) && proximal_step(problem, y, f_y, grad, cfg.line_search, step, next, f_next) &&
          f_next + problem.nonsmooth(next) <= f_total) {
        accepted = true;
        t = t_next;
      }
    }
    if (!accepted) {
      t = 1.0;
      const double f = problem.smooth_and_gradient(w, grad);
      if (!proximal_step(problem, w, f, grad, cfg.line_search, step, next, f_next)) {
        st.diagnostic = "step size underflow in line search at iteration " + std::to_string(it);
        return st;
      }
      if (cfg.accelerate) t = 0.5 * (1.0 + std::sqrt(5.0));
    }
    const double next_total = f_next + problem.nonsmooth(next);
    previous = std::move(w);
    w = next;
    st.w = w;
    st.iterations = it;
    st.trace.push_back({it, next_total});
    const double change = relative_change(f_total, next_total);
    f_total = next_total;
    if (cfg.line_search) step *= kStepGrow;
    if (change < cfg.tolerance) {
      st.converged = true;
      return st;
    }
  }
  st.diagnostic = "iteration limit reached";
  return st;
}

RunState run_variance_reduced(const Problem& problem, Eigen::MatrixXd w, const SolverConfig& cfg) {
  RunState st;
  st.w = w;
  const CensoredDesign& design = problem.design();
  const std::size_t n = design.size();
  const std::size_t batch = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(cfg.batch_size, 1)), 1, n);
  const std::size_t inner = cfg.epoch_length > 0 ? static_cast<std::size_t>(cfg.epoch_length) : (n + batch - 1) / batch;
  const double scale = static_cast<double>(n) / static_cast<double>(batch);

  double f_total = problem.total(w);
  if (!std::isfinite(f_total)) throw NumericalError("objective is not finite at the initial point");
  st.trace.push_back({0, f_total});

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = n;
  double eta = cfg.step_size;
  Eigen::MatrixXd mu, g_now, g_snap, extras;

  for (int epoch = 1; epoch <= cfg.max_iterations; ++epoch) {
    const Eigen::MatrixXd snapshot = w;
    design.nll_and_gradient(snapshot, mu);
    bool failed = false;
    for (std::size_t s = 0; s < inner && !failed; ++s) {
      if (cursor + batch > n) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const std::span<const std::size_t> subset(order.data() + cursor, batch);
      cursor += batch;
      try {
        design.nll_and_gradient(w, subset, g_now);
        design.nll_and_gradient(snapshot, subset, g_snap);
      } catch (const NumericalError&) {
        failed = true;
        break;
      }
      extras.setZero(w.rows(), w.cols());
      problem.add_extras_gradient(w, extras);
      const Eigen::MatrixXd g = scale * (g_now - g_snap) + mu + extras;
      w = problem.prox(w - eta * g, eta);
    }
    const double next_total = failed ? std::numeric_limits<double>::infinity() : problem.total(w);
    st.iterations = epoch;
    if (!std::isfinite(next_total) || next_total > f_total + 1e-12 * (1.0 + std::abs(f_total))) {
      w = snapshot;
      eta *= kStepShrink;
      if (eta < kStepFloor) {
        st.diagnostic = "step size underflow in variance-reduced epoch " + std::to_string(epoch);
        return st;
      }
      continue;
    }
    st.w = w;
    st.trace.push_back({epoch, next_total});
    const double change = relative_change(f_total, next_total);
    f_total = next_total;
    if (change < cfg.tolerance) {
      st.converged = true;
      return st;
    }
    if (cfg.line_search) eta *= kStepGrow;
  }
  st.diagnostic = "iteration limit reached";
  return st;
}

RunState run(const Problem& problem, const Eigen::MatrixXd& start, const SolverConfig& cfg) {
  if (!(cfg.step_size > 0.0)) throw ValidationError("step size must be positive");
  if (!(cfg.tolerance > 0.0)) throw ValidationError("tolerance must be positive");
  if (cfg.penalty.gamma < 0.0 || !std::isfinite(cfg.penalty.gamma)) {
    throw ValidationError("gamma must be finite and nonnegative");
  }
  RunState st = cfg.batch_mode == BatchMode::FullBatch ? run_full_batch(problem, start, cfg)
                                                        : run_variance_reduced(problem, start, cfg);
  if (st.w.size() == 0) st.w = start;
  return st;
}

Eigen::MatrixXd initial_point(const CensoredDesign& design) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(design.rows(), design.cols());
  if (design.total_exposure() > 0.0) {
    w.row(0).setConstant(static_cast<double>(design.event_count()) / design.total_exposure());
  }
  return w;
}

FitResult finish(RunState st, const KnotSetPtr& knots, std::span<const Observation> observations,
                 const SolverConfig& cfg) {
  FitResult result{HazardModel(knots, st.w.cwiseMax(0.0)), std::move(st.trace), 0.0, st.converged, 0,
                   st.iterations, std::move(st.diagnostic), cfg, {}};
  result.train_nll = nll_dataset(result.model, observations, &result.warnings);
  result.nonzero_parameter_count = nonzero_parameter_count(result.model);
  return result;
}

}  // namespace

double objective(const HazardModel& model, std::span<const Observation> observations,
                 const PenaltyConfig& penalty, double l2_weight) {
  double value = nll_dataset(model, observations) + penalty.gamma * tv_rows(model.values());
  const auto& w = model.values();
  if (penalty.anchor_features && w.rows() > 1) value += penalty.gamma * w.col(0).tail(w.rows() - 1).cwiseAbs().sum();
  if (l2_weight > 0.0 && w.rows() > 1) value += l2_weight * w.bottomRows(w.rows() - 1).squaredNorm();
  return value;
}

std::size_t nonzero_parameter_count(const HazardModel& model) {
  const Eigen::MatrixXd& w = model.values();
  const double largest = w.cwiseAbs().maxCoeff();
  if (largest == 0.0) return 0;
  const double eps = 1e-6 * largest;
  const auto& times = model.knots().times();
  std::size_t count = 0;
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    if (std::abs(w(r, 0)) > eps) ++count;
    for (Eigen::Index k = 1; k < w.cols(); ++k) {
      // A jump at the horizon changes nothing on [0, horizon].
      if (times[static_cast<std::size_t>(k - 1)] >= model.knots().horizon()) continue;
      if (std::abs(w(r, k) - w(r, k - 1)) > eps) ++count;
    }
  }
  return count;
}

HazardModel embed(const HazardModel& model, KnotSetPtr finer) {
  const KnotSet& coarse = model.knots();
  Eigen::MatrixXd w(model.values().rows(), static_cast<Eigen::Index>(finer->num_segments()));
  for (std::size_t k = 0; k < finer->num_segments(); ++k) {
    const auto src = static_cast<Eigen::Index>(coarse.segment_of(finer->segment_begin(k)));
    w.col(static_cast<Eigen::Index>(k)) = model.values().col(src);
  }
  return HazardModel(std::move(finer), std::move(w));
}

FitResult fit(std::span<const Observation> observations, const SolverConfig& config) {
  return fit(observations, build_knot_set(observations), config);
}

FitResult fit(std::span<const Observation> observations, KnotSetPtr knots, const SolverConfig& config) {
  if (observations.empty()) throw ValidationError("no observations");
  const CensoredDesign design(knots, dataset_dimension(observations), observations);
  const Problem problem(design, config);
  const Eigen::MatrixXd base = initial_point(design);

  RunState best = run(problem, base, config);
  double best_value = best.trace.back().objective;
  for (int s = 1; s < config.starts; ++s) {
    std::mt19937_64 rng(config.seed + static_cast<std::uint64_t>(s) * 0x9E3779B97F4A7C15ULL);
    std::uniform_real_distribution<double> factor(0.5, 2.0);
    Eigen::MatrixXd start = base;
    start.row(0) *= factor(rng);
    const double jitter = 0.1 * start(0, 0);
    for (Eigen::Index r = 1; r < start.rows(); ++r) {
      for (Eigen::Index k = 0; k < start.cols(); ++k) start(r, k) = jitter * (factor(rng) - 0.5) / 1.5;
    }
    start = problem.prox(start, 0.0);
    RunState candidate = run(problem, start, config);
    if (candidate.trace.back().objective < best_value) {
      best_value = candidate.trace.back().objective;
      best = std::move(candidate);
    }
  }
  return finish(std::move(best), knots, observations, config);
}

FitResult fit_from(std::span<const Observation> observations, const HazardModel& start,
                   const SolverConfig& config) {
  if (observations.empty()) throw ValidationError("no observations");
  const CensoredDesign design(start.knot_ptr(), start.dimension(), observations);
  const Problem problem(design, config);
  return finish(run(problem, start.values(), config), start.knot_ptr(), observations, config);
}

double refine_and_compare(const FitResult& fit_result, std::span<const Observation> observations,
                          std::size_t extra_knots) {
  if (extra_knots == 0) return 0.0;
  const KnotSet& knots = fit_result.model.knots();
  std::vector<double> times = knots.times();
  for (std::size_t k = 1; k <= extra_knots; ++k) {
    times.push_back(knots.horizon() * static_cast<double>(k) / static_cast<double>(extra_knots + 1));
  }
  auto finer = make_knot_set(std::move(times), knots.horizon());
  const FitResult refined = fit_from(observations, embed(fit_result.model, finer), fit_result.config);
  const auto& pen = fit_result.config.penalty;
  const double l2 = fit_result.config.l2_weight;
  return objective(refined.model, observations, pen, l2) - objective(fit_result.model, observations, pen, l2);
}

}  // namespace tvhazard
