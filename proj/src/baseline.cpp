#include "tvhazard/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "tvhazard/solver.hpp"

namespace tvhazard {

HazardModel ConstantAdditiveModel::to_hazard_model(double horizon) const {
  Eigen::MatrixXd w(weights.size() + 1, 1);
  w(0, 0) = intercept;
  w.bottomRows(weights.size()) = weights;
  return HazardModel(make_knot_set({}, horizon), std::move(w));
}

namespace {

double dataset_horizon(std::span<const Observation> observations) {
  double horizon = 0.0;
  for (const auto& o : observations) horizon = std::max(horizon, o.end_time());
  return horizon;
}

}  // namespace

ConstantAdditiveModel fit_constant_additive(std::span<const Observation> observations, double l2_weight) {
  if (observations.empty()) throw ValidationError("no observations");
  SolverConfig cfg;
  cfg.l2_weight = l2_weight;
  cfg.tolerance = 1e-12;
  cfg.max_iterations = 50000;
  const FitResult r = fit(observations, make_knot_set({}, dataset_horizon(observations)), cfg);
  ConstantAdditiveModel model;
  model.intercept = r.model.values()(0, 0);
  model.weights = r.model.values().col(0).tail(r.model.dimension());
  model.converged = r.converged;
  return model;
}

double constant_additive_nll(const ConstantAdditiveModel& model, std::span<const Observation> observations) {
  return nll_dataset(model.to_hazard_model(dataset_horizon(observations)), observations);
}

namespace {

struct Piece {
  double length;
  std::vector<std::pair<int, double>> x;
};

// Maximal pieces of [a, b] on which the covariate vector is constant.
std::vector<Piece> constant_pieces(const FeaturePath& p, double a, double b) {
  std::vector<double> cuts{a, b};
  for (const auto& track : p.tracks()) {
    for (const auto& c : track.changes) {
      if (c.t > a && c.t < b) cuts.push_back(c.t);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<Piece> pieces;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    Piece piece{cuts[i + 1] - cuts[i], {}};
    for (const auto& track : p.tracks()) {
      const double v = p.value(track.index, cuts[i]);
      if (v != 0.0) piece.x.emplace_back(track.index, v);
    }
    pieces.push_back(std::move(piece));
  }
  return pieces;
}

class ProportionalDesign {
public:
  ProportionalDesign(std::span<const Observation> observations, int dimension) : dimension_(dimension) {
    for (const auto& o : observations) {
      validate_censoring(o.censoring);
      if (!o.path.tracks().empty() && o.path.tracks().back().index >= dimension) {
        throw ValidationError("observation " + o.id + " has a feature index beyond the model dimension");
      }
      Term t;
      if (const auto* iv = std::get_if<IntervalCensored>(&o.censoring)) {
        t.before = constant_pieces(o.path, 0.0, iv->left);
        t.bracket = constant_pieces(o.path, iv->left, iv->right);
        t.interval = true;
        ++events_;
        exposure_ += 0.5 * (iv->left + iv->right);
      } else {
        const double at = std::get<RightCensored>(o.censoring).at;
        t.before = constant_pieces(o.path, 0.0, at);
        exposure_ += at;
      }
      terms_.push_back(std::move(t));
    }
  }

  int dimension() const { return dimension_; }
  double events() const { return static_cast<double>(events_); }
  double exposure() const { return exposure_; }

  /// Parameters are (log base_rate, weights). Gradient is optional.
  double nll(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
    if (grad) grad->setZero(theta.size());
    double total = 0.0;
    for (const auto& t : terms_) {
      total += mass(t.before, theta, grad, 1.0);
      if (t.interval) {
        const double m = mass(t.bracket, theta, nullptr, 0.0);
        total += neg_log_one_minus_exp(m);
        if (grad) {
          if (!(m > 0.0)) throw NumericalError("zero-mass censoring bracket in proportional model");
          mass(t.bracket, theta, grad, -1.0 / std::expm1(m));
        }
      }
    }
    return total;
  }

private:
  struct Term {
    std::vector<Piece> before;
    std::vector<Piece> bracket;
    bool interval = false;
  };

  static double mass(const std::vector<Piece>& pieces, const Eigen::VectorXd& theta, Eigen::VectorXd* grad,
                     double scale) {
    double total = 0.0;
    for (const auto& piece : pieces) {
      double eta = theta[0];
      for (const auto& [j, v] : piece.x) eta += theta[j + 1] * v;
      const double c = std::exp(eta) * piece.length;
      total += c;
      if (grad) {
        (*grad)[0] += scale * c;
        for (const auto& [j, v] : piece.x) (*grad)[j + 1] += scale * c * v;
      }
    }
    return total;
  }

  int dimension_;
  std::vector<Term> terms_;
  std::size_t events_ = 0;
  double exposure_ = 0.0;
};

Eigen::VectorXd pack(const ProportionalModel& m) {
  Eigen::VectorXd theta(m.weights.size() + 1);
  theta[0] = std::log(m.base_rate);
  theta.tail(m.weights.size()) = m.weights;
  return theta;
}

}  // namespace

double proportional_cumulative_hazard(const ProportionalModel& model, const FeaturePath& p, double a, double b) {
  if (b < a) throw ValidationError("reversed integration interval");
  double total = 0.0;
  for (const auto& piece : constant_pieces(p, a, b)) {
    double eta = 0.0;
    for (const auto& [j, v] : piece.x) {
      if (j >= model.weights.size()) throw ValidationError("feature index beyond the model dimension");
      eta += model.weights[j] * v;
    }
    total += model.base_rate * std::exp(eta) * piece.length;
  }
  return total;
}

double proportional_nll(const ProportionalModel& model, std::span<const Observation> observations) {
  const ProportionalDesign design(observations, static_cast<int>(model.weights.size()));
  return design.nll(pack(model), nullptr);
}

Eigen::VectorXd proportional_nll_gradient(const ProportionalModel& model, std::span<const Observation> observations) {
  const ProportionalDesign design(observations, static_cast<int>(model.weights.size()));
  Eigen::VectorXd grad;
  design.nll(pack(model), &grad);
  return grad;
}

ProportionalModel fit_proportional(std::span<const Observation> observations, double l2_weight) {
  if (observations.empty()) throw ValidationError("no observations");
  const int d = dataset_dimension(observations);
  const ProportionalDesign design(observations, d);

  auto objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
    double value = design.nll(theta, grad);
    const auto w = theta.tail(d);
    value += l2_weight * w.squaredNorm();
    if (grad) grad->tail(d) += 2.0 * l2_weight * w;
    return value;
  };

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  const double rate = design.events() > 0.0 ? design.events() / design.exposure() : 1e-8;
  theta[0] = std::log(rate);

  ProportionalModel out;
  Eigen::VectorXd grad;
  double value = objective(theta, &grad);
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;
  constexpr std::size_t kMemory = 10;
  bool capped = false;

  for (int it = 0; it < 5000; ++it) {
    if (grad.lpNorm<Eigen::Infinity>() <= 1e-9 * (1.0 + std::abs(value))) {
      out.converged = true;
      break;
    }
    // Two-loop recursion for the quasi-Newton direction.
    Eigen::VectorXd q = grad;
    std::vector<double> alpha(memory.size());
    for (std::size_t i = memory.size(); i-- > 0;) {
      const auto& [s, y] = memory[i];
      alpha[i] = s.dot(q) / y.dot(s);
      q -= alpha[i] * y;
    }
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      q *= s.dot(y) / y.squaredNorm();
    } else {
      q /= std::max(1.0, grad.norm());
    }
    for (std::size_t i = 0; i < memory.size(); ++i) {
      const auto& [s, y] = memory[i];
      const double beta = y.dot(q) / y.dot(s);
      q += (alpha[i] - beta) * s;
    }
    Eigen::VectorXd direction = -q;
    if (direction.dot(grad) >= 0.0) {
      direction = -grad / std::max(1.0, grad.norm());
      memory.clear();
    }

    double step = 1.0;
    Eigen::VectorXd next, next_grad;
    double next_value = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      next = theta + step * direction;
      Eigen::VectorXd w = next.tail(d);
      if ((w.array().abs() > kProportionalWeightCap).any()) {
        next.tail(d) = w.cwiseMax(-kProportionalWeightCap).cwiseMin(kProportionalWeightCap);
      }
      next_value = objective(next, &next_grad);
      if (std::isfinite(next_value) && next_value <= value + 1e-4 * grad.dot(next - theta)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    if ((next.tail(d).array().abs() >= kProportionalWeightCap).any()) {
      capped = true;
      memory.clear();
    } else {
      const Eigen::VectorXd s = next - theta;
      const Eigen::VectorXd y = next_grad - grad;
      if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
        memory.emplace_back(s, y);
        if (memory.size() > kMemory) memory.pop_front();
      }
    }
    const double change = std::abs(value - next_value) / std::max(1.0, std::abs(value));
    theta = next;
    grad = next_grad;
    value = next_value;
    if (change < 1e-14) {
      out.converged = true;
      break;
    }
  }
  out.base_rate = std::exp(theta[0]);
  out.weights = theta.tail(d);
  if (capped) {
    out.diagnostic = "weights reached the |w| <= 50 cap (likely separation)";
  } else if (d > 0 && out.weights.cwiseAbs().maxCoeff() > kProportionalDivergence) {
    out.diagnostic = "weights diverging (likely separation)";
  }
  return out;
}

}  // namespace tvhazard
