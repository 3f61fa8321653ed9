#include "tvhazard/likelihood.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace tvhazard {

namespace {

constexpr double kSmallMass = 1e-12;

void check_dimension(const HazardModel& m, const FeaturePath& p) {
  if (!p.tracks().empty() && p.tracks().back().index >= m.dimension()) {
    throw ValidationError("feature index " + std::to_string(p.tracks().back().index) +
                          " exceeds model dimension " + std::to_string(m.dimension()));
  }
}

double integrate_step(const StepFunction& f, double a, double b) {
  const KnotSet& knots = f.knots();
  double total = 0.0;
  for (std::size_t k = knots.segment_of(a); k < knots.num_segments(); ++k) {
    const double begin = std::max(knots.segment_begin(k), a);
    const double end = std::min(knots.segment_end(k), b);
    if (begin >= b) break;
    if (end > begin) total += (end - begin) * f.values()[static_cast<Eigen::Index>(k)];
  }
  return total;
}

double inner(const std::vector<ExposureEntry>& e, const Eigen::MatrixXd& w) {
  double s = 0.0;
  for (const auto& x : e) s += x.weight * w(x.row, x.segment);
  return s;
}

void accumulate(const std::vector<ExposureEntry>& e, double scale, Eigen::MatrixXd& grad) {
  for (const auto& x : e) grad(x.row, x.segment) += scale * x.weight;
}

}  // namespace

HazardModel::HazardModel(KnotSetPtr knots, Eigen::MatrixXd values) : knots_(std::move(knots)) {
  if (!knots_) throw ValidationError("hazard model needs a knot set");
  if (values.rows() < 1 || values.cols() != static_cast<Eigen::Index>(knots_->num_segments())) {
    throw ValidationError("hazard model matrix must be (d+1) x segments");
  }
  if (!values.allFinite()) throw ValidationError("hazard model values must be finite");
  if ((values.array() < 0.0).any()) throw ValidationError("hazard model values must be nonnegative");
  values_.resize(values.rows(), values.cols());
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    values_.row(r) = canonical_levels(values.row(r).transpose()).transpose();
  }
}

HazardModel HazardModel::zeros(KnotSetPtr knots, int dimension) {
  const auto cols = static_cast<Eigen::Index>(knots->num_segments());
  return HazardModel(std::move(knots), Eigen::MatrixXd::Zero(dimension + 1, cols));
}

StepFunction HazardModel::row(int r) const {
  if (r < 0 || r >= values_.rows()) throw std::out_of_range("hazard model row out of range");
  return StepFunction(knots_, values_.row(r).transpose());
}

double hazard(const HazardModel& m, const FeaturePath& p, double t) {
  if (!(t >= m.knots().origin() && t <= m.knots().horizon())) {
    throw std::domain_error("time outside [origin, horizon]");
  }
  check_dimension(m, p);
  const auto k = static_cast<Eigen::Index>(m.knots().segment_of(t));
  double rate = m.values()(0, k);
  for (const auto& track : p.tracks()) {
    rate += p.value(track.index, t) * m.values()(track.index + 1, k);
  }
  return rate;
}

double cumulative_hazard(const HazardModel& m, const FeaturePath& p, double a, double b) {
  if (!(a >= m.knots().origin() && b <= m.knots().horizon())) {
    throw std::domain_error("integration range outside [origin, horizon]");
  }
  if (b < a) throw ValidationError("reversed integration interval");
  check_dimension(m, p);
  double total = integrate_step(m.intercept(), a, b);
  for (const auto& track : p.tracks()) {
    total += integrate_step_product(m.coefficient(track.index), p, track.index, a, b);
  }
  return total;
}

double survival(const HazardModel& m, const FeaturePath& p, double t) {
  return std::exp(-cumulative_hazard(m, p, 0.0, t));
}

double neg_log_one_minus_exp(double x) {
  if (x <= 0.0) return std::numeric_limits<double>::infinity();
  // -log(1 - e^{-x}) = -log x + x/2 - x^2/24 + ...
  if (x < kSmallMass) return -std::log(x) + 0.5 * x;
  if (x < std::numbers::ln2) return -std::log(-std::expm1(-x));
  return -std::log1p(-std::exp(-x));
}

double nll_observation(const HazardModel& m, const Observation& o, std::vector<Warning>* warnings) {
  validate_censoring(o.censoring);
  if (const auto* iv = std::get_if<IntervalCensored>(&o.censoring)) {
    const double before = cumulative_hazard(m, o.path, 0.0, iv->left);
    const double mass = cumulative_hazard(m, o.path, iv->left, iv->right);
    if (mass <= 0.0 && warnings) {
      warnings->push_back({"zero_interval_mass", o.id,
                           "model assigns zero probability to the censoring bracket"});
    }
    return before + neg_log_one_minus_exp(mass);
  }
  return cumulative_hazard(m, o.path, 0.0, std::get<RightCensored>(o.censoring).at);
}

double nll_dataset(const HazardModel& m, std::span<const Observation> observations,
                   std::vector<Warning>* warnings) {
  double total = 0.0;
  for (const auto& o : observations) total += nll_observation(m, o, warnings);
  return total;
}

Eigen::MatrixXd nll_gradient(const HazardModel& m, std::span<const Observation> observations) {
  CensoredDesign design(m.knot_ptr(), m.dimension(), observations);
  Eigen::MatrixXd grad;
  design.nll_and_gradient(m.values(), grad);
  return grad;
}

CensoredDesign::CensoredDesign(KnotSetPtr knots, int dimension, std::span<const Observation> observations)
    : knots_(std::move(knots)), dimension_(dimension) {
  if (dimension < 0) throw ValidationError("negative feature dimension");
  terms_.reserve(observations.size());
  for (const auto& o : observations) {
    validate_censoring(o.censoring);
    if (!o.path.tracks().empty() && o.path.tracks().back().index >= dimension) {
      throw ValidationError("observation " + o.id + " has a feature index beyond dimension " +
                            std::to_string(dimension));
    }
    Term term;
    if (const auto* iv = std::get_if<IntervalCensored>(&o.censoring)) {
      term.before = exposure(*knots_, o.path, 0.0, iv->left);
      term.bracket = exposure(*knots_, o.path, iv->left, iv->right);
      term.interval = true;
      total_exposure_ += iv->left + 0.5 * (iv->right - iv->left);
      ++events_;
    } else {
      const double at = std::get<RightCensored>(o.censoring).at;
      term.before = exposure(*knots_, o.path, 0.0, at);
      term.interval = false;
      total_exposure_ += at;
    }
    terms_.push_back(std::move(term));
  }
}

double CensoredDesign::term_nll(const Term& t, const Eigen::MatrixXd& w) const {
  double value = inner(t.before, w);
  if (t.interval) value += neg_log_one_minus_exp(inner(t.bracket, w));
  return value;
}

double CensoredDesign::term_gradient(const Term& t, const Eigen::MatrixXd& w, Eigen::MatrixXd& grad) const {
  double value = inner(t.before, w);
  accumulate(t.before, 1.0, grad);
  if (t.interval) {
    const double mass = inner(t.bracket, w);
    if (!(mass > 0.0)) {
      throw NumericalError("zero-mass censoring bracket: gradient undefined; keep the baseline above zero");
    }
    value += neg_log_one_minus_exp(mass);
    // d/dm of -log(1 - e^{-m}) = -e^{-m} / (1 - e^{-m})
    accumulate(t.bracket, -1.0 / std::expm1(mass), grad);
  }
  return value;
}

double CensoredDesign::nll(const Eigen::MatrixXd& w) const {
  double total = 0.0;
  for (const auto& t : terms_) total += term_nll(t, w);
  return total;
}

double CensoredDesign::nll(const Eigen::MatrixXd& w, std::span<const std::size_t> subset) const {
  double total = 0.0;
  for (std::size_t i : subset) total += term_nll(terms_.at(i), w);
  return total;
}

double CensoredDesign::nll_and_gradient(const Eigen::MatrixXd& w, Eigen::MatrixXd& grad) const {
  grad.setZero(rows(), cols());
  double total = 0.0;
  for (const auto& t : terms_) total += term_gradient(t, w, grad);
  return total;
}

double CensoredDesign::nll_and_gradient(const Eigen::MatrixXd& w, std::span<const std::size_t> subset,
                                        Eigen::MatrixXd& grad) const {
  grad.setZero(rows(), cols());
  double total = 0.0;
  for (std::size_t i : subset) total += term_gradient(terms_.at(i), w, grad);
  return total;
}

}  // namespace tvhazard
