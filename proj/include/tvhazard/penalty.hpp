#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "tvhazard/error.hpp"

namespace tvhazard {

struct PenaltyConfig {
  /// Weight of the total-variation term.
  double gamma = 0.0;
  /// Constrain coefficient paths to be nondecreasing in time.
  bool monotone = false;
  /// In monotone mode, also constrain the baseline w_0.
  bool monotone_intercept = true;
  bool nonnegative = true;
  /// Feature paths start from zero before the origin, so their penalty also
  /// counts the initial rise: gamma * (w_j[0] + tv(w_j)). Requires
  /// nonnegative, which makes the extra term linear.
  bool anchor_features = false;
};

enum class RowKind { Intercept, Feature };

inline bool is_monotone_row(const PenaltyConfig& cfg, RowKind kind) {
  return cfg.monotone && (kind == RowKind::Feature || cfg.monotone_intercept);
}

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Sum of absolute successive differences. Throws on an empty sequence.
template <class Derived>
typename Derived::Scalar tv(const Eigen::MatrixBase<Derived>& values) {
  if (values.size() == 0) throw ValidationError("total variation of an empty sequence");
  typename Derived::Scalar total(0);
  for (Eigen::Index k = 1; k < values.size(); ++k) {
    using std::abs;
    total += abs(values(k) - values(k - 1));
  }
  return total;
}

/// Sum of tv() over the rows of a coefficient matrix.
template <class Derived>
typename Derived::Scalar tv_rows(const Eigen::MatrixBase<Derived>& w) {
  typename Derived::Scalar total(0);
  for (Eigen::Index r = 0; r < w.rows(); ++r) total += tv(w.row(r));
  return total;
}

/**
 * Exact minimizer of 1/2 ||y - w||^2 + weight * sum |w[k+1] - w[k]|.
 *
 * Linear-time dynamic programming: a forward pass carries the derivative of
 * the partial objective as a piecewise-linear function (breakpoints with
 * slope/offset increments) and records, for each position, the interval of
 * predecessor values that need no clamping; a backward pass clamps.
 */
template <class Derived>
VectorX<typename Derived::Scalar> fused_lasso_prox(const Eigen::MatrixBase<Derived>& y_in,
                                                   typename Derived::Scalar weight) {
  using Scalar = typename Derived::Scalar;
  const VectorX<Scalar> y = y_in.reshaped();
  const Eigen::Index n = y.size();
  if (!y.allFinite()) throw ValidationError("fused lasso input must be finite");
  if (!(weight >= Scalar(0)) || !std::isfinite(static_cast<double>(weight))) {
    throw ValidationError("fused lasso weight must be finite and nonnegative");
  }
  if (n <= 1 || weight == Scalar(0)) return y;

  VectorX<Scalar> knot(2 * n), slope(2 * n), offset(2 * n);
  VectorX<Scalar> lower(n - 1), upper(n - 1);
  const Scalar lam = weight;

  lower[0] = y(0) - lam;
  upper[0] = y(0) + lam;
  Eigen::Index lo_end = n - 1;
  Eigen::Index hi_end = n;
  knot[lo_end] = lower[0];
  knot[hi_end] = upper[0];
  slope[lo_end] = 1;
  offset[lo_end] = -y(0) + lam;
  slope[hi_end] = -1;
  offset[hi_end] = y(0) + lam;
  Scalar first_slope = 1, first_offset = -y(1) - lam;
  Scalar last_slope = -1, last_offset = y(1) - lam;

  for (Eigen::Index k = 1; k < n - 1; ++k) {
    // Walk up from the left until the derivative exceeds -lam.
    Scalar sl = first_slope, of = first_offset;
    Eigen::Index lo = lo_end;
    for (; lo <= hi_end; ++lo) {
      if (sl * knot[lo] + of > -lam) break;
      sl += slope[lo];
      of += offset[lo];
    }
    // Walk down from the right until the derivative drops below lam.
    Scalar sh = last_slope, oh = last_offset;
    Eigen::Index hi = hi_end;
    for (; hi >= lo; --hi) {
      if (-sh * knot[hi] - oh < lam) break;
      sh += slope[hi];
      oh += offset[hi];
    }
    lower[k] = (-lam - of) / sl;
    upper[k] = (lam + oh) / (-sh);
    lo_end = lo - 1;
    hi_end = hi + 1;
    knot[lo_end] = lower[k];
    knot[hi_end] = upper[k];
    slope[lo_end] = sl;
    offset[lo_end] = of + lam;
    slope[hi_end] = sh;
    offset[hi_end] = oh + lam;
    first_slope = 1;
    first_offset = -y(k + 1) - lam;
    last_slope = -1;
    last_offset = y(k + 1) - lam;
  }

  // The last value sits where the derivative crosses zero.
  Scalar sl = first_slope, of = first_offset;
  for (Eigen::Index lo = lo_end; lo <= hi_end; ++lo) {
    if (sl * knot[lo] + of > 0) break;
    sl += slope[lo];
    of += offset[lo];
  }
  VectorX<Scalar> w(n);
  w(n - 1) = -of / sl;
  for (Eigen::Index k = n - 2; k >= 0; --k) {
    if (w(k + 1) > upper[k]) {
      w(k) = upper[k];
    } else if (w(k + 1) < lower[k]) {
      w(k) = lower[k];
    } else {
      w(k) = w(k + 1);
    }
  }
  return w;
}

/// Euclidean projection onto nondecreasing sequences (pool adjacent violators).
template <class Derived>
VectorX<typename Derived::Scalar> isotonic_project(const Eigen::MatrixBase<Derived>& y_in) {
  using Scalar = typename Derived::Scalar;
  const VectorX<Scalar> y = y_in.reshaped();
  struct Block {
    Scalar sum;
    Eigen::Index count;
    Scalar mean() const { return sum / static_cast<Scalar>(count); }
  };
  std::vector<Block> blocks;
  blocks.reserve(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    blocks.push_back({y(i), 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      Block top = blocks.back();
      blocks.pop_back();
      blocks.back().sum += top.sum;
      blocks.back().count += top.count;
    }
  }
  VectorX<Scalar> w(y.size());
  Eigen::Index pos = 0;
  for (const auto& b : blocks) {
    w.segment(pos, b.count).setConstant(b.mean());
    pos += b.count;
  }
  return w;
}

template <class Derived>
VectorX<typename Derived::Scalar> nonneg_clip(const Eigen::MatrixBase<Derived>& y) {
  using Scalar = typename Derived::Scalar;
  return y.reshaped().cwiseMax(Scalar(0));
}

/**
 * Proximal map applied to one coefficient row per gradient step.
 *
 * Free rows: TV prox with the given weight, then clipping at zero (exact for
 * TV plus nonnegativity in one dimension). Monotone rows: isotonic projection
 * then clipping; their TV term is linear on the feasible set and is carried
 * by the smooth part of the objective instead.
 */
template <class Derived>
VectorX<typename Derived::Scalar> prox_step(const Eigen::MatrixBase<Derived>& y, typename Derived::Scalar weight,
                                            const PenaltyConfig& cfg, RowKind kind = RowKind::Feature) {
  VectorX<typename Derived::Scalar> w =
      is_monotone_row(cfg, kind) ? isotonic_project(y) : fused_lasso_prox(y, weight);
  if (cfg.nonnegative) w = nonneg_clip(w);
  return w;
}

}  // namespace tvhazard
