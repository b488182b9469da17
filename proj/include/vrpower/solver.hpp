#pragma once

// Least-squares fitting of the linear power model and prediction.
//
// Unbounded fits use a column-pivoted Householder QR of the scaled design.
// Bounded fits run an active-set method: the free variables are solved by QR
// with the fixed ones pinned at their bounds, the iterate is pulled back along
// the segment when the subproblem leaves the box, and the most violating
// bound is released until the projected gradient vanishes.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vrpower/dataset.hpp"
#include "vrpower/error.hpp"

namespace vrpower {

/// Per-parameter box in raw units (watts per pixel, per bit/s, ...).
struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;

  static Bounds nonneg(std::size_t k) {
    return {std::vector<double>(k, 0.0),
            std::vector<double>(k, std::numeric_limits<double>::infinity())};
  }

  bool is_nonneg() const {
    return std::all_of(lower.begin(), lower.end(), [](double v) { return v == 0.0; }) &&
           std::all_of(upper.begin(), upper.end(), [](double v) { return std::isinf(v) && v > 0; });
  }
};

enum class BoundsMode { none, nonneg, box };

inline std::string_view bounds_mode_name(BoundsMode m) {
  switch (m) {
    case BoundsMode::none: return "none";
    case BoundsMode::nonneg: return "nonneg";
    case BoundsMode::box: return "box";
  }
  return "none";
}

struct FitDiagnostics {
  double rss_w2 = 0.0;
  std::size_t n_train = 0;
  std::size_t iterations = 0;

  friend bool operator==(const FitDiagnostics& a, const FitDiagnostics& b) {
    return a.rss_w2 == b.rss_w2 && a.n_train == b.n_train;
  }
};

/// Fitted model. params_scaled[k] is in watts per scaled unit of column k;
/// multiply by scaling[k] to get watts per raw unit.
struct PowerModel {
  ModelSpec spec;
  std::vector<double> params_scaled;
  std::vector<double> scaling;
  FitDiagnostics diagnostics;
  BoundsMode bounds_mode = BoundsMode::none;

  std::vector<double> params_raw() const {
    std::vector<double> out(params_scaled.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = params_scaled[k] * scaling[k];
    return out;
  }

  double intercept() const { return params_scaled.front(); }

  /// Raw-unit parameter of v, if the model has it.
  std::optional<double> raw_param(Variable v) const {
    auto col = spec.column_of(v);
    if (!col) return std::nullopt;
    return params_scaled[*col] * scaling[*col];
  }

  void validate() const {
    const auto k = spec.num_params();
    if (params_scaled.size() != k || scaling.size() != k) {
      throw Error(ErrorCategory::validation,
                  "model declares " + std::to_string(spec.variables().size()) + " variables but has " +
                      std::to_string(params_scaled.size()) + " parameters and " +
                      std::to_string(scaling.size()) + " scale factors");
    }
    for (std::size_t i = 0; i < k; ++i) {
      if (!std::isfinite(params_scaled[i]) || !std::isfinite(scaling[i]) || !(scaling[i] > 0.0)) {
        throw Error(ErrorCategory::validation, "model parameter " + spec.column_name(i) +
                                                   " or its scale factor is not finite");
      }
    }
  }

  friend bool operator==(const PowerModel&, const PowerModel&) = default;
};

namespace detail {

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline void check_rank(const DesignMatrix& d) {
  const auto n = d.rows();
  const auto k = d.cols();
  if (n < k) {
    throw Error(ErrorCategory::underdetermined,
                "need at least " + std::to_string(k) + " measurements to fit " + std::to_string(k) +
                    " parameters, got " + std::to_string(n));
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.A);
  if (qr.rank() < k) {
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index i = qr.rank(); i < k; ++i) {
      if (!cols.empty()) cols += ", ";
      cols += d.spec.column_name(static_cast<std::size_t>(perm(i)));
    }
    throw Error(ErrorCategory::singular_design,
                "design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                    std::to_string(k) + "); linearly dependent column(s): " + cols);
  }
}

struct BoxSolution {
  Eigen::VectorXd x;
  std::size_t iterations = 0;
};

inline double projected_gradient_norm(const Eigen::VectorXd& g, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    double pg = g(i);
    if (x(i) <= lo(i)) pg = std::min(pg, 0.0);
    if (x(i) >= hi(i)) pg = std::max(pg, 0.0);
    worst = std::max(worst, std::fabs(pg));
  }
  return worst;
}

/// min ||A x - b||^2 subject to lo <= x <= hi. A must have full column rank.
inline BoxSolution solve_box_least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                           const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                           double tolerance) {
  const Eigen::Index k = A.cols();
  enum class State { free, at_lower, at_upper };
  std::vector<State> state(static_cast<std::size_t>(k), State::free);

  Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (x(i) <= lo(i)) {
      x(i) = lo(i);
      state[i] = State::at_lower;
    } else if (x(i) >= hi(i)) {
      x(i) = hi(i);
      state[i] = State::at_upper;
    }
  }

  const std::size_t max_iterations = 100 * static_cast<std::size_t>(k) + 100;
  std::size_t iterations = 0;
  std::optional<Eigen::Index> just_released;

  while (iterations++ < max_iterations) {
    bool stalled = false;
    // Minimise over the free set, keeping the iterate feasible.
    while (true) {
      std::vector<Eigen::Index> free;
      for (Eigen::Index i = 0; i < k; ++i) {
        if (state[i] == State::free) free.push_back(i);
      }
      if (free.empty()) break;

      Eigen::MatrixXd af(A.rows(), static_cast<Eigen::Index>(free.size()));
      Eigen::VectorXd rhs = b;
      for (Eigen::Index i = 0; i < k; ++i) {
        if (state[i] != State::free) rhs -= A.col(i) * x(i);
      }
      for (std::size_t j = 0; j < free.size(); ++j) af.col(Eigen::Index(j)) = A.col(free[j]);
      const Eigen::VectorXd z = af.colPivHouseholderQr().solve(rhs);

      double alpha = 1.0;
      std::optional<std::size_t> blocking;
      for (std::size_t j = 0; j < free.size(); ++j) {
        const auto i = free[j];
        const double zi = z(Eigen::Index(j));
        double step = 1.0;
        if (zi < lo(i)) step = (lo(i) - x(i)) / (zi - x(i));
        if (zi > hi(i)) step = (hi(i) - x(i)) / (zi - x(i));
        if (step < alpha) {
          alpha = step;
          blocking = j;
        }
      }
      alpha = std::clamp(alpha, 0.0, 1.0);

      if (!blocking) {
        for (std::size_t j = 0; j < free.size(); ++j) x(free[j]) = z(Eigen::Index(j));
        break;
      }
      for (std::size_t j = 0; j < free.size(); ++j) {
        const auto i = free[j];
        const double zi = z(Eigen::Index(j));
        x(i) += alpha * (zi - x(i));
        const double slack = 1e-14 * (1.0 + std::fabs(x(i)) + std::fabs(zi));
        if (zi < lo(i) && (j == *blocking || x(i) <= lo(i) + slack)) {
          x(i) = lo(i);
          state[i] = State::at_lower;
        } else if (zi > hi(i) && (j == *blocking || x(i) >= hi(i) - slack)) {
          x(i) = hi(i);
          state[i] = State::at_upper;
        }
      }
      // Releasing a bound that is immediately hit again means the release was
      // spurious; the point is already optimal up to round-off.
      if (just_released && state[*just_released] != State::free && alpha == 0.0) {
        stalled = true;
        break;
      }
    }

    const Eigen::VectorXd g = A.transpose() * (A * x - b);
    std::optional<Eigen::Index> release;
    double worst = tolerance;
    for (Eigen::Index i = 0; i < k; ++i) {
      double violation = 0.0;
      if (state[i] == State::at_lower) violation = -g(i);
      if (state[i] == State::at_upper) violation = g(i);
      if (violation > worst) {
        worst = violation;
        release = i;
      }
    }
    if (!release || stalled) {
      if (projected_gradient_norm(g, x, lo, hi) > tolerance) {
        throw Error(ErrorCategory::convergence,
                    "bounded fit stalled with projected gradient above tolerance");
      }
      return {x, iterations};
    }
    state[*release] = State::free;
    just_released = release;
  }
  throw Error(ErrorCategory::convergence, "bounded fit did not converge");
}

}  // namespace detail

/// Relative projected-gradient tolerance for bounded fits on the scaled problem.
inline constexpr double kBoundedFitTolerance = 1e-10;

/// Minimises sum_j (A(j,:) p - P(j))^2, optionally inside raw-unit bounds.
inline PowerModel fit(const DesignMatrix& design, const std::optional<Bounds>& bounds = std::nullopt) {
  const auto k = design.cols();
  if (bounds) {
    if (bounds->lower.size() != std::size_t(k) || bounds->upper.size() != std::size_t(k)) {
      throw Error(ErrorCategory::validation, "bounds must have one entry per parameter (" +
                                                 std::to_string(k) + ")");
    }
    for (Eigen::Index i = 0; i < k; ++i) {
      const double lo = bounds->lower[i];
      const double hi = bounds->upper[i];
      if (std::isnan(lo) || std::isnan(hi) || lo > hi) {
        throw Error(ErrorCategory::validation,
                    "bounds for " + design.spec.column_name(std::size_t(i)) + " have lower > upper");
      }
    }
  }
  detail::check_rank(design);

  PowerModel model;
  model.spec = design.spec;
  model.scaling = design.scaling;
  model.diagnostics.n_train = static_cast<std::size_t>(design.rows());

  Eigen::VectorXd p;
  if (!bounds) {
    p = design.A.colPivHouseholderQr().solve(design.P);
    model.bounds_mode = BoundsMode::none;
  } else {
    Eigen::VectorXd lo(k), hi(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      lo(i) = bounds->lower[i] / design.scaling[i];
      hi(i) = bounds->upper[i] / design.scaling[i];
    }
    const double scale = std::max(1.0, (design.A.transpose() * design.P).cwiseAbs().maxCoeff());
    auto sol = detail::solve_box_least_squares(design.A, design.P, lo, hi,
                                               kBoundedFitTolerance * scale);
    p = sol.x;
    model.diagnostics.iterations = sol.iterations;
    model.bounds_mode = bounds->is_nonneg() ? BoundsMode::nonneg : BoundsMode::box;
  }
  model.params_scaled = detail::to_std(p);
  model.diagnostics.rss_w2 = (design.A * p - design.P).squaredNorm();
  return model;
}

/// Features in the model's own scaling, intercept first.
inline Eigen::VectorXd model_features(const PowerModel& model, const Measurement& m) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(model.spec.num_params()));
  x(0) = 1.0;
  for (std::size_t k = 0; k < model.spec.variables().size(); ++k) {
    x(Eigen::Index(k + 1)) = raw_feature(m, model.spec.variables()[k]) * model.scaling[k + 1];
  }
  return x;
}

/// dot(params, features). Can be negative when extrapolating; callers decide
/// how to report that.
inline double predict(const PowerModel& model, const Measurement& m) {
  const auto x = model_features(model, m);
  double sum = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) sum += model.params_scaled[std::size_t(k)] * x(k);
  return sum;
}

/// Prediction from raw feature values (no intercept entry), in spec order.
inline double predict_raw(const PowerModel& model, const std::vector<double>& raw_features) {
  if (raw_features.size() + 1 != model.params_scaled.size()) {
    throw Error(ErrorCategory::validation, "expected " +
                                               std::to_string(model.params_scaled.size() - 1) +
                                               " feature values");
  }
  double sum = model.params_scaled[0];
  for (std::size_t k = 0; k < raw_features.size(); ++k) {
    sum += model.params_scaled[k + 1] * (raw_features[k] * model.scaling[k + 1]);
  }
  return sum;
}

}  // namespace vrpower
