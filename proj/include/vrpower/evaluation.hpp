#pragma once

// Leave-one-sequence-out cross-validation, relative error metrics, variable
// pruning, per-term contributions, and resolution-change savings.

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "vrpower/dataset.hpp"
#include "vrpower/error.hpp"
#include "vrpower/solver.hpp"

namespace vrpower {

struct ErrorMetrics {
  double mean_rel_error = 0.0;
  double max_rel_error = 0.0;
};

/// Mean and max of |estimated - measured| / measured.
inline ErrorMetrics error_metrics(const std::vector<double>& measured,
                                  const std::vector<double>& estimated) {
  if (measured.size() != estimated.size()) {
    throw Error(ErrorCategory::validation, "measured and estimated lengths differ (" +
                                               std::to_string(measured.size()) + " vs " +
                                               std::to_string(estimated.size()) + ")");
  }
  if (measured.empty()) throw Error(ErrorCategory::validation, "error metrics need at least one value");
  ErrorMetrics out;
  double sum = 0.0;
  for (std::size_t j = 0; j < measured.size(); ++j) {
    if (measured[j] == 0.0) {
      throw Error(ErrorCategory::division_by_zero,
                  "measured power is zero at index " + std::to_string(j));
    }
    const double e = std::fabs((estimated[j] - measured[j]) / measured[j]);
    sum += e;
    out.max_rel_error = std::max(out.max_rel_error, e);
  }
  out.mean_rel_error = sum / static_cast<double>(measured.size());
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct HeldOutPrediction {
  std::size_t index;  // position in the input measurement list
  std::string key;    // sequence name
  double measured_w;
  double estimated_w;
  double rel_error;   // signed, (estimated - measured) / measured
};

struct FoldResult {
  std::string held_out;
  PowerModel model;
};

struct EvaluationReport {
  ModelSpec spec;
  std::vector<HeldOutPrediction> per_measurement;  // input order
  std::vector<FoldResult> folds;                   // sorted by sequence name
  double mean_rel_error = 0.0;
  double max_rel_error = 0.0;
};

struct CrossValidationOptions {
  BoundsMode bounds = BoundsMode::none;
  /// Worker threads for folds; 0 picks the hardware concurrency.
  unsigned jobs = 1;
  ScalingMode scaling = ScalingMode::standard;
};

namespace detail {

inline unsigned resolve_jobs(unsigned jobs, std::size_t tasks) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(tasks, 1)));
}

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. Rethrows the
/// exception of the lowest failing index so failures are reproducible.
template <typename Fn>
void parallel_for(std::size_t count, unsigned jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  auto run = [&](std::size_t worker, std::size_t stride) {
    for (std::size_t i = worker; i < count; i += stride) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = resolve_jobs(jobs, count);
  if (jobs <= 1) {
    run(0, 1);
  } else {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < jobs; ++w) workers.emplace_back(run, w, jobs);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::optional<Bounds> bounds_for(BoundsMode mode, const ModelSpec& spec) {
  switch (mode) {
    case BoundsMode::none: return std::nullopt;
    case BoundsMode::nonneg: return Bounds::nonneg(spec.num_params());
    case BoundsMode::box: break;
  }
  throw Error(ErrorCategory::validation, "cross-validation supports bounds 'none' or 'nonneg' only");
}

}  // namespace detail

/// Holds out every measurement of one sequence at a time, trains on the
/// rest, and scores the held-out predictions.
inline EvaluationReport cross_validate(const std::vector<Measurement>& measurements,
                                       const ModelSpec& spec,
                                       const CrossValidationOptions& options = {}) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t j = 0; j < measurements.size(); ++j) {
    groups[measurements[j].sequence.name].push_back(j);
  }
  if (groups.size() < 2) {
    throw Error(ErrorCategory::validation,
                "cross-validation needs at least 2 distinct sequences, got " +
                    std::to_string(groups.size()));
  }
  for (std::size_t j = 0; j < measurements.size(); ++j) {
    if (measurements[j].power_w == 0.0) {
      throw Error(ErrorCategory::division_by_zero,
                  "measurement " + std::to_string(j) + " (" + measurements[j].sequence.name +
                      ") has zero measured power");
    }
  }

  const auto bounds = detail::bounds_for(options.bounds, spec);
  std::vector<std::pair<std::string, std::vector<std::size_t>>> folds(groups.begin(), groups.end());
  std::vector<std::optional<PowerModel>> models(folds.size());

  detail::parallel_for(folds.size(), options.jobs, [&](std::size_t f) {
    const auto& name = folds[f].first;
    std::vector<Measurement> train;
    train.reserve(measurements.size());
    for (const auto& m : measurements) {
      if (m.sequence.name != name) train.push_back(m);
    }
    try {
      models[f] = fit(build_design(train, spec, options.scaling), bounds);
    } catch (const Error& e) {
      throw Error(ErrorCategory::fold, "fold holding out '" + name + "': " + e.what());
    }
  });

  EvaluationReport report;
  report.spec = spec;
  report.per_measurement.resize(measurements.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (auto j : folds[f].second) {
      const auto& m = measurements[j];
      const double est = predict(*models[f], m);
      report.per_measurement[j] = {j, m.sequence.name, m.power_w, est,
                                   (est - m.power_w) / m.power_w};
    }
    report.folds.push_back({folds[f].first, std::move(*models[f])});
  }

  double sum = 0.0;
  for (const auto& p : report.per_measurement) {
    const double e = std::fabs(p.rel_error);
    sum += e;
    report.max_rel_error = std::max(report.max_rel_error, e);
  }
  report.mean_rel_error = sum / static_cast<double>(report.per_measurement.size());
  return report;
}

// ---------------------------------------------------------------------------
// Pruning

enum class ThresholdKind {
  absolute_pp,   // increase of the mean error in percentage points
  relative_pct,  // increase relative to the baseline error, in percent
};

enum class PruneMode {
  one_at_a_time,  // every variable judged against the full baseline
  sequential,     // backward elimination, dropping the weakest each round
};

struct PruneOptions {
  double threshold = 0.5;
  ThresholdKind kind = ThresholdKind::absolute_pp;
  PruneMode mode = PruneMode::one_at_a_time;
  CrossValidationOptions cv;
};

struct PruneAuditRow {
  std::size_t round;
  Variable variable;
  double reference_error;  // mean relative error of the spec the variable was removed from
  double error_without;
  double increase;         // in threshold units
  bool retained;
};

struct PruneResult {
  ModelSpec spec;
  double baseline_error = 0.0;
  std::vector<PruneAuditRow> audit;
};

namespace detail {

inline double error_increase(double reference, double without, ThresholdKind kind) {
  const double delta = without - reference;
  if (kind == ThresholdKind::absolute_pp) return delta * 100.0;
  if (reference == 0.0) {
    return delta == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), delta);
  }
  return delta / reference * 100.0;
}

}  // namespace detail

/// Drops the variables whose removal raises the cross-validated mean error by
/// less than the threshold. A variable exactly at the threshold is kept.
inline PruneResult prune_variables(const std::vector<Measurement>& measurements,
                                   const ModelSpec& baseline, const PruneOptions& options = {}) {
  PruneResult result;
  result.baseline_error = cross_validate(measurements, baseline, options.cv).mean_rel_error;

  if (options.mode == PruneMode::one_at_a_time) {
    std::vector<Variable> kept;
    for (auto v : baseline.variables()) {
      const double without =
          cross_validate(measurements, baseline.without(v), options.cv).mean_rel_error;
      const double inc = detail::error_increase(result.baseline_error, without, options.kind);
      const bool keep = inc >= options.threshold;
      result.audit.push_back({1, v, result.baseline_error, without, inc, keep});
      if (keep) kept.push_back(v);
    }
    result.spec = ModelSpec(std::move(kept));
    return result;
  }

  ModelSpec current = baseline;
  double current_error = result.baseline_error;
  for (std::size_t round = 1; !current.variables().empty(); ++round) {
    std::optional<std::size_t> weakest;
    std::vector<PruneAuditRow> rows;
    for (auto v : current.variables()) {
      const double without =
          cross_validate(measurements, current.without(v), options.cv).mean_rel_error;
      const double inc = detail::error_increase(current_error, without, options.kind);
      rows.push_back({round, v, current_error, without, inc, true});
      if (!weakest || inc < rows[*weakest].increase) weakest = rows.size() - 1;
    }
    const bool drop = rows[*weakest].increase < options.threshold;
    if (drop) rows[*weakest].retained = false;
    result.audit.insert(result.audit.end(), rows.begin(), rows.end());
    if (!drop) break;
    current_error = rows[*weakest].error_without;
    current = current.without(rows[*weakest].variable);
  }
  result.spec = current;
  return result;
}

// ---------------------------------------------------------------------------
// Contributions

struct ContributionEntry {
  std::string name;  // "p_0" or the variable tag
  double c_max;      // fraction of measured power; 1.0 == 100 %
  std::size_t witness_index;
  std::string witness_key;
};

struct ContributionReport {
  std::vector<ContributionEntry> per_variable;  // intercept first, then spec order
};

/// Per-term watts p(k) * A(j,k) in raw units, intercept first.
inline std::vector<double> term_breakdown(const PowerModel& model, const Measurement& m) {
  const auto raw = model.params_raw();
  std::vector<double> terms{raw[0]};
  for (std::size_t k = 0; k < model.spec.variables().size(); ++k) {
    terms.push_back(raw[k + 1] * raw_feature(m, model.spec.variables()[k]));
  }
  return terms;
}

/// Signed share of each term in the measured power. Sums to
/// predict(model, m) / m.power_w.
inline std::vector<double> signed_contributions(const PowerModel& model, const Measurement& m) {
  if (m.power_w == 0.0) {
    throw Error(ErrorCategory::division_by_zero, "measured power of " + m.sequence.name + " is zero");
  }
  auto terms = term_breakdown(model, m);
  for (auto& t : terms) t /= m.power_w;
  return terms;
}

/// C_max(k) = max_j |A(j,k) p(k)| / P(j).
inline ContributionReport contributions(const PowerModel& model,
                                        const std::vector<Measurement>& measurements) {
  if (measurements.empty()) throw Error(ErrorCategory::validation, "no measurements");
  const std::size_t k = model.spec.num_params();
  ContributionReport report;
  for (std::size_t c = 0; c < k; ++c) {
    report.per_variable.push_back({model.spec.column_name(c), -1.0, 0, {}});
  }
  for (std::size_t j = 0; j < measurements.size(); ++j) {
    const auto& m = measurements[j];
    if (m.power_w == 0.0) {
      throw Error(ErrorCategory::division_by_zero,
                  "measurement " + std::to_string(j) + " (" + m.sequence.name + ") has zero power");
    }
    const auto terms = term_breakdown(model, m);
    for (std::size_t c = 0; c < k; ++c) {
      const double share = std::fabs(terms[c] / m.power_w);
      auto& e = report.per_variable[c];
      if (share > e.c_max) {
        e.c_max = share;
        e.witness_index = j;
        e.witness_key = m.sequence.name;
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Savings

struct Resolution {
  std::int64_t width = 0;
  std::int64_t height = 0;

  double pixels() const { return static_cast<double>(width) * static_cast<double>(height); }
};

struct SavingsEstimate {
  double from_pixels = 0.0;
  double to_pixels = 0.0;
  double delta_p_w = 0.0;
  std::optional<double> reference_power_w;
  std::optional<double> relative_saving;
};

/// delta_p = (S_from - S_to) * p_S with p_S in watts per pixel. The relative
/// saving is delta_p over the reference power when one is given.
inline SavingsEstimate estimate_savings(const PowerModel& model, Resolution from, Resolution to,
                                        std::optional<double> reference_power_w = std::nullopt) {
  const auto p_s = model.raw_param(Variable::resolution);
  if (!p_s) {
    throw Error(ErrorCategory::unsupported_query,
                "model has no resolution term S; cannot estimate resolution savings");
  }
  if (from.width <= 0 || from.height <= 0 || to.width <= 0 || to.height <= 0) {
    throw Error(ErrorCategory::validation, "resolutions must be positive");
  }
  SavingsEstimate out;
  out.from_pixels = from.pixels();
  out.to_pixels = to.pixels();
  out.delta_p_w = (out.from_pixels - out.to_pixels) * *p_s;
  if (reference_power_w) {
    if (*reference_power_w == 0.0) {
      throw Error(ErrorCategory::division_by_zero, "reference power is zero");
    }
    out.reference_power_w = reference_power_w;
    out.relative_saving = out.delta_p_w / *reference_power_w;
  }
  return out;
}

/// Same, with the reference power predicted by the model for `reference`.
inline SavingsEstimate estimate_savings(const PowerModel& model, Resolution from, Resolution to,
                                        const Measurement& reference) {
  return estimate_savings(model, from, to, predict(model, reference));
}

}  // namespace vrpower
