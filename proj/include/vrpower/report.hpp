#pragma once

// CSV and console emitters for fitted models and evaluation results. CSV
// numbers use the shortest round-trip form, so identical inputs give
// byte-identical files.

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "vrpower/dataset.hpp"
#include "vrpower/detail/text.hpp"
#include "vrpower/evaluation.hpp"
#include "vrpower/solver.hpp"

namespace vrpower {

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

inline std::string scaled_unit(const ModelSpec& spec, std::size_t k) {
  if (k == 0) return "W";
  switch (spec.variables()[k - 1]) {
    case Variable::bitrate: return "W/(Mbit/s)";
    case Variable::resolution: return "W/Mpx";
    case Variable::frame_rate: return "W/fps";
    default: return "W";
  }
}

inline std::string raw_unit(const ModelSpec& spec, std::size_t k) {
  if (k == 0) return "W";
  switch (spec.variables()[k - 1]) {
    case Variable::bitrate: return "W/(bit/s)";
    case Variable::resolution: return "W/px";
    case Variable::frame_rate: return "W/fps";
    default: return "W";
  }
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace detail

inline void print_model_table(std::ostream& out, const PowerModel& model) {
  const auto raw = model.params_raw();
  out << detail::pad("param", 10) << detail::pad("scaled", 16) << detail::pad("unit", 14)
      << detail::pad("raw", 16) << "unit\n";
  for (std::size_t k = 0; k < model.params_scaled.size(); ++k) {
    out << detail::pad(model.spec.column_name(k), 10)
        << detail::pad(detail::sci(model.params_scaled[k]), 16)
        << detail::pad(detail::scaled_unit(model.spec, k), 14)
        << detail::pad(detail::sci(raw[k]), 16) << detail::raw_unit(model.spec, k) << '\n';
  }
  out << "bounds: " << bounds_mode_name(model.bounds_mode)
      << "  n_train: " << model.diagnostics.n_train
      << "  rss: " << detail::sci(model.diagnostics.rss_w2) << " W^2\n";
}

/// index,sequence,measured_w,estimated_w,rel_error
inline void write_evaluation_csv(std::ostream& out, const EvaluationReport& report) {
  out << "index,sequence,measured_w,estimated_w,rel_error\n";
  for (const auto& p : report.per_measurement) {
    out << p.index << ',' << p.key << ',' << detail::format_double(p.measured_w) << ','
        << detail::format_double(p.estimated_w) << ',' << detail::format_double(p.rel_error) << '\n';
  }
}

/// One row per fold: held-out sequence, then the fold's scaled parameters.
inline void write_folds_csv(std::ostream& out, const EvaluationReport& report) {
  out << "held_out";
  for (std::size_t k = 0; k < report.spec.num_params(); ++k) out << ',' << report.spec.column_name(k);
  out << '\n';
  for (const auto& f : report.folds) {
    out << f.held_out;
    for (double p : f.model.params_scaled) out << ',' << detail::format_double(p);
    out << '\n';
  }
}

inline void print_evaluation_summary(std::ostream& out, const EvaluationReport& report) {
  out << "spec: " << (report.spec.variables().empty() ? "(intercept only)" : report.spec.to_string())
      << "  folds: " << report.folds.size() << "  N: " << report.per_measurement.size() << '\n';
  out << "mean relative error: " << detail::fixed(report.mean_rel_error * 100.0, 4) << " %\n";
  out << "max relative error:  " << detail::fixed(report.max_rel_error * 100.0, 4) << " %\n";
}

/// round,variable,reference_error,error_without,increase,decision
inline void write_prune_audit_csv(std::ostream& out, const PruneResult& result) {
  out << "round,variable,reference_error,error_without,increase,decision\n";
  for (const auto& a : result.audit) {
    out << a.round << ',' << variable_tag(a.variable) << ','
        << detail::format_double(a.reference_error) << ',' << detail::format_double(a.error_without)
        << ',' << detail::format_double(a.increase) << ',' << (a.retained ? "keep" : "drop") << '\n';
  }
}

inline void print_prune_table(std::ostream& out, const PruneResult& result) {
  out << "baseline mean relative error: " << detail::fixed(result.baseline_error * 100.0, 4)
      << " %\n";
  out << detail::pad("round", 7) << detail::pad("variable", 10) << detail::pad("error_without", 16)
      << detail::pad("increase", 12) << "decision\n";
  for (const auto& a : result.audit) {
    out << detail::pad(std::to_string(a.round), 7)
        << detail::pad(std::string(variable_tag(a.variable)), 10)
        << detail::pad(detail::fixed(a.error_without * 100.0, 4) + " %", 16)
        << detail::pad(detail::fixed(a.increase, 4), 12) << (a.retained ? "keep" : "drop") << '\n';
  }
  out << "retained: "
      << (result.spec.variables().empty() ? "(intercept only)" : result.spec.to_string()) << '\n';
}

/// Bar-chart data: variable,c_max_pct,witness_index,witness_sequence
inline void write_contributions_csv(std::ostream& out, const ContributionReport& report) {
  out << "variable,c_max_pct,witness_index,witness_sequence\n";
  for (const auto& e : report.per_variable) {
    out << e.name << ',' << detail::format_double(e.c_max * 100.0) << ',' << e.witness_index << ','
        << e.witness_key << '\n';
  }
}

inline void print_contributions_table(std::ostream& out, const ContributionReport& report) {
  out << detail::pad("term", 10) << detail::pad("C_max", 12) << "witness\n";
  for (const auto& e : report.per_variable) {
    out << detail::pad(e.name, 10) << detail::pad(detail::fixed(e.c_max * 100.0, 2) + " %", 12)
        << e.witness_key << " (#" << e.witness_index << ")\n";
  }
}

/// Stacked-bar data: measured power next to the per-term estimate.
inline void write_breakdown_csv(std::ostream& out, const PowerModel& model,
                                const std::vector<Measurement>& measurements) {
  out << "index,sequence,crf,measured_w,estimated_w";
  for (std::size_t k = 0; k < model.spec.num_params(); ++k) out << ",term_" << model.spec.column_name(k);
  out << '\n';
  for (std::size_t j = 0; j < measurements.size(); ++j) {
    const auto& m = measurements[j];
    const auto terms = term_breakdown(model, m);
    out << j << ',' << m.sequence.name << ',' << m.sequence.crf << ','
        << detail::format_double(m.power_w) << ',' << detail::format_double(predict(model, m));
    for (double t : terms) out << ',' << detail::format_double(t);
    out << '\n';
  }
}

/// index,sequence,estimated_w,measured_w,negative
inline void write_predictions_csv(std::ostream& out, const PowerModel& model,
                                  const std::vector<Measurement>& measurements) {
  out << "index,sequence,estimated_w,measured_w,negative\n";
  for (std::size_t j = 0; j < measurements.size(); ++j) {
    const double est = predict(model, measurements[j]);
    out << j << ',' << measurements[j].sequence.name << ',' << detail::format_double(est) << ','
        << detail::format_double(measurements[j].power_w) << ',' << (est < 0.0 ? 1 : 0) << '\n';
  }
}

/// from_px,to_px,delta_p_w,reference_power_w,relative_saving
inline void write_savings_csv(std::ostream& out, const SavingsEstimate& s) {
  out << "from_px,to_px,delta_p_w,reference_power_w,relative_saving\n";
  out << detail::format_double(s.from_pixels) << ',' << detail::format_double(s.to_pixels) << ','
      << detail::format_double(s.delta_p_w) << ','
      << (s.reference_power_w ? detail::format_double(*s.reference_power_w) : "") << ','
      << (s.relative_saving ? detail::format_double(*s.relative_saving) : "") << '\n';
}

}  // namespace vrpower
