#pragma once

// Power-meter traces: parsing, windowed mean power, idle-offset subtraction.

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "vrpower/detail/text.hpp"
#include "vrpower/error.hpp"

namespace vrpower {

struct Sample {
  double time_s;
  double power_w;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Timestamped power samples. Construction validates: at least two samples,
/// strictly increasing time, finite non-negative power.
class PowerTrace {
 public:
  explicit PowerTrace(std::vector<Sample> samples, double nominal_rate_hz = 0.0)
      : samples_(std::move(samples)), nominal_rate_hz_(nominal_rate_hz) {
    if (samples_.size() < 2) {
      throw Error(ErrorCategory::validation, "trace needs at least 2 samples, got " +
                                                 std::to_string(samples_.size()));
    }
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const auto& s = samples_[i];
      if (!std::isfinite(s.time_s) || !std::isfinite(s.power_w) || s.power_w < 0.0) {
        throw Error(ErrorCategory::validation,
                    "sample " + std::to_string(i) + ": power must be finite and >= 0");
      }
      if (i > 0 && !(s.time_s > samples_[i - 1].time_s)) {
        throw Error(ErrorCategory::validation,
                    "sample " + std::to_string(i) + ": time not strictly increasing (" +
                        detail::format_double(samples_[i - 1].time_s) + " -> " +
                        detail::format_double(s.time_s) + ")");
      }
    }
  }

  const std::vector<Sample>& samples() const { return samples_; }
  double nominal_rate_hz() const { return nominal_rate_hz_; }
  double start_time() const { return samples_.front().time_s; }
  double end_time() const { return samples_.back().time_s; }

 private:
  std::vector<Sample> samples_;
  double nominal_rate_hz_;
};

/// Averaging window, relative to the first sample of the trace. Defaults skip
/// the 2 s player start-up and average 7 s of steady playback.
struct WindowSpec {
  double start_s = 2.0;
  double duration_s = 7.0;

  void validate() const {
    if (!(start_s >= 0.0) || !std::isfinite(start_s)) {
      throw Error(ErrorCategory::validation, "window start must be >= 0");
    }
    if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
      throw Error(ErrorCategory::validation, "window duration must be > 0");
    }
  }
};

enum class TraceFormat { power, current_voltage };

inline constexpr std::string_view kPowerTraceHeader = "time_s,power_w";
inline constexpr std::string_view kIvTraceHeader = "time_s,current_a,voltage_v";

/// Parses a trace CSV. The format is chosen from the header line.
inline PowerTrace parse_trace(std::istream& in) {
  detail::LineReader reader(in);
  std::string line;
  if (!reader.next(line)) throw Error(ErrorCategory::validation, "empty trace file");

  std::string_view header = detail::trim(line);
  if (header.starts_with("\xEF\xBB\xBF")) header.remove_prefix(3);
  TraceFormat format;
  if (header == kPowerTraceHeader) {
    format = TraceFormat::power;
  } else if (header == kIvTraceHeader) {
    format = TraceFormat::current_voltage;
  } else {
    throw Error(ErrorCategory::parse, "line 1: unknown trace header '" + std::string(header) + "'");
  }
  const std::size_t columns = format == TraceFormat::power ? 2 : 3;

  std::vector<Sample> samples;
  while (reader.next(line)) {
    if (detail::is_blank(line)) continue;
    auto fields = detail::split_fields(line);
    auto fail = [&](const std::string& msg) {
      return Error(ErrorCategory::parse, "line " + std::to_string(reader.line_no()) + ": " + msg);
    };
    if (fields.size() != columns) {
      throw fail("expected " + std::to_string(columns) + " fields, got " +
                 std::to_string(fields.size()));
    }
    std::vector<double> values;
    for (auto f : fields) {
      auto v = detail::parse_double(f);
      if (!v) throw fail("not a number: '" + std::string(f) + "'");
      values.push_back(*v);
    }
    const double power = format == TraceFormat::power ? values[1] : values[1] * values[2];
    samples.push_back({values[0], power});
  }
  if (samples.empty()) throw Error(ErrorCategory::validation, "trace has no samples");
  return PowerTrace(std::move(samples));
}

inline PowerTrace parse_trace(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_trace(in);
}

/// Writes the canonical power-format CSV. Parsing the output gives back the
/// same samples bit for bit.
inline void write_trace(std::ostream& out, const PowerTrace& trace) {
  out << kPowerTraceHeader << '\n';
  for (const auto& s : trace.samples()) {
    out << detail::format_double(s.time_s) << ',' << detail::format_double(s.power_w) << '\n';
  }
}

namespace detail {

inline double interpolate(const Sample& a, const Sample& b, double t) {
  const double u = (t - a.time_s) / (b.time_s - a.time_s);
  return a.power_w + u * (b.power_w - a.power_w);
}

}  // namespace detail

/// Time-weighted mean power over the window: trapezoidal integral of the
/// piecewise-linear signal divided by the window duration.
inline double mean_power(const PowerTrace& trace, const WindowSpec& window) {
  window.validate();
  const double t0 = trace.start_time() + window.start_s;
  const double t1 = t0 + window.duration_s;
  if (t1 > trace.end_time()) {
    throw Error(ErrorCategory::out_of_range,
                "window [" + detail::format_double(window.start_s) + ", " +
                    detail::format_double(window.start_s + window.duration_s) +
                    "] s exceeds trace span of " +
                    detail::format_double(trace.end_time() - trace.start_time()) + " s");
  }

  const auto& s = trace.samples();
  double integral = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double a = std::max(s[i - 1].time_s, t0);
    const double b = std::min(s[i].time_s, t1);
    if (b <= a) continue;
    const double pa = detail::interpolate(s[i - 1], s[i], a);
    const double pb = detail::interpolate(s[i - 1], s[i], b);
    integral += 0.5 * (pa + pb) * (b - a);
  }
  return integral / window.duration_s;
}

/// Subtracts the idle baseline. A net value below zero means the idle trace or
/// the window is wrong, so it is rejected rather than clamped.
inline double net_power(double gross_w, double idle_w) {
  if (!(gross_w >= 0.0) || !(idle_w >= 0.0)) {
    throw Error(ErrorCategory::validation, "gross and idle power must be >= 0");
  }
  if (gross_w < idle_w) {
    throw Error(ErrorCategory::negative_net,
                "gross power " + detail::format_double(gross_w) + " W is below idle power " +
                    detail::format_double(idle_w) + " W");
  }
  return gross_w - idle_w;
}

}  // namespace vrpower
