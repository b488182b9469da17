#pragma once

// Session files tie trace files to sequence/config metadata. Ingesting one
// reduces every trace to its net mean power and yields measurement rows.
//
// Header: trace,sequence,width,height,fps,bitrate_bps,codec,crf,app,f_st,
//         f_dyn,f_360,f_3d,f_gyro,f_accel,f_magn
// Relative trace paths are resolved against the session file's directory.

#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "vrpower/dataset.hpp"
#include "vrpower/error.hpp"
#include "vrpower/trace.hpp"

namespace vrpower {

inline constexpr std::string_view kSessionHeader =
    "trace,sequence,width,height,fps,bitrate_bps,codec,crf,app,f_st,f_dyn,f_360,f_3d,f_gyro,"
    "f_accel,f_magn";

/// Idle baseline: a scalar wins over an idle trace when both are set.
struct IdleSource {
  std::optional<double> scalar_w;
  std::optional<std::filesystem::path> trace;
};

inline PowerTrace load_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, path.string() + ": cannot open trace file");
  try {
    return parse_trace(in);
  } catch (const Error& e) {
    throw Error(e.category(), path.string() + ": " + e.what());
  }
}

inline double window_mean_of(const std::filesystem::path& path, const WindowSpec& window) {
  const auto trace = load_trace_file(path);
  try {
    return mean_power(trace, window);
  } catch (const Error& e) {
    throw Error(e.category(), path.string() + ": " + e.what());
  }
}

inline double resolve_idle(const IdleSource& idle, const WindowSpec& window) {
  if (idle.scalar_w) {
    if (!(*idle.scalar_w >= 0.0)) throw Error(ErrorCategory::validation, "idle power must be >= 0");
    return *idle.scalar_w;
  }
  if (idle.trace) return window_mean_of(*idle.trace, window);
  throw Error(ErrorCategory::validation, "no idle power given (scalar or idle trace required)");
}

inline std::vector<Measurement> ingest_sessions(std::istream& sessions,
                                                const std::filesystem::path& base_dir,
                                                const IdleSource& idle, const WindowSpec& window) {
  window.validate();
  const double idle_w = resolve_idle(idle, window);

  detail::LineReader reader(sessions);
  std::string line;
  if (!reader.next(line)) throw Error(ErrorCategory::parse, "session file is empty");
  std::string_view header = detail::trim(line);
  if (header.starts_with("\xEF\xBB\xBF")) header.remove_prefix(3);
  if (header != kSessionHeader) {
    throw Error(ErrorCategory::parse, "line 1: unexpected session header '" + std::string(header) + "'");
  }

  std::vector<Measurement> out;
  std::size_t row = 0;
  while (reader.next(line)) {
    if (detail::is_blank(line)) continue;
    ++row;
    const std::string where =
        "session row " + std::to_string(row) + " (line " + std::to_string(reader.line_no()) + ")";
    auto fields = detail::split_fields(line);
    if (fields.size() != 16) {
      throw Error(ErrorCategory::parse,
                  where + ": expected 16 fields, got " + std::to_string(fields.size()));
    }
    std::filesystem::path trace_path{std::string(fields[0])};
    if (trace_path.is_relative()) trace_path = base_dir / trace_path;
    std::vector<std::string_view> meta(fields.begin() + 1, fields.end());
    Measurement m = detail::parse_measurement_fields(meta, where);
    const double gross = window_mean_of(trace_path, window);
    try {
      m.power_w = net_power(gross, idle_w);
    } catch (const Error& e) {
      throw Error(e.category(), trace_path.string() + ": " + e.what());
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace vrpower
