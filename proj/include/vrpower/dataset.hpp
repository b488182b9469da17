#pragma once

// Measurements, model variable sets, and the design matrix A / observation
// vector P used by the fitting code.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vrpower/detail/text.hpp"
#include "vrpower/error.hpp"

namespace vrpower {

enum class Codec { h264, hevc };
enum class Projection { rectilinear, equirectangular };

inline std::string_view codec_name(Codec c) { return c == Codec::h264 ? "H264" : "HEVC"; }

inline std::optional<Codec> parse_codec(std::string_view s) {
  if (s == "H264") return Codec::h264;
  if (s == "HEVC") return Codec::hevc;
  return std::nullopt;
}

/// One coded video stream. Projection and 3D are informative only; the
/// measurement CSV does not carry them, so they may be unknown.
struct SequenceMeta {
  std::string name;
  std::int64_t width = 0;
  std::int64_t height = 0;
  double frame_rate = 0.0;
  double bitrate_bps = 0.0;
  Codec codec = Codec::hevc;
  std::int64_t crf = 0;
  std::optional<Projection> projection;
  std::optional<bool> is_3d;

  /// Resolution S in pixels.
  double resolution() const { return static_cast<double>(width) * static_cast<double>(height); }

  void validate() const {
    if (name.empty()) throw Error(ErrorCategory::validation, "sequence name is empty");
    if (width <= 0 || height <= 0) {
      throw Error(ErrorCategory::validation, "width and height must be > 0");
    }
    if (!(frame_rate > 0.0) || !std::isfinite(frame_rate)) {
      throw Error(ErrorCategory::validation, "frame rate must be > 0");
    }
    if (!(bitrate_bps > 0.0) || !std::isfinite(bitrate_bps)) {
      throw Error(ErrorCategory::validation, "bitrate must be > 0");
    }
  }
};

/// Playback option flags. All three sensor flags at zero means the player
/// picks the head-tracking sensor itself.
struct PlaybackConfig {
  std::string app;
  bool stereo = false;
  bool dynamic = false;
  bool spherical = false;
  bool stereoscopic_3d = false;
  bool gyro = false;
  bool accel = false;
  bool magn = false;

  void validate() const {
    if (int(gyro) + int(accel) + int(magn) > 1) {
      throw Error(ErrorCategory::validation,
                  "at most one of f_gyro, f_accel, f_magn may be set");
    }
  }
};

struct Measurement {
  SequenceMeta sequence;
  PlaybackConfig config;
  double power_w = 0.0;

  void validate() const {
    sequence.validate();
    config.validate();
    if (!(power_w >= 0.0) || !std::isfinite(power_w)) {
      throw Error(ErrorCategory::validation, "power must be finite and >= 0");
    }
  }
};

// ---------------------------------------------------------------------------
// Model variables

enum class Variable : std::uint8_t {
  bitrate,
  frame_rate,
  resolution,
  stereo,
  dynamic,
  spherical,
  stereoscopic_3d,
  gyro,
  accel,
  magn,
};

inline constexpr std::array<Variable, 10> kAllVariables = {
    Variable::bitrate,   Variable::frame_rate,      Variable::resolution, Variable::stereo,
    Variable::dynamic,   Variable::spherical,       Variable::stereoscopic_3d,
    Variable::gyro,      Variable::accel,           Variable::magn,
};

inline std::string_view variable_tag(Variable v) {
  switch (v) {
    case Variable::bitrate: return "b";
    case Variable::frame_rate: return "f";
    case Variable::resolution: return "S";
    case Variable::stereo: return "F_st";
    case Variable::dynamic: return "F_dyn";
    case Variable::spherical: return "F_360";
    case Variable::stereoscopic_3d: return "F_3D";
    case Variable::gyro: return "F_gyro";
    case Variable::accel: return "F_accel";
    case Variable::magn: return "F_magn";
  }
  return "?";
}

inline std::optional<Variable> parse_variable(std::string_view tag) {
  for (auto v : kAllVariables) {
    if (variable_tag(v) == tag) return v;
  }
  return std::nullopt;
}

/// Raw feature value: pixels, frames/s, bits/s, or 0/1 for flags.
inline double raw_feature(const Measurement& m, Variable v) {
  switch (v) {
    case Variable::bitrate: return m.sequence.bitrate_bps;
    case Variable::frame_rate: return m.sequence.frame_rate;
    case Variable::resolution: return m.sequence.resolution();
    case Variable::stereo: return m.config.stereo ? 1.0 : 0.0;
    case Variable::dynamic: return m.config.dynamic ? 1.0 : 0.0;
    case Variable::spherical: return m.config.spherical ? 1.0 : 0.0;
    case Variable::stereoscopic_3d: return m.config.stereoscopic_3d ? 1.0 : 0.0;
    case Variable::gyro: return m.config.gyro ? 1.0 : 0.0;
    case Variable::accel: return m.config.accel ? 1.0 : 0.0;
    case Variable::magn: return m.config.magn ? 1.0 : 0.0;
  }
  return 0.0;
}

/// Multiplier from raw to fitted units: pixels -> megapixels, bit/s -> Mbit/s.
inline double standard_scale(Variable v) {
  return (v == Variable::resolution || v == Variable::bitrate) ? 1e-6 : 1.0;
}

/// Ordered variable set of a linear model. The intercept is implicit and
/// always present, so K = variables().size() + 1.
class ModelSpec {
 public:
  ModelSpec() = default;

  explicit ModelSpec(std::vector<Variable> variables) : variables_(std::move(variables)) {
    for (std::size_t i = 0; i < variables_.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (variables_[i] == variables_[j]) {
          throw Error(ErrorCategory::validation,
                      "duplicate variable '" + std::string(variable_tag(variables_[i])) + "'");
        }
      }
    }
  }

  /// All ten variables, K = 11.
  static ModelSpec advanced() {
    return ModelSpec(std::vector<Variable>(kAllVariables.begin(), kAllVariables.end()));
  }

  /// Bitrate, resolution and 360-degree rendering, K = 4.
  static ModelSpec simplified() {
    return ModelSpec({Variable::bitrate, Variable::resolution, Variable::spherical});
  }

  /// Accepts "advanced", "simplified", or a comma-separated tag list such as
  /// "b,S,F_360". An empty string gives the intercept-only model.
  static ModelSpec parse(std::string_view text) {
    text = detail::trim(text);
    if (text == "advanced") return advanced();
    if (text == "simplified") return simplified();
    std::vector<Variable> vars;
    if (text.empty()) return ModelSpec{};
    for (auto tag : detail::split_fields(text)) {
      auto v = parse_variable(tag);
      if (!v) {
        throw Error(ErrorCategory::parse, "unknown variable tag '" + std::string(tag) + "'");
      }
      vars.push_back(*v);
    }
    return ModelSpec(std::move(vars));
  }

  const std::vector<Variable>& variables() const { return variables_; }
  std::size_t num_params() const { return variables_.size() + 1; }

  bool contains(Variable v) const {
    return std::find(variables_.begin(), variables_.end(), v) != variables_.end();
  }

  /// Column index of v in the design matrix (intercept is column 0).
  std::optional<std::size_t> column_of(Variable v) const {
    auto it = std::find(variables_.begin(), variables_.end(), v);
    if (it == variables_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - variables_.begin()) + 1;
  }

  ModelSpec without(Variable v) const {
    std::vector<Variable> vars;
    for (auto x : variables_) {
      if (x != v) vars.push_back(x);
    }
    return ModelSpec(std::move(vars));
  }

  /// "p_0" for the intercept, the variable tag otherwise.
  std::string column_name(std::size_t k) const {
    return k == 0 ? std::string("p_0") : std::string(variable_tag(variables_.at(k - 1)));
  }

  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < variables_.size(); ++i) {
      if (i) out += ',';
      out += variable_tag(variables_[i]);
    }
    return out;
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;

 private:
  std::vector<Variable> variables_;
};

enum class ScalingMode { standard, none };

/// Per-column multipliers applied to raw features, intercept first.
inline std::vector<double> column_scaling(const ModelSpec& spec,
                                          ScalingMode mode = ScalingMode::standard) {
  std::vector<double> out{1.0};
  for (auto v : spec.variables()) out.push_back(mode == ScalingMode::standard ? standard_scale(v) : 1.0);
  return out;
}

/// [1, x_1, ..., x_{K-1}] in scaled units, in spec order.
inline Eigen::VectorXd feature_vector(const Measurement& m, const ModelSpec& spec,
                                      ScalingMode mode = ScalingMode::standard) {
  const auto scale = column_scaling(spec, mode);
  Eigen::VectorXd x(static_cast<Eigen::Index>(spec.num_params()));
  x(0) = 1.0;
  for (std::size_t k = 0; k < spec.variables().size(); ++k) {
    x(static_cast<Eigen::Index>(k + 1)) = raw_feature(m, spec.variables()[k]) * scale[k + 1];
  }
  return x;
}

struct DesignMatrix {
  ModelSpec spec;
  Eigen::MatrixXd A;
  Eigen::VectorXd P;
  std::vector<double> scaling;
  std::vector<std::string> row_keys;

  Eigen::Index rows() const { return A.rows(); }
  Eigen::Index cols() const { return A.cols(); }
};

inline DesignMatrix build_design(const std::vector<Measurement>& measurements, const ModelSpec& spec,
                                 ScalingMode mode = ScalingMode::standard) {
  if (measurements.empty()) {
    throw Error(ErrorCategory::validation, "cannot build a design matrix from zero measurements");
  }
  const auto n = static_cast<Eigen::Index>(measurements.size());
  const auto k = static_cast<Eigen::Index>(spec.num_params());
  DesignMatrix d{spec, Eigen::MatrixXd(n, k), Eigen::VectorXd(n), column_scaling(spec, mode), {}};
  d.row_keys.reserve(measurements.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& m = measurements[static_cast<std::size_t>(j)];
    d.A.row(j) = feature_vector(m, spec, mode).transpose();
    d.P(j) = m.power_w;
    d.row_keys.push_back(m.sequence.name);
  }
  if (!d.A.allFinite() || !d.P.allFinite()) {
    throw Error(ErrorCategory::validation, "design matrix has non-finite entries");
  }
  return d;
}

// ---------------------------------------------------------------------------
// Measurement CSV

inline constexpr std::string_view kMeasurementHeader =
    "sequence,width,height,fps,bitrate_bps,codec,crf,app,f_st,f_dyn,f_360,f_3d,f_gyro,f_accel,"
    "f_magn,power_w";

namespace detail {

/// Parses the 15 leading measurement fields (everything except power_w).
/// Shared with the ingest session format, which has the same columns.
inline Measurement parse_measurement_fields(const std::vector<std::string_view>& f,
                                            const std::string& where) {
  auto fail = [&](const std::string& msg) {
    return Error(ErrorCategory::validation, where + ": " + msg);
  };
  auto as_int = [&](std::string_view s, const char* col) {
    auto v = parse_int(s);
    if (!v) throw fail(std::string(col) + " is not an integer: '" + std::string(s) + "'");
    return *v;
  };
  auto as_double = [&](std::string_view s, const char* col) {
    auto v = parse_double(s);
    if (!v) throw fail(std::string(col) + " is not a number: '" + std::string(s) + "'");
    return *v;
  };
  auto as_flag = [&](std::string_view s, const char* col) {
    if (s == "0") return false;
    if (s == "1") return true;
    throw fail(std::string(col) + " must be 0 or 1, got '" + std::string(s) + "'");
  };

  Measurement m;
  m.sequence.name = std::string(f[0]);
  m.sequence.width = as_int(f[1], "width");
  m.sequence.height = as_int(f[2], "height");
  m.sequence.frame_rate = as_double(f[3], "fps");
  m.sequence.bitrate_bps = as_double(f[4], "bitrate_bps");
  auto codec = parse_codec(f[5]);
  if (!codec) throw fail("unknown codec '" + std::string(f[5]) + "'");
  m.sequence.codec = *codec;
  m.sequence.crf = as_int(f[6], "crf");
  m.config.app = std::string(f[7]);
  m.config.stereo = as_flag(f[8], "f_st");
  m.config.dynamic = as_flag(f[9], "f_dyn");
  m.config.spherical = as_flag(f[10], "f_360");
  m.config.stereoscopic_3d = as_flag(f[11], "f_3d");
  m.config.gyro = as_flag(f[12], "f_gyro");
  m.config.accel = as_flag(f[13], "f_accel");
  m.config.magn = as_flag(f[14], "f_magn");
  try {
    m.sequence.validate();
    m.config.validate();
  } catch (const Error& e) {
    throw fail(e.what());
  }
  return m;
}

inline void write_measurement_fields(std::ostream& out, const Measurement& m) {
  const auto& s = m.sequence;
  const auto& c = m.config;
  out << s.name << ',' << s.width << ',' << s.height << ',' << format_double(s.frame_rate) << ','
      << format_double(s.bitrate_bps) << ',' << codec_name(s.codec) << ',' << s.crf << ','
      << c.app << ',' << int(c.stereo) << ',' << int(c.dynamic) << ',' << int(c.spherical) << ','
      << int(c.stereoscopic_3d) << ',' << int(c.gyro) << ',' << int(c.accel) << ','
      << int(c.magn);
}

}  // namespace detail

inline std::vector<Measurement> load_measurements(std::istream& in) {
  detail::LineReader reader(in);
  std::string line;
  if (!reader.next(line)) throw Error(ErrorCategory::parse, "measurement file is empty");
  std::string_view header = detail::trim(line);
  if (header.starts_with("\xEF\xBB\xBF")) header.remove_prefix(3);
  if (header != kMeasurementHeader) {
    throw Error(ErrorCategory::parse, "line 1: unexpected measurement header '" + std::string(header) + "'");
  }

  std::vector<Measurement> out;
  std::size_t row = 0;
  while (reader.next(line)) {
    if (detail::is_blank(line)) continue;
    ++row;
    const std::string where =
        "row " + std::to_string(row) + " (line " + std::to_string(reader.line_no()) + ")";
    auto fields = detail::split_fields(line);
    if (fields.size() != 16) {
      throw Error(ErrorCategory::parse,
                  where + ": expected 16 fields, got " + std::to_string(fields.size()));
    }
    Measurement m = detail::parse_measurement_fields(fields, where);
    auto power = detail::parse_double(fields[15]);
    if (!power) throw Error(ErrorCategory::parse, where + ": power_w is not a number");
    m.power_w = *power;
    if (!(m.power_w >= 0.0) || !std::isfinite(m.power_w)) {
      throw Error(ErrorCategory::validation, where + ": power_w must be finite and >= 0");
    }
    out.push_back(std::move(m));
  }
  return out;
}

inline std::vector<Measurement> load_measurements(std::string_view text) {
  std::istringstream in{std::string(text)};
  return load_measurements(in);
}

inline void write_measurements(std::ostream& out, const std::vector<Measurement>& ms) {
  out << kMeasurementHeader << '\n';
  for (const auto& m : ms) {
    detail::write_measurement_fields(out, m);
    out << ',' << detail::format_double(m.power_w) << '\n';
  }
}

}  // namespace vrpower
