#pragma once

// Seeded synthetic measurement sets with known ground truth. They stand in for
// the unpublished measurements when checking fitting, cross-validation,
// pruning and contribution analysis.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vrpower/dataset.hpp"
#include "vrpower/error.hpp"
#include "vrpower/solver.hpp"

namespace vrpower {

/// Linear model over all ten variables, in raw units: W, W/bit/s, W/fps,
/// W/pixel, and W per flag.
struct GroundTruth {
  double intercept_w = 0.0;
  std::array<double, kAllVariables.size()> raw{};

  double& operator[](Variable v) { return raw[static_cast<std::size_t>(v)]; }
  double operator[](Variable v) const { return raw[static_cast<std::size_t>(v)]; }

  double evaluate(const Measurement& m) const {
    double p = intercept_w;
    for (auto v : kAllVariables) p += (*this)[v] * raw_feature(m, v);
    return p;
  }

  /// The ground truth as a model file under the advanced spec.
  PowerModel to_model() const {
    PowerModel model;
    model.spec = ModelSpec::advanced();
    model.scaling = column_scaling(model.spec);
    model.params_scaled.push_back(intercept_w);
    for (std::size_t k = 0; k < kAllVariables.size(); ++k) {
      model.params_scaled.push_back(raw[k] / model.scaling[k + 1]);
    }
    return model;
  }

  /// Offset, resolution, bitrate and 360-degree rendering dominate; frame rate
  /// and the remaining flags are small enough to be pruned at 0.5 pp.
  static GroundTruth default_truth() {
    GroundTruth g;
    g.intercept_w = 0.97;
    g[Variable::bitrate] = 1.2e-8;
    g[Variable::frame_rate] = 3e-4;
    g[Variable::resolution] = 5.0196e-8;
    g[Variable::stereo] = 0.012;
    g[Variable::dynamic] = 0.015;
    g[Variable::spherical] = 0.13;
    g[Variable::stereoscopic_3d] = 0.01;
    g[Variable::gyro] = 0.006;
    g[Variable::accel] = 0.004;
    g[Variable::magn] = 0.005;
    return g;
  }
  /// Only offset, resolution, bitrate and 360 rendering. p_S is set so that
  /// 3840x1920 -> 1920x1080 saves about 0.266 W.
  static GroundTruth sparse() {
    GroundTruth g;
    g.intercept_w = 0.97;
    g[Variable::bitrate] = 4e-9;
    g[Variable::resolution] = 5.0196e-8;
    g[Variable::spherical] = 0.1;
    return g;
  }
};

struct NoiseModel {
  /// Standard deviation of the multiplicative factor (1 + e); 0 disables noise.
  double sigma = 0.0;
};

struct SynthConfig {
  GroundTruth ground_truth = GroundTruth::default_truth();
  std::vector<SequenceMeta> sequence_grid;
  std::vector<PlaybackConfig> config_grid;
  NoiseModel noise;
  std::uint64_t seed = 1;
};

/// The 24 test sequences (name, width, height, fps, projection, 3D). The
/// content factor scales the bits per pixel to spread bitrates per sequence.
struct SequenceTemplate {
  const char* name;
  int width;
  int height;
  int fps;
  Projection projection;
  bool is_3d;
  double content_factor;
};

inline constexpr std::array<SequenceTemplate, 24> kTestSequences = {{
    {"BQSquare", 416, 240, 60, Projection::rectilinear, false, 1.30},
    {"BlowingBubbles", 416, 240, 50, Projection::rectilinear, false, 1.10},
    {"BasketballPass", 416, 240, 50, Projection::rectilinear, false, 0.85},
    {"RaceHorses", 416, 240, 30, Projection::rectilinear, false, 1.45},
    {"BQMall", 832, 480, 60, Projection::rectilinear, false, 0.95},
    {"BasketballDrill", 832, 480, 50, Projection::rectilinear, false, 0.90},
    {"PartyScene", 832, 480, 50, Projection::rectilinear, false, 1.60},
    {"Flowervase", 832, 480, 30, Projection::rectilinear, false, 0.55},
    {"FourPeople", 1280, 720, 60, Projection::rectilinear, false, 0.45},
    {"Johnny", 1280, 720, 60, Projection::rectilinear, false, 0.40},
    {"SlideEditing", 1280, 720, 30, Projection::rectilinear, false, 0.30},
    {"SlideShow", 1280, 720, 20, Projection::rectilinear, false, 0.60},
    {"BQTerrace", 1920, 1080, 60, Projection::rectilinear, false, 1.20},
    {"BasketballDrive", 1920, 1080, 50, Projection::rectilinear, false, 0.80},
    {"Cactus", 1920, 1080, 50, Projection::rectilinear, false, 0.75},
    {"Kimono", 1920, 1080, 24, Projection::rectilinear, false, 0.65},
    {"AerialCity", 3840, 1920, 30, Projection::equirectangular, false, 0.70},
    {"DrivingInCity", 3840, 1920, 30, Projection::equirectangular, false, 0.90},
    {"DrivingInCountry", 3840, 1920, 30, Projection::equirectangular, false, 0.80},
    {"PoleVault", 3840, 1920, 30, Projection::equirectangular, false, 1.15},
    {"Cars02", 3840, 2160, 30, Projection::equirectangular, true, 1.00},
    {"Kitchen2", 3840, 2160, 30, Projection::equirectangular, true, 0.60},
    {"Skatedance", 4096, 2048, 30, Projection::equirectangular, true, 0.85},
    {"Wall6", 3840, 1920, 30, Projection::equirectangular, true, 1.25},
}};

/// crf levels and the nominal bits per pixel each one produces.
inline constexpr std::array<std::pair<int, double>, 4> kCrfLevels = {{
    {18, 0.144},
    {23, 0.072},
    {28, 0.036},
    {33, 0.018},
}};

/// 24 sequences x 4 crf levels, HEVC, bitrate = bpp * content * S * f.
inline std::vector<SequenceMeta> default_sequence_grid() {
  std::vector<SequenceMeta> out;
  for (const auto& t : kTestSequences) {
    for (const auto& [crf, bpp] : kCrfLevels) {
      SequenceMeta s;
      s.name = t.name;
      s.width = t.width;
      s.height = t.height;
      s.frame_rate = t.fps;
      s.bitrate_bps = std::round(bpp * t.content_factor * s.resolution() * t.fps);
      s.codec = Codec::hevc;
      s.crf = crf;
      s.projection = t.projection;
      s.is_3d = t.is_3d;
      out.push_back(std::move(s));
    }
  }
  return out;
}

/// Playback settings I-VIII. Settings III-V leave the sensor choice to the
/// player (all sensor flags zero).
inline std::vector<PlaybackConfig> default_config_grid(const std::string& app = "VaR") {
  //                  st     dyn    360    3D     gyro   accel  magn
  return {
      {app, false, false, false, false, false, false, false},  // I
      {app, true, false, false, false, false, false, false},   // II
      {app, true, true, false, false, false, false, false},    // III
      {app, true, true, true, false, false, false, false},     // IV
      {app, true, true, true, true, false, false, false},      // V
      {app, true, true, true, true, true, false, false},       // VI
      {app, true, true, true, true, false, true, false},       // VII
      {app, true, true, true, true, false, false, true},       // VIII
  };
}

inline SynthConfig default_synth_config(double sigma = 0.0, std::uint64_t seed = 1) {
  SynthConfig cfg;
  cfg.sequence_grid = default_sequence_grid();
  cfg.config_grid = default_config_grid();
  cfg.noise.sigma = sigma;
  cfg.seed = seed;
  return cfg;
}

/// One measurement per (sequence, config) pair, sequences outermost. With
/// noise, power = truth * (1 + e), e ~ N(0, sigma^2), redrawn while <= 0.
inline std::vector<Measurement> generate(const SynthConfig& cfg) {
  if (cfg.sequence_grid.empty() || cfg.config_grid.empty()) {
    throw Error(ErrorCategory::config, "synthetic grids must be non-empty");
  }
  if (!(cfg.noise.sigma >= 0.0) || !std::isfinite(cfg.noise.sigma)) {
    throw Error(ErrorCategory::config, "noise sigma must be finite and >= 0");
  }

  std::vector<Measurement> out;
  out.reserve(cfg.sequence_grid.size() * cfg.config_grid.size());
  for (const auto& s : cfg.sequence_grid) {
    for (const auto& c : cfg.config_grid) {
      Measurement m{s, c, 0.0};
      try {
        m.sequence.validate();
        m.config.validate();
      } catch (const Error& e) {
        throw Error(ErrorCategory::config, e.what());
      }
      m.power_w = cfg.ground_truth.evaluate(m);
      if (!(m.power_w > 0.0) || !std::isfinite(m.power_w)) {
        throw Error(ErrorCategory::config, "ground truth gives non-positive power " +
                                               detail::format_double(m.power_w) + " W for " +
                                               s.name);
      }
      out.push_back(std::move(m));
    }
  }

  if (cfg.noise.sigma > 0.0) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> noise(0.0, cfg.noise.sigma);
    for (auto& m : out) {
      double p;
      do {
        p = m.power_w * (1.0 + noise(rng));
      } while (!(p > 0.0));
      m.power_w = p;
    }
  }
  return out;
}

}  // namespace vrpower
