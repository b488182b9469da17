// vrpower: fit, validate, prune and query linear VR playback power models.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vrpower/vrpower.hpp"

namespace fs = std::filesystem;
using namespace vrpower;

namespace {

constexpr const char* kToolVersion = "1.0.0";

struct GlobalFlags {
  double window_start = 2.0;
  double window_dur = 7.0;
  std::string bounds = "none";
  double threshold = 0.5;
  unsigned jobs = 0;
  std::uint64_t seed = 1;
};

/// Collects what went into a run; written next to each output file.
class RunManifest {
 public:
  explicit RunManifest(std::string command) : command_(std::move(command)) {}

  void param(const std::string& key, const std::string& value) { params_[key] = value; }

  void input(const fs::path& path) { inputs_.push_back(path); }

  void write_next_to(const fs::path& output) const {
    nlohmann::ordered_json j;
    j["command"] = command_;
    j["tool_version"] = kToolVersion;
    auto inputs = nlohmann::ordered_json::array();
    for (const auto& p : inputs_) {
      inputs.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
    }
    j["inputs"] = inputs;
    j["parameters"] = params_;
    j["output"] = {{"path", output.string()}, {"sha256", sha256_file(output)}};
    j["created_utc"] = utc_now();
    std::ofstream out(output.string() + ".manifest.json", std::ios::binary);
    out << j.dump(2) << '\n';
  }

  static std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCategory::io, path.string() + ": cannot read for hashing");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string data = buf.str();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    std::ostringstream hex;
    for (unsigned i = 0; i < len; ++i) {
      hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    }
    return hex.str();
  }

 private:
  static std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  std::string command_;
  std::map<std::string, std::string> params_;
  std::vector<fs::path> inputs_;
};

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, path.string() + ": cannot open");
  return in;
}

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, path.string() + ": cannot open for writing");
  writer(out);
  if (!out) throw Error(ErrorCategory::io, path.string() + ": write failed");
}

std::vector<Measurement> read_measurements(const fs::path& path) {
  auto in = open_input(path);
  try {
    return load_measurements(in);
  } catch (const Error& e) {
    throw Error(e.category(), path.string() + ": " + e.what());
  }
}

PowerModel read_model(const fs::path& path) {
  auto in = open_input(path);
  try {
    return load_model(in);
  } catch (const Error& e) {
    throw Error(e.category(), path.string() + ": " + e.what());
  }
}

/// "advanced", "simplified", a tag list, or a spec JSON file written by prune.
ModelSpec resolve_spec(const std::string& text) {
  if (text.ends_with(".json")) {
    auto in = open_input(text);
    return load_spec(in);
  }
  return ModelSpec::parse(text);
}

BoundsMode parse_bounds(const std::string& s) {
  if (s == "none") return BoundsMode::none;
  if (s == "nonneg") return BoundsMode::nonneg;
  throw Error(ErrorCategory::validation, "--bounds must be 'none' or 'nonneg'");
}

std::optional<Bounds> bounds_for(BoundsMode mode, const ModelSpec& spec) {
  if (mode == BoundsMode::nonneg) return Bounds::nonneg(spec.num_params());
  return std::nullopt;
}

Resolution parse_resolution(const std::string& s) {
  const auto x = s.find_first_of("xX");
  if (x == std::string::npos) {
    throw Error(ErrorCategory::validation, "resolution must look like WIDTHxHEIGHT, got '" + s + "'");
  }
  auto w = detail::parse_int(std::string_view(s).substr(0, x));
  auto h = detail::parse_int(std::string_view(s).substr(x + 1));
  if (!w || !h || *w <= 0 || *h <= 0) {
    throw Error(ErrorCategory::validation, "invalid resolution '" + s + "'");
  }
  return {*w, *h};
}

std::string num(double v) { return detail::format_double(v); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fit, cross-validate, prune and query linear power models for VR video playback"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--window-start", g.window_start, "Averaging window start after trace begin [s]")
      ->capture_default_str();
  app.add_option("--window-dur", g.window_dur, "Averaging window duration [s]")->capture_default_str();
  app.add_option("--bounds", g.bounds, "Parameter bounds: none | nonneg")
      ->check(CLI::IsMember({"none", "nonneg"}))
      ->capture_default_str();
  app.add_option("--threshold", g.threshold, "Pruning threshold (percentage points by default)")
      ->capture_default_str();
  app.add_option("--jobs", g.jobs, "Cross-validation worker threads (0 = all cores)")
      ->capture_default_str();
  app.add_option("--seed", g.seed, "Random seed for synth")->capture_default_str();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Reduce power traces to a measurement CSV");
  std::string sessions_path, idle_trace, ingest_out;
  std::optional<double> idle_w;
  ingest->add_option("--sessions", sessions_path, "Session CSV (trace file + metadata)")->required();
  ingest->add_option("--idle", idle_w, "Idle power [W]; wins over --idle-trace");
  ingest->add_option("--idle-trace", idle_trace, "Idle-mode trace file");
  ingest->add_option("-o,--out", ingest_out, "Measurement CSV to write")->required();

  // fit
  auto* fitc = app.add_subcommand("fit", "Fit a model by least squares");
  std::string data_path, spec_text = "advanced", model_out;
  fitc->add_option("--data", data_path, "Measurement CSV")->required();
  fitc->add_option("--spec", spec_text, "advanced | simplified | tag list | spec.json")
      ->capture_default_str();
  fitc->add_option("-o,--out", model_out, "Model JSON to write")->required();

  // cv
  auto* cv = app.add_subcommand("cv", "Leave-one-sequence-out cross-validation");
  std::string cv_out, folds_out;
  cv->add_option("--data", data_path, "Measurement CSV")->required();
  cv->add_option("--spec", spec_text, "advanced | simplified | tag list | spec.json")
      ->capture_default_str();
  cv->add_option("-o,--out", cv_out, "Per-measurement report CSV")->required();
  cv->add_option("--folds-out", folds_out, "Per-fold parameter CSV");

  // prune
  auto* prune = app.add_subcommand("prune", "Drop variables that barely affect validation error");
  std::string prune_out, audit_out, mode = "one-at-a-time", kind = "absolute";
  prune->add_option("--data", data_path, "Measurement CSV")->required();
  prune->add_option("--spec", spec_text, "Baseline variable set")->capture_default_str();
  prune->add_option("--mode", mode, "one-at-a-time | sequential")
      ->check(CLI::IsMember({"one-at-a-time", "sequential"}))
      ->capture_default_str();
  prune->add_option("--threshold-kind", kind,
                    "absolute (percentage points) | relative (percent of baseline error)")
      ->check(CLI::IsMember({"absolute", "relative"}))
      ->capture_default_str();
  prune->add_option("-o,--out", prune_out, "Retained spec JSON")->required();
  prune->add_option("--audit", audit_out, "Per-variable audit CSV");

  // predict
  auto* predictc = app.add_subcommand("predict", "Predict power for measurement rows");
  std::string model_path, predict_out;
  predictc->add_option("--model", model_path, "Model JSON")->required();
  predictc->add_option("--data", data_path, "Measurement CSV")->required();
  predictc->add_option("-o,--out", predict_out, "Prediction CSV (stdout if omitted)");

  // contrib
  auto* contrib = app.add_subcommand("contrib", "Maximum per-term contributions");
  std::string contrib_out, breakdown_out;
  contrib->add_option("--model", model_path, "Model JSON")->required();
  contrib->add_option("--data", data_path, "Measurement CSV")->required();
  contrib->add_option("-o,--out", contrib_out, "Contribution CSV");
  contrib->add_option("--breakdown-out", breakdown_out, "Per-measurement term breakdown CSV");

  // savings
  auto* savings = app.add_subcommand("savings", "Power saved by a resolution change");
  std::string from_s, to_s, savings_out, ref_data;
  std::optional<double> ref_power;
  std::size_t ref_index = 0;
  savings->add_option("--model", model_path, "Model JSON")->required();
  savings->add_option("--from", from_s, "Current resolution WxH")->required();
  savings->add_option("--to", to_s, "Target resolution WxH")->required();
  savings->add_option("--reference-power", ref_power, "Total power the saving is relative to [W]");
  savings->add_option("--reference-data", ref_data,
                      "Measurement CSV; the model's prediction for one row is the reference");
  savings->add_option("--reference-index", ref_index, "Row of --reference-data")->capture_default_str();
  savings->add_option("-o,--out", savings_out, "Savings CSV");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic measurement set");
  std::string synth_out, truth_out, preset = "default";
  double sigma = 0.0;
  synth->add_option("-o,--out", synth_out, "Measurement CSV to write")->required();
  synth->add_option("--truth-out", truth_out, "Ground-truth model JSON");
  synth->add_option("--sigma", sigma, "Multiplicative noise standard deviation")->capture_default_str();
  synth->add_option("--preset", preset, "Ground truth: default | sparse")
      ->check(CLI::IsMember({"default", "sparse"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error[usage]: " << e.what() << '\n';
    return 2;
  }

  try {
    const WindowSpec window{g.window_start, g.window_dur};
    const BoundsMode bounds = parse_bounds(g.bounds);
    CrossValidationOptions cv_opts;
    cv_opts.bounds = bounds;
    cv_opts.jobs = g.jobs;

    if (*ingest) {
      RunManifest manifest("ingest");
      manifest.param("window_start", num(g.window_start));
      manifest.param("window_dur", num(g.window_dur));
      IdleSource idle;
      idle.scalar_w = idle_w;
      if (!idle_trace.empty()) {
        idle.trace = idle_trace;
        manifest.input(idle_trace);
      }
      if (idle_w) manifest.param("idle_w", num(*idle_w));
      auto in = open_input(sessions_path);
      manifest.input(sessions_path);
      auto ms = ingest_sessions(in, fs::path(sessions_path).parent_path(), idle, window);
      write_file(ingest_out, [&](std::ostream& o) { write_measurements(o, ms); });
      manifest.write_next_to(ingest_out);
      std::cout << "wrote " << ms.size() << " measurement(s) to " << ingest_out << '\n';
    } else if (*fitc) {
      const auto spec = resolve_spec(spec_text);
      const auto ms = read_measurements(data_path);
      const auto model = fit(build_design(ms, spec), bounds_for(bounds, spec));
      write_file(model_out, [&](std::ostream& o) { save_model(o, model); });
      RunManifest manifest("fit");
      manifest.input(data_path);
      manifest.param("spec", spec.to_string());
      manifest.param("bounds", g.bounds);
      manifest.write_next_to(model_out);
      print_model_table(std::cout, model);
    } else if (*cv) {
      const auto spec = resolve_spec(spec_text);
      const auto ms = read_measurements(data_path);
      const auto report = cross_validate(ms, spec, cv_opts);
      write_file(cv_out, [&](std::ostream& o) { write_evaluation_csv(o, report); });
      RunManifest manifest("cv");
      manifest.input(data_path);
      manifest.param("spec", spec.to_string());
      manifest.param("bounds", g.bounds);
      manifest.write_next_to(cv_out);
      if (!folds_out.empty()) {
        write_file(folds_out, [&](std::ostream& o) { write_folds_csv(o, report); });
        manifest.write_next_to(folds_out);
      }
      print_evaluation_summary(std::cout, report);
    } else if (*prune) {
      const auto spec = resolve_spec(spec_text);
      const auto ms = read_measurements(data_path);
      PruneOptions opts;
      opts.threshold = g.threshold;
      opts.kind = kind == "relative" ? ThresholdKind::relative_pct : ThresholdKind::absolute_pp;
      opts.mode = mode == "sequential" ? PruneMode::sequential : PruneMode::one_at_a_time;
      opts.cv = cv_opts;
      const auto result = prune_variables(ms, spec, opts);
      write_file(prune_out, [&](std::ostream& o) { save_spec(o, result.spec); });
      RunManifest manifest("prune");
      manifest.input(data_path);
      manifest.param("spec", spec.to_string());
      manifest.param("bounds", g.bounds);
      manifest.param("threshold", num(g.threshold));
      manifest.param("threshold_kind", kind);
      manifest.param("mode", mode);
      manifest.write_next_to(prune_out);
      if (!audit_out.empty()) {
        write_file(audit_out, [&](std::ostream& o) { write_prune_audit_csv(o, result); });
        manifest.write_next_to(audit_out);
      }
      print_prune_table(std::cout, result);
    } else if (*predictc) {
      const auto model = read_model(model_path);
      const auto ms = read_measurements(data_path);
      std::size_t negative = 0;
      for (const auto& m : ms) negative += predict(model, m) < 0.0;
      if (predict_out.empty()) {
        write_predictions_csv(std::cout, model, ms);
      } else {
        write_file(predict_out, [&](std::ostream& o) { write_predictions_csv(o, model, ms); });
        RunManifest manifest("predict");
        manifest.input(model_path);
        manifest.input(data_path);
        manifest.write_next_to(predict_out);
      }
      if (negative) {
        std::cerr << "warning: " << negative
                  << " prediction(s) are negative (extrapolation outside the fitted range)\n";
      }
    } else if (*contrib) {
      const auto model = read_model(model_path);
      const auto ms = read_measurements(data_path);
      const auto report = contributions(model, ms);
      RunManifest manifest("contrib");
      manifest.input(model_path);
      manifest.input(data_path);
      if (!contrib_out.empty()) {
        write_file(contrib_out, [&](std::ostream& o) { write_contributions_csv(o, report); });
        manifest.write_next_to(contrib_out);
      }
      if (!breakdown_out.empty()) {
        write_file(breakdown_out, [&](std::ostream& o) { write_breakdown_csv(o, model, ms); });
        manifest.write_next_to(breakdown_out);
      }
      print_contributions_table(std::cout, report);
    } else if (*savings) {
      const auto model = read_model(model_path);
      const auto from = parse_resolution(from_s);
      const auto to = parse_resolution(to_s);
      SavingsEstimate est;
      RunManifest manifest("savings");
      manifest.input(model_path);
      manifest.param("from", from_s);
      manifest.param("to", to_s);
      if (ref_power) {
        est = estimate_savings(model, from, to, *ref_power);
        manifest.param("reference_power", num(*ref_power));
      } else if (!ref_data.empty()) {
        const auto ms = read_measurements(ref_data);
        if (ref_index >= ms.size()) {
          throw Error(ErrorCategory::validation, "--reference-index " + std::to_string(ref_index) +
                                                     " out of range (" + std::to_string(ms.size()) +
                                                     " rows)");
        }
        est = estimate_savings(model, from, to, ms[ref_index]);
        manifest.input(ref_data);
        manifest.param("reference_index", std::to_string(ref_index));
      } else {
        est = estimate_savings(model, from, to);
      }
      std::cout << "delta_p: " << detail::fixed(est.delta_p_w, 4) << " W\n";
      if (est.relative_saving) {
        std::cout << "reference: " << detail::fixed(*est.reference_power_w, 4) << " W\n";
        std::cout << "relative saving: " << detail::fixed(*est.relative_saving * 100.0, 2) << " %\n";
      }
      if (!savings_out.empty()) {
        write_file(savings_out, [&](std::ostream& o) { write_savings_csv(o, est); });
        manifest.write_next_to(savings_out);
      }
    } else if (*synth) {
      auto cfg = default_synth_config(sigma, g.seed);
      if (preset == "sparse") cfg.ground_truth = GroundTruth::sparse();
      const auto ms = generate(cfg);
      write_file(synth_out, [&](std::ostream& o) { write_measurements(o, ms); });
      RunManifest manifest("synth");
      manifest.param("seed", std::to_string(g.seed));
      manifest.param("sigma", num(sigma));
      manifest.param("preset", preset);
      manifest.write_next_to(synth_out);
      if (!truth_out.empty()) {
        write_file(truth_out, [&](std::ostream& o) { save_model(o, cfg.ground_truth.to_model()); });
        manifest.write_next_to(truth_out);
      }
      std::cout << "wrote " << ms.size() << " measurement(s) to " << synth_out << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error[" << category_name(e.category()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
