#pragma once

// JSON persistence for fitted models and variable sets.
//
// Model file, schema_version 1:
//   { "schema_version": 1, "variables": ["b", "S", "F_360"],
//     "params_scaled": [...], "params_raw_units": [...], "scaling": [...],
//     "diagnostics": {"rss_w2": ..., "n_train": ...}, "bounds_mode": "none" }
// params_scaled is authoritative on load; the raw-unit copy is for readers.

#include <nlohmann/json.hpp>

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "vrpower/dataset.hpp"
#include "vrpower/error.hpp"
#include "vrpower/solver.hpp"

namespace vrpower {

inline constexpr int kModelSchemaVersion = 1;

namespace detail {

inline nlohmann::json spec_to_json(const ModelSpec& spec) {
  auto vars = nlohmann::json::array();
  for (auto v : spec.variables()) vars.push_back(std::string(variable_tag(v)));
  return vars;
}

inline ModelSpec spec_from_json(const nlohmann::json& vars) {
  if (!vars.is_array()) throw Error(ErrorCategory::parse, "'variables' must be an array");
  std::vector<Variable> out;
  std::string unknown;
  for (const auto& tag : vars) {
    if (!tag.is_string()) throw Error(ErrorCategory::parse, "variable tags must be strings");
    auto v = parse_variable(tag.get<std::string>());
    if (!v) {
      if (!unknown.empty()) unknown += ", ";
      unknown += tag.get<std::string>();
      continue;
    }
    out.push_back(*v);
  }
  if (!unknown.empty()) throw Error(ErrorCategory::parse, "unknown variable tag(s): " + unknown);
  try {
    return ModelSpec(std::move(out));
  } catch (const Error& e) {
    throw Error(ErrorCategory::parse, e.what());
  }
}

inline const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCategory::parse, std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

inline std::vector<double> number_array(const nlohmann::json& j, const char* key) {
  const auto& a = require(j, key);
  if (!a.is_array()) throw Error(ErrorCategory::parse, std::string("'") + key + "' must be an array");
  std::vector<double> out;
  for (const auto& x : a) {
    if (!x.is_number()) throw Error(ErrorCategory::parse, std::string("'") + key + "' must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline nlohmann::json parse_json(std::istream& in) {
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCategory::parse, std::string("malformed JSON: ") + e.what());
  }
}

inline void check_schema(const nlohmann::json& j) {
  const auto& version = require(j, "schema_version");
  if (!version.is_number_integer() || version.get<int>() != kModelSchemaVersion) {
    throw Error(ErrorCategory::schema_version,
                "unsupported schema_version " + version.dump() + " (expected " +
                    std::to_string(kModelSchemaVersion) + ")");
  }
}

}  // namespace detail

inline void save_model(std::ostream& out, const PowerModel& model) {
  nlohmann::ordered_json j;
  j["schema_version"] = kModelSchemaVersion;
  j["variables"] = detail::spec_to_json(model.spec);
  j["params_scaled"] = model.params_scaled;
  j["params_raw_units"] = model.params_raw();
  j["scaling"] = model.scaling;
  j["diagnostics"] = {{"rss_w2", model.diagnostics.rss_w2}, {"n_train", model.diagnostics.n_train}};
  j["bounds_mode"] = std::string(bounds_mode_name(model.bounds_mode));
  out << j.dump(2) << '\n';
}

inline std::string save_model(const PowerModel& model) {
  std::ostringstream out;
  save_model(out, model);
  return out.str();
}

inline PowerModel load_model(std::istream& in) {
  const auto j = detail::parse_json(in);
  detail::check_schema(j);

  PowerModel m;
  m.spec = detail::spec_from_json(detail::require(j, "variables"));
  m.params_scaled = detail::number_array(j, "params_scaled");
  m.scaling = detail::number_array(j, "scaling");
  const auto raw = detail::number_array(j, "params_raw_units");

  const auto& diag = detail::require(j, "diagnostics");
  const auto& rss = detail::require(diag, "rss_w2");
  const auto& n = detail::require(diag, "n_train");
  if (!rss.is_number() || !n.is_number_unsigned()) {
    throw Error(ErrorCategory::parse, "diagnostics must hold rss_w2 (number) and n_train (count)");
  }
  m.diagnostics.rss_w2 = rss.get<double>();
  m.diagnostics.n_train = n.get<std::size_t>();

  const auto& mode = detail::require(j, "bounds_mode");
  const std::string mode_s = mode.is_string() ? mode.get<std::string>() : "";
  if (mode_s == "none") {
    m.bounds_mode = BoundsMode::none;
  } else if (mode_s == "nonneg") {
    m.bounds_mode = BoundsMode::nonneg;
  } else if (mode_s == "box") {
    m.bounds_mode = BoundsMode::box;
  } else {
    throw Error(ErrorCategory::parse, "unknown bounds_mode " + mode.dump());
  }

  const auto k = m.spec.num_params();
  if (m.params_scaled.size() != k || m.scaling.size() != k || raw.size() != k) {
    throw Error(ErrorCategory::parse,
                std::to_string(m.spec.variables().size()) + " variables declared (K=" +
                    std::to_string(k) + ") but params_scaled/scaling/params_raw_units have " +
                    std::to_string(m.params_scaled.size()) + "/" + std::to_string(m.scaling.size()) +
                    "/" + std::to_string(raw.size()) + " entries");
  }
  try {
    m.validate();
  } catch (const Error& e) {
    throw Error(ErrorCategory::parse, e.what());
  }
  return m;
}

inline PowerModel load_model(std::string_view text) {
  std::istringstream in{std::string(text)};
  return load_model(in);
}

/// Variable-set file written by pruning: {"schema_version": 1, "variables": [...]}.
inline void save_spec(std::ostream& out, const ModelSpec& spec) {
  nlohmann::ordered_json j;
  j["schema_version"] = kModelSchemaVersion;
  j["variables"] = detail::spec_to_json(spec);
  out << j.dump(2) << '\n';
}

inline ModelSpec load_spec(std::istream& in) {
  const auto j = detail::parse_json(in);
  detail::check_schema(j);
  return detail::spec_from_json(detail::require(j, "variables"));
}

}  // namespace vrpower
