#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vrpower {

/// Error categories. The CLI prints them as `error[<name>]:` so scripts can
/// match on the prefix.
enum class ErrorCategory {
  parse,
  validation,
  out_of_range,
  negative_net,
  singular_design,
  underdetermined,
  fold,
  division_by_zero,
  unsupported_query,
  schema_version,
  config,
  convergence,
  io,
};

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::validation: return "validation";
    case ErrorCategory::out_of_range: return "out-of-range";
    case ErrorCategory::negative_net: return "negative-net";
    case ErrorCategory::singular_design: return "singular-design";
    case ErrorCategory::underdetermined: return "underdetermined";
    case ErrorCategory::fold: return "fold";
    case ErrorCategory::division_by_zero: return "division-by-zero";
    case ErrorCategory::unsupported_query: return "unsupported-query";
    case ErrorCategory::schema_version: return "schema-version";
    case ErrorCategory::config: return "config";
    case ErrorCategory::convergence: return "convergence";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace vrpower
