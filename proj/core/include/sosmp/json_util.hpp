#pragma once

#include <initializer_list>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>

namespace sosmp {

/// Configuration / input-file problems; the CLI maps these to exit code 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numeric failures (infeasible training, solver breakdowns); exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Rejects unknown keys in a config object.
void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const std::string& context);

nlohmann::json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const nlohmann::json& j);

/// Round-trip-safe decimal formatting ("%.17g").
std::string format_double(double v);

}  // namespace sosmp
