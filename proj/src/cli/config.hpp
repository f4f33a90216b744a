#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "assoc/distfactory.hpp"
#include "assoc/estimator.hpp"

namespace assoc::cli {

using nlohmann::json;

struct RunConfig {
  std::string command;
  json doc = json::object();  // the config file, TOML or JSON
  std::optional<std::string> data_path;
  std::optional<std::string> out_path;
  std::uint64_t seed = 1;
  FitOptions solver;
  double level = 0.95;
  std::optional<int> replicates;
  bool timestamp = true;
};

// Reads a config file: JSON when it starts with '{', the TOML subset otherwise.
json load_config_file(const std::string& path);

// Applies the file's [solver], [inference], [output] and [data] sections;
// flag overrides are applied afterwards by the caller.
void apply_file_settings(RunConfig& cfg);

// Typed lookups with ConfigError on a type mismatch.
const json* find(const json& doc, const std::string& section, const std::string& key);
double get_number(const json& doc, const std::string& section, const std::string& key, double fallback);
std::string get_string(const json& doc, const std::string& section, const std::string& key,
                       const std::string& fallback);
Vector to_vector(const json& j, const std::string& what);
Matrix to_matrix(const json& j, const std::string& what);  // array of rows
// Array of points -> dim x count matrix.
Matrix to_support(const json& j, const std::string& what);

// [model] kind = log_bilinear | glm_canonical | multinomial_logit | restricted.
AssociationModel build_model(const json& doc, Index dim_x, Index dim_y, Index levels);

// A joint from the given section: path = "joint.csv", probs = [[...]], or
// pi_x / pi_y with psi = [[...]] or theta = [...] (solved by IPF).
FiniteJoint build_joint(const json& doc, const std::string& section);

}  // namespace assoc::cli
