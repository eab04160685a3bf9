#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "embedflow/flow.hpp"
#include "embedflow/geometry.hpp"

namespace embedflow {

/// Malformed, inconsistent or out-of-range configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ChartSpec {
  std::vector<std::string> variables;
  std::vector<std::string> coords;  // one expression per ambient coordinate
  ChartDomain domain;
};

struct ShapeSpec {
  std::string builtin;                   // empty for expression charts
  std::map<std::string, double> params;  // builtin parameters
  std::vector<ChartSpec> charts;
};

struct RunConfig {
  ShapeSpec shape;
  std::vector<int> resolution{64};  // intervals per axis; one entry applies to every axis
  DerivativeMode derivative_mode = DerivativeMode::analytic;
  double h = 1e-4;
  FlowConfig flow;  // penalty, certification, verifier and loop settings
  std::string output_dir = "out";
  std::uint64_t seed = 1;
};

/// Throws ConfigError on unknown keys, wrong types or violated constraints.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

/// Range checks: positive tolerances, sigma values in (0, 1], resolutions >= 8,
/// nonnegative penalty weights that are not both zero.
void validate(const RunConfig& cfg);

nlohmann::json to_json(const RunConfig& cfg);

/// Builtin fixture or expression charts. Expression charts get a reference
/// model that keeps different charts apart, matching the rule that declared
/// charts do not overlap.
ChartAtlas build_atlas(const RunConfig& cfg);
SampleGrid build_grid(const ChartAtlas& atlas, const RunConfig& cfg);

}  // namespace embedflow
