#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "embedflow/certify.hpp"
#include "embedflow/flow.hpp"
#include "embedflow/geometry.hpp"
#include "embedflow/verify.hpp"

namespace embedflow::io {

/// A state file that is missing, empty, malformed or does not match the grid.
class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values become null.
nlohmann::json number(double x);

nlohmann::json to_json(const NodeRef& n);
nlohmann::json to_json(const CertificationReport& r);
nlohmann::json to_json(const VerifierReport& r);
nlohmann::json to_json(const ReachEstimate& r);
nlohmann::json to_json(const FocalEstimate& r);
nlohmann::json to_json(const UniqueNearestResult& r);

/// Indented JSON with a trailing newline.
void write_json(const std::string& path, const nlohmann::json& j);

/// name,value rows for the scalar constants of a certificate.
void write_constants_csv(const std::string& path, const CertificationReport& r);

/// One row per lattice node: chart id, parameters, ambient coordinates, all
/// printed with 17 significant digits so values survive a round trip.
void write_state_csv(const std::string& path, const ChartAtlas& atlas, const SampleGrid& grid);

/// Reads a state written by write_state_csv. Rows are matched to nodes of
/// `grid` by parameter value; every node must appear exactly once. The
/// result is a sampled atlas that keeps the model of `like`.
ChartAtlas read_state_csv(const std::string& path, const ChartAtlas& like, const SampleGrid& grid);

/// Triangle mesh of the lattice nodes; only for surfaces in 3-space.
void write_obj(const std::string& path, const ChartAtlas& atlas, const SampleGrid& grid);

/// step,penalty,t_star,step_taken,halvings,k_phi,min_singular_value rows.
void write_penalty_csv(const std::string& path, const FlowTrajectory& traj);

}  // namespace embedflow::io
