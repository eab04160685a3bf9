#pragma once

#include <optional>
#include <string>
#include <vector>

#include "embedflow/certify.hpp"
#include "embedflow/geometry.hpp"
#include "embedflow/penalty.hpp"
#include "embedflow/verify.hpp"

namespace embedflow {

struct FlowConfig {
  PenaltyConfig penalty;
  CertifyOptions certify;
  VerifyOptions verify;
  double sigma_step = 0.9;  // fraction of t* actually travelled, in (0, 1]
  int max_steps = 20;
  double grad_tol = 1e-10;
  int max_halvings = 8;
};

/// Throws std::invalid_argument describing the first violated constraint.
void validate(const FlowConfig& cfg);

struct FlowState {
  ChartAtlas atlas;  // lattice samples of the current map
  SampleGrid grid;
  int step_index = 0;
  double penalty_value = 0.0;
  std::optional<CertificationReport> certificate{};  // empty when certification failed
  VerifierReport verifier{};
  double step_taken = 0.0;  // signed step that produced this state
  int halvings = 0;         // backtracking halvings used for that step
  double k_phi = 0.0;       // gradient scale measured at this state
  std::vector<std::string> warnings{};
};

enum class Termination { converged, max_steps, certification_failure, verifier_failure };

std::string to_string(Termination t);

struct FlowTrajectory {
  std::vector<FlowState> states;
  Termination termination = Termination::max_steps;
  std::string diagnostic{};
};

/// A sampled state for atlas on grid with penalty, verifier report and
/// certificate filled in. Certification failures leave `certificate` empty
/// and record the reason in `warnings`.
FlowState initial_state(const ChartAtlas& atlas, const SampleGrid& grid, const FlowConfig& cfg);

struct StepOptions {
  bool check_precondition = true;  // |t| <= sigma_step * t* and |u| <= 1
  bool backtrack = true;           // halve t on rejection, up to cfg.max_halvings times
  bool require_descent = true;     // reject steps that increase the penalty
};

struct StepResult {
  FlowState state;    // the accepted state, or the last rejected attempt
  bool accepted = false;
  double t_used = 0.0;
  std::string diagnostic{};
};

/// phi + t u on the grid, followed by the verifier and a descent check.
/// The new state carries no certificate; flow_run certifies it.
StepResult flow_step(const FlowState& state, const std::vector<Vec>& u, double t, const FlowConfig& cfg,
                     const StepOptions& opt = {});

/// Certify, step along -u by sigma_step * t*, repeat.
FlowTrajectory flow_run(const ChartAtlas& atlas, const SampleGrid& grid, const FlowConfig& cfg);

}  // namespace embedflow
