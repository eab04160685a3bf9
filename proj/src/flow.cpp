#include "embedflow/flow.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "embedflow/sampled_chart.hpp"

namespace embedflow {

void validate(const FlowConfig& cfg) {
  if (!(cfg.sigma_step > 0.0 && cfg.sigma_step <= 1.0)) throw std::invalid_argument("sigma_step must lie in (0, 1]");
  if (!(cfg.certify.sigma_grid > 0.0 && cfg.certify.sigma_grid <= 1.0)) {
    throw std::invalid_argument("sigma_grid must lie in (0, 1]");
  }
  if (!(cfg.grad_tol > 0.0)) throw std::invalid_argument("grad_tol must be positive");
  if (cfg.max_steps < 0) throw std::invalid_argument("max_steps must be nonnegative");
  if (cfg.max_halvings < 0) throw std::invalid_argument("max_halvings must be nonnegative");
  if (cfg.penalty.weight_vol < 0.0 || cfg.penalty.weight_data < 0.0) {
    throw std::invalid_argument("penalty weights must be nonnegative");
  }
  if (cfg.penalty.bump_bandwidth < 0.0) throw std::invalid_argument("bump_bandwidth must be positive (or 0 for the default)");
  if (!(cfg.verify.sv_tol > 0.0) || !(cfg.verify.inj_tol > 0.0)) throw std::invalid_argument("verifier tolerances must be positive");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_steps: return "max_steps";
    case Termination::certification_failure: return "certification_failure";
    case Termination::verifier_failure: return "verifier_failure";
  }
  return "unknown";
}

namespace {

void certify_into(FlowState& s, const FlowConfig& cfg) {
  try {
    s.certificate = certify(s.atlas, s.grid, cfg.certify);
  } catch (const std::exception& e) {
    s.certificate.reset();
    s.warnings.push_back(std::string("certification failed: ") + e.what());
  }
}

}  // namespace

FlowState initial_state(const ChartAtlas& atlas, const SampleGrid& grid, const FlowConfig& cfg) {
  FlowState s{.atlas = sample_atlas(atlas, grid), .grid = grid};
  s.penalty_value = penalty_value(s.atlas, grid, cfg.penalty);
  s.verifier = verify_embedding(s.atlas, grid, cfg.verify);
  if (s.verifier.pass) certify_into(s, cfg);
  return s;
}

StepResult flow_step(const FlowState& state, const std::vector<Vec>& u, double t, const FlowConfig& cfg,
                     const StepOptions& opt) {
  if (u.size() != state.grid.total_nodes()) throw std::invalid_argument("step field size does not match the grid");
  if (opt.check_precondition) {
    if (!state.certificate) throw std::logic_error("flow_step needs a certified state");
    const double bound = cfg.sigma_step * state.certificate->t_star;
    if (std::abs(t) > bound * (1.0 + 1e-12)) throw std::invalid_argument("|t| exceeds sigma_step * t*");
    for (const Vec& v : u) {
      if (v.norm() > 1.0 + 1e-12) throw std::invalid_argument("step field is longer than one");
    }
  }
  StepResult r{.state = state};
  if (t == 0.0) {
    r.accepted = true;
    r.state.step_index = state.step_index + 1;
    r.state.step_taken = 0.0;
    r.state.halvings = 0;
    return r;
  }
  const double tol = 1e-12 * std::max(1.0, std::abs(state.penalty_value));
  double step = t;
  const int attempts = opt.backtrack ? cfg.max_halvings + 1 : 1;
  for (int h = 0; h < attempts; ++h, step *= 0.5) {
    FlowState next{.atlas = displace(state.atlas, state.grid, u, step), .grid = state.grid};
    next.step_index = state.step_index + 1;
    next.step_taken = step;
    next.halvings = h;
    next.verifier = verify_embedding(next.atlas, next.grid, cfg.verify);
    std::ostringstream why;
    if (next.verifier.pass) {
      next.penalty_value = penalty_value(next.atlas, next.grid, cfg.penalty);
      if (!opt.require_descent || next.penalty_value <= state.penalty_value + tol) {
        r.state = std::move(next);
        r.accepted = true;
        r.t_used = step;
        return r;
      }
      why << "penalty increased from " << state.penalty_value << " to " << next.penalty_value;
    } else {
      why << "verifier rejected the step (immersion " << (next.verifier.immersion_ok ? "ok" : "lost")
          << ", injectivity " << (next.verifier.injectivity_ok ? "ok" : "lost") << ")";
    }
    r.state = std::move(next);
    r.t_used = step;
    r.diagnostic = why.str() + " at t = " + std::to_string(step);
  }
  r.diagnostic += "; gave up after " + std::to_string(attempts - 1) + " halvings";
  return r;
}

FlowTrajectory flow_run(const ChartAtlas& atlas, const SampleGrid& grid, const FlowConfig& cfg) {
  validate(cfg);
  FlowTrajectory traj;
  traj.states.push_back(initial_state(atlas, grid, cfg));
  if (!traj.states.back().verifier.pass) {
    traj.termination = Termination::verifier_failure;
    traj.diagnostic = "the initial map does not pass the embedding verifier";
    return traj;
  }
  while (true) {
    FlowState& cur = traj.states.back();
    const NormalField u = combined_gradient(cur.atlas, cur.grid, cfg.penalty, cfg.grad_tol);
    cur.k_phi = u.k_phi;
    cur.warnings.insert(cur.warnings.end(), u.warnings.begin(), u.warnings.end());
    if (u.converged) {
      traj.termination = Termination::converged;
      return traj;
    }
    if (!cur.certificate) {
      traj.termination = Termination::certification_failure;
      traj.diagnostic = cur.warnings.empty() ? "certification failed" : cur.warnings.back();
      return traj;
    }
    if (cur.step_index >= cfg.max_steps) {
      traj.termination = Termination::max_steps;
      return traj;
    }
    std::vector<Vec> down(u.vectors.size());
    for (std::size_t i = 0; i < down.size(); ++i) down[i] = -u.vectors[i];
    StepResult step = flow_step(cur, down, cfg.sigma_step * cur.certificate->t_star, cfg);
    if (!step.accepted) {
      traj.termination = Termination::verifier_failure;
      traj.diagnostic = step.diagnostic;
      return traj;
    }
    certify_into(step.state, cfg);
    traj.states.push_back(std::move(step.state));
  }
}

}  // namespace embedflow
