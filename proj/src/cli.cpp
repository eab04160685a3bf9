#include "embedflow/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "embedflow/expression.hpp"
#include "embedflow/io.hpp"
#include "embedflow/sampled_chart.hpp"

namespace embedflow::cli {

using nlohmann::json;

namespace {

std::string join(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

void prepare(const std::string& dir) {
  std::filesystem::create_directories(dir);
}

void report_verifier_failure(const VerifierReport& vr, std::ostream& err) {
  if (!vr.immersion_ok) {
    err << "not an immersion: smallest Jacobian singular value " << vr.min_singular_value << " at chart "
        << vr.min_singular_where.chart << " node " << vr.min_singular_where.index << '\n';
  }
  if (!vr.injectivity_ok) {
    const PairWitness& w = vr.bilipschitz_worst_pair;
    err << "not injective: nodes (" << w.a.chart << ", " << w.a.index << ") and (" << w.b.chart << ", "
        << w.b.index << ") are " << w.ambient_distance << " apart in space but " << w.model_distance
        << " apart on the manifold\n";
  }
}

json state_entry(const FlowState& s, const std::string& file) {
  json j;
  j["step"] = s.step_index;
  j["file"] = file;
  j["penalty"] = io::number(s.penalty_value);
  j["step_taken"] = io::number(s.step_taken);
  j["halvings"] = s.halvings;
  j["k_phi"] = io::number(s.k_phi);
  j["certificate"] = s.certificate ? io::to_json(*s.certificate) : json(nullptr);
  j["verifier"] = io::to_json(s.verifier);
  j["warnings"] = s.warnings;
  return j;
}

// The run configuration as recorded in outputs. The output directory is left
// out so identical runs written to different places compare byte for byte.
json config_record(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output_dir");
  return j;
}

}  // namespace

int cmd_certify(const RunConfig& cfg, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const ChartAtlas atlas = build_atlas(cfg);
  const SampleGrid grid = build_grid(atlas, cfg);
  prepare(out_dir);
  io::write_state_csv(join(out_dir, "state.csv"), atlas, grid);

  const VerifierReport vr = verify_embedding(atlas, grid, cfg.flow.verify);
  if (!vr.pass) {
    report_verifier_failure(vr, err);
    io::write_json(join(out_dir, "verifier_report.json"), io::to_json(vr));
    return exit_not_embedded;
  }
  const CertificationReport rep = certify(atlas, grid, cfg.flow.certify);
  json j = io::to_json(rep);
  j["verifier"] = io::to_json(vr);
  j["config"] = config_record(cfg);
  io::write_json(join(out_dir, "certification_report.json"), j);
  io::write_constants_csv(join(out_dir, "constants.csv"), rep);
  out << "K = " << rep.K << ", delta = " << rep.delta << ", epsilon = " << rep.epsilon << ", t* = " << rep.t_star
      << '\n';
  return exit_ok;
}

int cmd_flow(const RunConfig& cfg, const std::string& out_dir, bool obj, std::ostream& out, std::ostream& err) {
  const ChartAtlas atlas = build_atlas(cfg);
  const SampleGrid grid = build_grid(atlas, cfg);
  prepare(out_dir);
  const FlowTrajectory traj = flow_run(atlas, grid, cfg.flow);

  json manifest;
  manifest["config"] = config_record(cfg);
  manifest["termination"] = to_string(traj.termination);
  manifest["diagnostic"] = traj.diagnostic;
  manifest["steps"] = json::array();
  for (const FlowState& s : traj.states) {
    char name[32];
    std::snprintf(name, sizeof name, "step_%04d.csv", s.step_index);
    io::write_state_csv(join(out_dir, name), s.atlas, s.grid);
    manifest["steps"].push_back(state_entry(s, name));
  }
  io::write_json(join(out_dir, "manifest.json"), manifest);
  io::write_penalty_csv(join(out_dir, "penalty_vs_step.csv"), traj);
  if (obj) {
    const FlowState& last = traj.states.back();
    if (last.atlas.dim() == 2 && last.atlas.ambient_dim() == 3) {
      io::write_obj(join(out_dir, "final.obj"), last.atlas, last.grid);
    } else {
      err << "OBJ export skipped: it needs a surface in 3-space\n";
    }
  }

  out << traj.states.size() << " states, termination " << to_string(traj.termination) << ", penalty "
      << traj.states.front().penalty_value << " -> " << traj.states.back().penalty_value << '\n';
  if (traj.states.size() == 1 && !traj.states.front().verifier.pass) {
    report_verifier_failure(traj.states.front().verifier, err);
    return exit_not_embedded;
  }
  if (traj.termination == Termination::certification_failure || traj.termination == Termination::verifier_failure) {
    err << "flow aborted after step " << traj.states.back().step_index << ": " << traj.diagnostic << '\n';
    return exit_flow_abort;
  }
  return exit_ok;
}

int cmd_verify(const RunConfig& cfg, const std::string& state_file, const std::string& out_dir, std::ostream& out,
               std::ostream& err) {
  const ChartAtlas declared = build_atlas(cfg);
  const SampleGrid grid = build_grid(declared, cfg);
  const ChartAtlas atlas = state_file.empty() ? declared : io::read_state_csv(state_file, declared, grid);
  prepare(out_dir);

  VerifierReport vr = verify_embedding(atlas, grid, cfg.flow.verify);
  json j;
  j["state"] = state_file.empty() ? json(nullptr) : json(std::filesystem::path(state_file).filename().string());
  if (!vr.pass) {
    report_verifier_failure(vr, err);
    j["verifier"] = io::to_json(vr);
    io::write_json(join(out_dir, "verifier_report.json"), j);
    return exit_not_embedded;
  }

  const FocalEstimate focal = focal_oracle(atlas, grid);
  vr.focal_min_distance = focal.distance;
  j["focal"] = io::to_json(focal);
  std::optional<CertificationReport> rep;
  try {
    rep = certify(atlas, grid, cfg.flow.certify);
  } catch (const GeometryError& e) {
    j["certification_error"] = e.what();
    err << "certification failed: " << e.what() << '\n';
  }
  if (rep) {
    const ReachEstimate reach = reach_oracle(atlas, grid, rep->epsilon);
    vr.reach_estimate = reach.delta_hat;
    j["epsilon"] = io::number(rep->epsilon);
    j["certified_delta"] = io::number(rep->delta);
    j["reach"] = io::to_json(reach);
    j["unique_nearest"] = io::to_json(unique_nearest_oracle(atlas, grid, rep->epsilon, 200, cfg.seed));
  }
  j["verifier"] = io::to_json(vr);
  io::write_json(join(out_dir, "verifier_report.json"), j);
  out << "embedding verified: smallest singular value " << vr.min_singular_value << ", reach estimate "
      << vr.reach_estimate << ", focal distance " << vr.focal_min_distance << '\n';
  return exit_ok;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Certified normal deformations and penalty gradient flow of embedded manifolds", "embedflow"};
  app.require_subcommand(1);

  std::string config_path, out_dir, state_file;
  std::optional<std::uint64_t> seed;
  std::optional<int> resolution;
  std::optional<double> safety;
  bool obj = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_option("--seed", seed, "random seed (overrides the config)");
    sub->add_option("--resolution", resolution, "intervals per axis on every chart");
    sub->add_option("--safety", safety, "grid safety factor sigma_grid in (0, 1]");
  };
  CLI::App* certify_cmd = app.add_subcommand("certify", "certify the step bound t* of the configured shape");
  CLI::App* flow_cmd = app.add_subcommand("flow", "run certified gradient flow of the penalty");
  CLI::App* verify_cmd = app.add_subcommand("verify", "check that a shape or a saved state is an embedding");
  common(certify_cmd);
  common(flow_cmd);
  common(verify_cmd);
  flow_cmd->add_flag("--obj", obj, "also write the final state as an OBJ mesh");
  verify_cmd->add_option("--state", state_file, "state CSV written by certify or flow");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    RunConfig cfg = load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (resolution) cfg.resolution = {*resolution};
    if (safety) cfg.flow.certify.sigma_grid = *safety;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    validate(cfg);
    if (certify_cmd->parsed()) return cmd_certify(cfg, cfg.output_dir, out, err);
    if (flow_cmd->parsed()) return cmd_flow(cfg, cfg.output_dir, obj, out, err);
    return cmd_verify(cfg, state_file, cfg.output_dir, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const io::StateError& e) {
    err << "state error: " << e.what() << '\n';
    return exit_config;
  } catch (const expr::ParseError& e) {
    err << "expression error: " << e.what() << '\n';
    return exit_config;
  } catch (const GeometryError& e) {
    err << "geometry error: " << e.what() << '\n';
    return exit_not_embedded;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_unexpected;
  }
}

}  // namespace embedflow::cli
