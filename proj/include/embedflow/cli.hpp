#pragma once

#include <iosfwd>
#include <string>

#include "embedflow/config.hpp"

namespace embedflow::cli {

enum Exit : int {
  exit_ok = 0,
  exit_unexpected = 1,
  exit_not_embedded = 2,  // immersion or injectivity failure
  exit_config = 3,        // config, expression, validation or state file error
  exit_flow_abort = 4,    // certification or verifier failure during the flow
};

/// Writes state.csv, certification_report.json and constants.csv to out_dir.
int cmd_certify(const RunConfig& cfg, const std::string& out_dir, std::ostream& out, std::ostream& err);

/// Writes step_%04d.csv per state, manifest.json and penalty_vs_step.csv, and
/// final.obj when requested. Every accepted state is persisted before an abort.
int cmd_flow(const RunConfig& cfg, const std::string& out_dir, bool obj, std::ostream& out, std::ostream& err);

/// Verifies the config shape, or the state in state_file when it is not
/// empty, and writes verifier_report.json.
int cmd_verify(const RunConfig& cfg, const std::string& state_file, const std::string& out_dir, std::ostream& out,
               std::ostream& err);

/// Parses `embedflow <certify|flow|verify> --config PATH [options]` and
/// dispatches. Never throws; failures map to the Exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace embedflow::cli
