#pragma once

#include <string>

#include <CLI11.hpp>

#include "defgrid/pipeline.hpp"

namespace defgrid::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kInputError = 3,
    kNumericalError = 4,
    kCheckFailure = 5,
};

/// Binds every RunConfig field to options on the given (sub)command.
void attach_run_options(CLI::App& cmd, RunConfig& config);

/// TOML-compatible serialization of the bound options; parse(serialize(c)) == c.
std::string config_to_toml(CLI::App& cmd);

int run_cli(int argc, const char* const* argv);

}  // namespace defgrid::cli
