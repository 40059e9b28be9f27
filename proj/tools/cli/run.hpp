#pragma once

#include <string>

#include "cli/config.hpp"

namespace weakcv_cli {

/// Executes one subcommand (estimate, convergence, complexity, verify) and
/// returns the process exit code: 0 ok, 1 internal, 2 configuration,
/// 3 accuracy, 4 resource. Errors are reported on stderr; result CSV and a
/// rerunnable manifest land next to cfg.output (written atomically, nothing
/// is left behind on failure).
int run_command(const std::string& command, const RunConfig& cfg);

}  // namespace weakcv_cli
