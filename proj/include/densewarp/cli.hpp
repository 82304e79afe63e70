#pragma once

#include <string>
#include <vector>

namespace densewarp::cli {

//! Entry point shared by the binary and in-process tests. args excludes the
//! program name. Returns the process exit code: 0 success, 2 input or
//! validation failure, 3 non-convergence (outputs still written), 4
//! configuration or flag errors.
int run(const std::vector<std::string>& args);

}  // namespace densewarp::cli
