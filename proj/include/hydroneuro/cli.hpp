#pragma once

#include <string>

namespace hydroneuro {

/// Entry point of the `hydroneuro` executable. Returns the process exit
/// status: 0 on success, 1 on configuration or run failure, 2 on usage errors.
int run_cli(int argc, char** argv);

std::string version_string();

}  // namespace hydroneuro
