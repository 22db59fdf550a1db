#pragma once

#include <string>
#include <vector>

namespace qdgf::cli {

/// Runs one experiment. Returns 0 on success, 2 on a configuration error and
/// 3 on a numerical failure; partial outputs are removed on failure.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace qdgf::cli
