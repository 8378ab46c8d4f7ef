#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace retrace::cli {

/// Entry point for the `retrace` tool. Returns 0 on success, 2 on a usage
/// error and 1 on a runtime error; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace retrace::cli
