#pragma once

#include <ostream>

namespace maskvae {

// Entry point of the maskvae tool. Exit codes: 0 success, 2 bad arguments,
// config or input (including a missing checkpoint), 1 runtime failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace maskvae
