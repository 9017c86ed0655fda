#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace unibias::cli {

// Exit codes: 0 success, 1 invalid input (the diagnostic names the key),
// 2 runtime failure. Partial outputs are written before returning 2.
enum ExitCode : int { kOk = 0, kInvalid = 1, kRuntime = 2 };

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// argv[0] is supplied internally.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace unibias::cli
