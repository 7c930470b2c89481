#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace eidpki::enrollment {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;  // domain error, or a negative outcome (denied, invalid, rejected)
inline constexpr int kExitUsage = 2;

// Operator command line. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace eidpki::enrollment
