#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pouta {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

// Subcommands: synthesize, train, infer, eval, bench, convert, fixture.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_dispatch(int argc, char** argv);

}  // namespace pouta
