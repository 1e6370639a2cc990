#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace pleio {

inline constexpr const char* kToolVersion = "1.0.0";

// Entry point shared by the binary and the in-process CLI tests. args holds
// everything after the program name. Returns the process exit code:
// 0 success, 2 input/config error, 3 statistical degeneracy, 1 internal.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// FNV-1a 64-bit digest of a file's bytes, as 16 hex digits (for manifests).
std::string file_digest(const std::string& path);

}  // namespace pleio
