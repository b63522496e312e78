#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace profvec::cli {

inline constexpr std::string_view kVersion = "1.0.0";

/// Runs one command. `args` excludes the program name. Returns 0 on
/// success, 1 on a runtime error and 2 on a usage error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Flat `key = value` document; `#` starts a comment line.
std::map<std::string, std::string> read_flat_config(std::istream& in);
std::map<std::string, std::string> load_flat_config(const std::string& path);

}  // namespace profvec::cli
