#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace clair {

/// Runs one subcommand; args exclude the program name. Returns 0 on success,
/// 2 on usage errors and 1 on data errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

} // namespace clair
