#pragma once

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "noisecoder/core/bits.hpp"

namespace noisecoder::cli {

// Exit codes
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitCapacity = 2;     // capacity exceeded / key invariant violated
inline constexpr int kExitUnreachable = 3;  // model or input file unavailable
inline constexpr int kExitCollapse = 4;     // carrier failed the collapse check

/// A command failure carrying its exit code.
class CliError : public std::runtime_error {
 public:
  CliError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

/// Runs one command line (without the program name). Results go to `out` as
/// key=value lines; failures are one line on `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// ASCII '0'/'1' text; whitespace is ignored on read.
Bits read_bits_file(const std::filesystem::path& path);
void write_bits_file(const std::filesystem::path& path, const Bits& bits);

}  // namespace noisecoder::cli
