#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace densepoint::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

inline constexpr const char* kToolkitVersion = "0.1.0";

// Written as manifest.<command>.json next to each command's outputs. Contains
// nothing time- or host-dependent, so identical invocations write identical bytes.
struct RunManifest {
  std::string command;
  std::string config_json;  // canonical (sorted keys) JSON of every effective option
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  std::uint64_t config_digest() const;
  std::string to_json() const;
};

// Subcommands: gen-data, targets, train, eval, plot. Returns an ExitCode.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace densepoint::cli
