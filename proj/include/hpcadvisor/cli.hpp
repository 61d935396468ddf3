#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hpcadvisor::cli {

// Exit statuses, one per failure class.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kConfigError = 3,
  kMissingDeployment = 4,
  kEmptyDataset = 5,
};

// args excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Every leaf command, e.g. "deploy create", "collect".
std::vector<std::string> command_names();

}  // namespace hpcadvisor::cli
