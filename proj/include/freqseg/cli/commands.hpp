#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "freqseg/autodiff/gradcheck.hpp"

namespace freqseg::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kConfigError = 2,
  kDiverged = 3,
  kDataError = 4,  // unreadable input, bad checkpoint, incompatible shapes
};

/// Runs `freqseg <subcommand> ...`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct NamedCheck {
  std::string name;
  ad::GradCheckReport report;
};

/// Finite-difference checks of every primitive plus the full tiny-model
/// deep-supervision loss (16x16 input, channels 2,4,8,16).
std::vector<NamedCheck> gradcheck_suite(double tol, std::uint64_t seed = 1);

}  // namespace freqseg::cli
