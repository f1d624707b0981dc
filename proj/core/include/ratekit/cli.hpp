#pragma once

#include <string>
#include <vector>

namespace ratekit::cli {

/// Runs the command-line front end. `args` is the full argv (program name
/// first). Exit codes: 0 success, 2 scenario validation error, 3 numerical
/// failure, 4 NoTippingFound under --expect-tipping.
int run(const std::vector<std::string>& args);

}  // namespace ratekit::cli
