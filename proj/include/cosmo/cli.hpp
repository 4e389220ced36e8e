#pragma once

// Command-line front end. Each command writes into one run directory:
//   summary.json   command, seed, config, metrics, files, wallclock_s
//   metrics.csv    epoch,loss,psnr (epoch,loss,iou for occupancy)
//   *.ppm / *.vol / *.csv artifacts
//
// Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace cosmo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cosmo::cli
