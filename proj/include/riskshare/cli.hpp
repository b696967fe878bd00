#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "riskshare/loss_model.hpp"
#include "riskshare/risk_measures.hpp"

namespace riskshare::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kInputFormat = 2,
  kNumericFailure = 3,
  kSolverFailure = 4,
};

// Full command line (args[0] is the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Worker count: `requested` or the hardware concurrency, capped by the
// QUOTE_THREADS environment variable, at least 1.
std::size_t worker_threads(std::optional<std::size_t> requested);

// Writes to a sibling temporary file, then renames it over `path`.
void write_atomic(const std::string& path, const std::string& content);

std::string sha256_file(const std::string& path);

// Plain-text table, one labelled row per quantity.
std::string render_table(const QuoteResult& q, const SeverityModel& sev);

}  // namespace riskshare::cli
