#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace kel {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;  // deterministic summary of the measured values
  double seconds = 0.0;
  double budget_seconds = 0.0;
};

inline constexpr int kCriterionCount = 9;

struct AcceptanceOptions {
  std::uint64_t seed = 20240611;
  // Scratch directory for the determinism criterion; empty means a
  // per-process directory under the system temp dir, removed afterwards.
  std::filesystem::path work_dir;
};

// Runs one criterion (1..9). Checks and runtime budget both count toward pass.
CriterionResult run_criterion(int id, const AcceptanceOptions& options);

// Writes the deterministic selftest artifacts (reports and snapshot dumps
// of reduced-size runs) under `dir`; returns the files written.
std::vector<std::filesystem::path> write_selftest_artifacts(const std::filesystem::path& dir,
                                                            std::uint64_t seed);

// One line per criterion.
std::string format_result_line(const CriterionResult& r);

}  // namespace kel
