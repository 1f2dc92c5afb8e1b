#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kel/experiments.hpp"
#include "kel/json_util.hpp"
#include "kel/sde.hpp"

namespace kel {

// git-describe string baked in at build time.
std::string version();

// FNV-1a of the canonical (sorted-key, compact) JSON text, as 16 hex digits.
std::string config_hash(const Json& config);

// "kel <version> config <hash>"
std::string provenance(const Json& config);

inline constexpr int kReportSchemaVersion = 1;

Json to_json(const FitResult& f);
Json report_to_json(const ExperimentReport& report);
// Header comment, then t,quantity,value,stderr rows.
std::string report_csv(const ExperimentReport& report);
// Line plot of every quantity; log-scaled y when `log_y`.
std::string report_svg(const ExperimentReport& report, bool log_y);

struct OutputFormats {
  bool json = true;
  bool csv = true;
  bool svg = false;
};

// Writes <dir>/<id>.{json,csv,svg}; returns the paths written. Throws
// NonFiniteState if a numeric field is not finite.
std::vector<std::filesystem::path> write_report(const ExperimentReport& report,
                                                const std::filesystem::path& dir,
                                                const OutputFormats& formats, bool log_y = true);

// Snapshot dumps. CSV columns: t,particle,block,coord,value (block is 1 or 2,
// coord counts from 0 within the block).
std::string snapshots_csv(const std::vector<Ensemble>& snaps, int d1, const Json& config);
// Little-endian binary layout, see README.
std::string snapshots_binary(const std::vector<Ensemble>& snaps, int d1, const Json& config);

void write_text(const std::filesystem::path& path, const std::string& content);

// Shortest text that round-trips the double.
std::string format_double(double v);

}  // namespace kel
