#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tnfs/plant.hpp"

namespace tnfs {

// 17 significant digits, enough to read every double back exactly.
std::string format_double(double value);
double parse_double(std::string_view text);

// Writes to a sibling temporary file, then renames over `path`.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_text(const std::filesystem::path& path);

// Header `minute,<channel>...`, one row per timestamp.
std::string format_trajectory_csv(const Trajectory& trajectory);
// Fault metadata is not part of the CSV; the result carries a NORMAL fault.
Trajectory parse_trajectory_csv(std::string_view text);

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

// One `key=value key=value ...` record per line; '#' starts a comment line.
using Record = std::map<std::string, std::string>;
std::string format_record(const std::vector<std::pair<std::string, std::string>>& fields);
Record parse_record(std::string_view line);

struct ManifestEntry {
  std::string file;
  Scenario scenario;
};

std::string format_manifest(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> parse_manifest(std::string_view text);

inline constexpr std::string_view kManifestName = "manifest.txt";

// Reads manifest.txt in `dir` and every trajectory it lists, attaching the
// manifest's fault metadata.
std::vector<Trajectory> load_trajectories(const std::filesystem::path& dir);

}  // namespace tnfs
