#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tnfs/archive.hpp"
#include "tnfs/clustering.hpp"
#include "tnfs/plant.hpp"
#include "tnfs/training.hpp"

namespace tnfs {

struct ClusterSettings {
  // Fixed rule count; when unset the count is scanned over [range_min, range_max].
  std::optional<std::size_t> count;
  std::size_t range_min = 2;
  std::size_t range_max = 8;
  ClusterConfig fcm;
  double min_width = 0.5;
};

struct ModelSettings {
  Task task = Task::kClassify;
  // State dimension N; 0 means "same as the output dimension".
  std::size_t state_dim = 0;
  // predict task: model inputs and the channels its outputs forecast.
  std::vector<std::string> input_channels;
  std::vector<std::string> output_channels;
};

struct RunConfig {
  std::vector<SensorSpec> plant;
  FaultCatalog catalog;
  ClassTable classes;
  std::vector<Scenario> scenarios;
  WindowGeometry window;
  SplitFractions split;
  ModelSettings model;
  ClusterSettings cluster;
  TrainConfig train;
  std::uint64_t seed = 0;
  // FNV-1a of the config text (hex), stored in archives as provenance.
  std::string digest;
};

// Defaults: built-in plant and catalog, 15 classes with 3 scenarios each,
// 120 min at 10 min steps with onset at 40 min, 40/10 min windows, thirds.
RunConfig default_run_config(std::uint64_t seed = 0);

// Parses a JSON run config; relative plant / fault_catalog paths resolve
// against `base_dir`. Missing sections keep their defaults.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir,
                           std::optional<std::uint64_t> seed_override = std::nullopt);
RunConfig load_run_config(const std::filesystem::path& path,
                          std::optional<std::uint64_t> seed_override = std::nullopt);

// JSON plant ({"sensors": [...]}) and fault catalog ({"faults": [...]}) files.
std::vector<SensorSpec> parse_plant(std::string_view text);
std::string serialize_plant(const std::vector<SensorSpec>& plant);
FaultCatalog parse_fault_catalog(std::string_view text);
std::string serialize_fault_catalog(const FaultCatalog& catalog);

}  // namespace tnfs
