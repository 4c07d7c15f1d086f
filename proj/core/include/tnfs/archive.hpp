#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tnfs/model.hpp"
#include "tnfs/plant.hpp"

namespace tnfs {

inline constexpr int kArchiveFormatVersion = 1;

enum class Task { kClassify, kPredict };

std::string to_string(Task task);
Task parse_task(const std::string& text);

struct Provenance {
  std::uint64_t seed = 0;
  std::string config_digest;
};

// Everything needed to run a trained model on raw data: the model itself,
// the normalization applied to its inputs and the meaning of its outputs.
struct ModelArchive {
  int format_version = kArchiveFormatVersion;
  Task task = Task::kClassify;
  TnfsModel model;
  // classify: one entry per window feature; predict: one per input channel.
  Normalization normalization;
  std::vector<std::string> class_names;      // classify
  std::vector<std::string> input_channels;   // model inputs, in order
  std::vector<std::string> output_channels;  // predict: channel each output forecasts
  double step_minutes = 10.0;
  WindowGeometry window;
  Provenance provenance;
};

// Human-readable JSON document. Doubles are written with round-trip
// precision, so save -> load reproduces the model bit for bit.
std::string serialize_archive(const ModelArchive& archive);
// Throws VersionMismatch for any format_version other than the current one.
ModelArchive parse_archive(std::string_view text);

void save_archive(const std::filesystem::path& path, const ModelArchive& archive);
ModelArchive load_archive(const std::filesystem::path& path);

}  // namespace tnfs
