#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tnfs/archive.hpp"
#include "tnfs/clustering.hpp"
#include "tnfs/config.hpp"
#include "tnfs/diagnosis.hpp"
#include "tnfs/plant.hpp"
#include "tnfs/training.hpp"

namespace tnfs {

// One sequence per window: the window points are the inputs, the one-hot
// class of each point the targets.
std::vector<TrainingSequence> classification_sequences(const DatasetSplit& split,
                                                       std::size_t input_dim,
                                                       std::size_t class_count);

// Per-channel z-score over every point of the given trajectories.
Normalization fit_channel_normalization(std::span<const Trajectory> trajectories);

// Index of each named channel in the trajectory; throws naming the missing one.
std::vector<std::size_t> channel_indices(const Trajectory& trajectory,
                                         const std::vector<std::string>& names);

// Copy of the trajectory restricted to the named channels, in that order.
Trajectory select_channels(const Trajectory& trajectory, const std::vector<std::string>& names);

// One-step-ahead sequences: inputs u(t) from `input_channels`, targets the
// `output_channels` at t + 1, both normalized per channel.
std::vector<TrainingSequence> prediction_sequences(std::span<const Trajectory> trajectories,
                                                   const std::vector<std::string>& input_channels,
                                                   const std::vector<std::string>& output_channels,
                                                   const Normalization& normalization);

// Output p feeds the input carrying the same channel name.
AutoregressiveMapping channel_mapping(const std::vector<std::string>& input_channels,
                                      const std::vector<std::string>& output_channels);

// Training material for one task, cut from simulated trajectories.
struct TaskData {
  Task task = Task::kClassify;
  Dimensions dims;
  Normalization normalization;
  std::vector<std::string> class_names;
  std::vector<std::string> input_channels;
  std::vector<std::string> output_channels;
  double step_minutes = 0.0;
  WindowGeometry window;
  std::optional<Dataset> dataset;  // classify only
  std::vector<Trajectory> split_trajectories[3];  // predict only
  std::vector<TrainingSequence> train;
  std::vector<TrainingSequence> validation;
  std::vector<TrainingSequence> test;
  std::vector<std::string> warnings;
};

// Normalization comes from `archive` when given, else it is fitted on the
// training split.
TaskData prepare_task_data(const RunConfig& config, const std::vector<Trajectory>& trajectories,
                           const ModelArchive* archive = nullptr);

// Throws InvalidArgument naming expected vs. found geometry.
void check_compatible(const ModelArchive& archive, const TaskData& data);

struct InitOutcome {
  TnfsModel model;
  ClusterResult clusters;
  std::optional<ClusterScan> scan;
};

// FCM on (state proxy, input) rows of the training sequences, either with the
// fixed count or the best count of the configured range; one rule per cluster.
InitOutcome initialize_model(std::span<const TrainingSequence> sequences, Dimensions dims,
                             const ClusterSettings& settings, std::uint64_t consequent_seed);

ModelArchive make_archive(const TaskData& data, TnfsModel model, const RunConfig& config);

}  // namespace tnfs
