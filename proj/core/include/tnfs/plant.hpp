#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tnfs/matrix.hpp"

namespace tnfs {

struct SensorSpec {
  std::string name;
  std::string unit;
  double nominal_mean = 0.0;
  double nominal_std = 1.0;
  double noise_std = 0.0;
};

enum class FaultMode { kIncipient, kAbrupt };

std::string to_string(FaultMode mode);
FaultMode parse_fault_mode(const std::string& text);

inline const std::string kNormalFault = "NORMAL";

// Signed participation of one channel in a fault signature.
struct ChannelEffect {
  std::string channel;
  double gain = 1.0;
};

struct FaultSpec {
  std::string fault_id = kNormalFault;  // F1..F11, S1..S3 or NORMAL
  FaultMode mode = FaultMode::kAbrupt;
  double onset_minute = 0.0;
  double magnitude = 0.0;  // multiples of the channel's nominal_std
  std::vector<ChannelEffect> affected_channels;

  bool is_normal() const { return fault_id == kNormalFault; }
};

struct Scenario {
  double duration_minutes = 120.0;
  double step_minutes = 10.0;
  FaultSpec fault;
  std::uint64_t seed = 0;
};

void validate(const Scenario& scenario);

struct Trajectory {
  std::vector<double> timestamps;  // minutes
  std::vector<std::string> channel_names;
  std::vector<std::vector<double>> channels;  // one series per channel
  FaultSpec fault;

  std::size_t length() const { return timestamps.size(); }
  // Channel values at one time index, in channel order.
  Vector at(std::size_t index) const;
};

// Fault deviation added to `channel` at minute t of a scenario ending at
// `end_minute`. Zero before onset and for channels outside the signature.
double fault_deviation(const FaultSpec& fault, const SensorSpec& channel, double t,
                       double end_minute);

// Each channel is an AR(1) process around nominal_mean (coefficient 0.9,
// innovation std noise_std) plus the fault deviation. Deterministic per seed.
Trajectory simulate_scenario(const std::vector<SensorSpec>& plant, const Scenario& scenario);

inline constexpr double kArCoefficient = 0.9;

struct WindowGeometry {
  double window_minutes = 40.0;
  double stride_minutes = 10.0;
};

struct WindowedSample {
  // Time-major: point 0 channels, point 1 channels, ...
  Vector features;
  std::size_t label = 0;
  double window_start_minute = 0.0;
  // Class of each time point inside the window: the fault class from onset
  // on, the normal class before it.
  std::vector<std::size_t> point_labels;
};

// Ordered class table; index 0 is conventionally NORMAL.
struct ClassTable {
  std::vector<std::string> names;

  std::size_t size() const { return names.size(); }
  std::size_t index_of(const std::string& name) const;  // throws if unknown
  std::optional<std::size_t> find(const std::string& name) const;
};

// NORMAL, F1..F11, S1..S3.
ClassTable default_class_table();

// Number of grid points inside one window: window / step.
std::size_t points_per_window(const WindowGeometry& geometry, double step_minutes);

// Windows start at 0, stride, 2 stride, ... while start + window <= duration.
// A window [s, s + w] covers the grid points s + step, ..., s + w and is
// labeled with the fault class when it touches [onset, end] (touching at a
// single point counts), NORMAL otherwise.
std::vector<WindowedSample> window_samples(const Trajectory& trajectory,
                                           const WindowGeometry& geometry,
                                           const ClassTable& classes);

std::size_t window_count(double duration, double window, double stride);

// Per-feature affine normalization (z-score) fitted on a training split.
struct Normalization {
  std::vector<std::string> names;
  Vector mean;
  Vector std;  // 1 where the training variance is zero

  Vector apply(std::span<const double> raw) const;
  Vector invert(std::span<const double> normalized) const;
};

Normalization fit_normalization(const std::vector<Vector>& rows,
                                std::vector<std::string> names);

struct SampleOrigin {
  std::size_t scenario_index = 0;
  std::string fault_id;
  std::optional<double> onset_minute;  // none for NORMAL scenarios
};

struct DatasetSplit {
  std::vector<WindowedSample> samples;
  std::vector<SampleOrigin> origins;  // parallel to samples

  std::size_t size() const { return samples.size(); }
};

struct SplitFractions {
  double train = 1.0 / 3.0;
  double validation = 1.0 / 3.0;
  double test = 1.0 / 3.0;
};

struct Dataset {
  ClassTable classes;
  std::vector<std::string> channel_names;
  std::size_t points_per_window = 0;
  WindowGeometry geometry;
  double step_minutes = 0.0;
  Normalization normalization;  // fitted on train
  DatasetSplit train;
  DatasetSplit validation;
  DatasetSplit test;
  std::vector<std::string> warnings;
  // Split index (0 train, 1 validation, 2 test) of every input scenario.
  std::vector<int> scenario_split;
};

// Assigns each scenario to a split so that every prefix tracks the requested
// fractions (largest deficit first, ties toward train). Scenarios are visited
// grouped by class so each class is spread across the splits.
std::vector<int> assign_splits(const std::vector<std::size_t>& scenario_classes,
                               const SplitFractions& split);

// Windows already-simulated trajectories and assembles a normalized Dataset.
// Normalization is fitted on the training split unless `fixed_normalization`
// is given (e.g. the record stored with a trained model).
Dataset assemble_dataset(const std::vector<Trajectory>& trajectories,
                         const WindowGeometry& geometry, const ClassTable& classes,
                         const SplitFractions& split,
                         const Normalization* fixed_normalization = nullptr);

Dataset build_dataset(const std::vector<Scenario>& scenarios,
                      const std::vector<SensorSpec>& plant, const WindowGeometry& geometry,
                      const ClassTable& classes, const SplitFractions& split);

// Default eleven-channel rotary kiln surrogate.
std::vector<SensorSpec> default_plant();

// Signature catalog: one FaultSpec template (onset unset) per fault id.
struct FaultCatalog {
  std::vector<FaultSpec> faults;

  const FaultSpec& get(const std::string& fault_id) const;  // throws if unknown
};

// F1..F11 with distinct two-channel signatures and sign patterns, S1..S3 as
// single-channel bias / drift faults.
FaultCatalog default_fault_catalog();

// Scenario list: `per_class` scenarios for every class in `classes` (NORMAL
// included), each fault instantiated from the catalog with the given onset.
// Seeds derive from `master_seed` and the scenario position.
std::vector<Scenario> make_scenarios(const FaultCatalog& catalog, const ClassTable& classes,
                                     std::size_t per_class, double onset_minute,
                                     double duration_minutes, double step_minutes,
                                     std::uint64_t master_seed);

}  // namespace tnfs
