#include "tnfs/plant.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tnfs/errors.hpp"
#include "tnfs/seed.hpp"

namespace tnfs {

namespace {

constexpr double kGridTolerance = 1e-9;

// n such that value == n * unit, or nullopt when value is not a multiple.
std::optional<std::size_t> multiple_of(double value, double unit) {
  if (!(unit > 0.0) || !(value >= 0.0)) return std::nullopt;
  const double q = value / unit;
  const double r = std::round(q);
  if (std::abs(q - r) > kGridTolerance * std::max(1.0, q)) return std::nullopt;
  return static_cast<std::size_t>(r);
}

const SensorSpec* find_sensor(const std::vector<SensorSpec>& plant, const std::string& name) {
  for (const auto& s : plant) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

}  // namespace

std::string to_string(FaultMode mode) {
  return mode == FaultMode::kIncipient ? "incipient" : "abrupt";
}

FaultMode parse_fault_mode(const std::string& text) {
  if (text == "incipient") return FaultMode::kIncipient;
  if (text == "abrupt") return FaultMode::kAbrupt;
  throw InvalidArgument("unknown fault mode '" + text + "' (expected incipient or abrupt)");
}

void validate(const Scenario& scenario) {
  if (!(scenario.step_minutes > 0.0) || !(scenario.duration_minutes > 0.0)) {
    throw InvalidArgument("scenario duration and step must be positive");
  }
  if (!multiple_of(scenario.duration_minutes, scenario.step_minutes)) {
    throw InvalidArgument("scenario duration " + std::to_string(scenario.duration_minutes) +
                          " is not a multiple of step " + std::to_string(scenario.step_minutes));
  }
  const auto& f = scenario.fault;
  if (!f.is_normal()) {
    if (!(f.onset_minute >= 0.0 && f.onset_minute <= scenario.duration_minutes)) {
      throw InvalidArgument("fault " + f.fault_id + ": onset " + std::to_string(f.onset_minute) +
                            " outside the scenario duration");
    }
    if (f.affected_channels.empty()) {
      throw InvalidArgument("fault " + f.fault_id + ": no affected channels");
    }
    if (!std::isfinite(f.magnitude)) throw InvalidArgument("fault " + f.fault_id + ": magnitude");
  }
}

Vector Trajectory::at(std::size_t index) const {
  Vector v(channels.size());
  for (std::size_t c = 0; c < channels.size(); ++c) v[c] = channels[c].at(index);
  return v;
}

double fault_deviation(const FaultSpec& fault, const SensorSpec& channel, double t,
                       double end_minute) {
  if (fault.is_normal() || t < fault.onset_minute) return 0.0;
  double gain = 0.0;
  bool affected = false;
  for (const auto& e : fault.affected_channels) {
    if (e.channel == channel.name) {
      gain += e.gain;
      affected = true;
    }
  }
  if (!affected) return 0.0;
  double profile = 1.0;
  if (fault.mode == FaultMode::kIncipient && end_minute > fault.onset_minute) {
    profile = std::min(1.0, (t - fault.onset_minute) / (end_minute - fault.onset_minute));
  }
  return gain * fault.magnitude * channel.nominal_std * profile;
}

Trajectory simulate_scenario(const std::vector<SensorSpec>& plant, const Scenario& scenario) {
  if (plant.empty()) throw InvalidArgument("plant has no sensors");
  validate(scenario);
  for (const auto& s : plant) {
    if (!std::isfinite(s.nominal_mean) || !(s.nominal_std >= 0.0) || !(s.noise_std >= 0.0) ||
        !std::isfinite(s.nominal_std) || !std::isfinite(s.noise_std)) {
      throw InvalidArgument("sensor " + s.name + ": invalid statistics");
    }
  }
  for (const auto& e : scenario.fault.affected_channels) {
    if (!find_sensor(plant, e.channel)) {
      throw InvalidArgument("fault " + scenario.fault.fault_id + " references unknown channel " +
                            e.channel);
    }
  }

  const std::size_t steps = *multiple_of(scenario.duration_minutes, scenario.step_minutes);
  Trajectory traj;
  traj.fault = scenario.fault;
  traj.timestamps.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    traj.timestamps[k] = static_cast<double>(k) * scenario.step_minutes;
  }
  const double stationary = 1.0 / std::sqrt(1.0 - kArCoefficient * kArCoefficient);
  for (const auto& sensor : plant) {
    traj.channel_names.push_back(sensor.name);
    std::vector<double> series(steps + 1);
    std::mt19937_64 rng(derive_seed(scenario.seed, "plant/" + sensor.name));
    std::normal_distribution<double> innovation(0.0, 1.0);
    double ar = sensor.noise_std > 0.0 ? stationary * sensor.noise_std * innovation(rng) : 0.0;
    for (std::size_t k = 0; k <= steps; ++k) {
      if (k > 0 && sensor.noise_std > 0.0) {
        ar = kArCoefficient * ar + sensor.noise_std * innovation(rng);
      }
      series[k] = sensor.nominal_mean + ar +
                  fault_deviation(scenario.fault, sensor, traj.timestamps[k],
                                  scenario.duration_minutes);
    }
    traj.channels.push_back(std::move(series));
  }
  return traj;
}

std::size_t ClassTable::index_of(const std::string& name) const {
  if (auto i = find(name)) return *i;
  throw InvalidArgument("class '" + name + "' is not in the class table");
}

std::optional<std::size_t> ClassTable::find(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

ClassTable default_class_table() {
  ClassTable t;
  t.names.push_back(kNormalFault);
  for (int i = 1; i <= 11; ++i) t.names.push_back("F" + std::to_string(i));
  for (int i = 1; i <= 3; ++i) t.names.push_back("S" + std::to_string(i));
  return t;
}

std::size_t points_per_window(const WindowGeometry& geometry, double step_minutes) {
  const auto n = multiple_of(geometry.window_minutes, step_minutes);
  if (!n || *n == 0) {
    throw InvalidArgument("window of " + std::to_string(geometry.window_minutes) +
                          " min is not a positive multiple of the " +
                          std::to_string(step_minutes) + " min step");
  }
  return *n;
}

std::size_t window_count(double duration, double window, double stride) {
  if (!(stride > 0.0)) throw InvalidArgument("window stride must be positive");
  if (window > duration + kGridTolerance) {
    throw InvalidArgument("window of " + std::to_string(window) + " min exceeds duration " +
                          std::to_string(duration));
  }
  return static_cast<std::size_t>(std::floor((duration - window) / stride + kGridTolerance)) + 1;
}

std::vector<WindowedSample> window_samples(const Trajectory& trajectory,
                                           const WindowGeometry& geometry,
                                           const ClassTable& classes) {
  if (trajectory.length() < 2) throw InvalidArgument("trajectory needs at least two points");
  const double step = trajectory.timestamps[1] - trajectory.timestamps[0];
  const double start0 = trajectory.timestamps.front();
  const double duration = trajectory.timestamps.back() - start0;
  const std::size_t count =
      window_count(duration, geometry.window_minutes, geometry.stride_minutes);
  const std::size_t points = points_per_window(geometry, step);
  const auto stride_steps = multiple_of(geometry.stride_minutes, step);
  if (!stride_steps || *stride_steps == 0) {
    throw InvalidArgument("window stride must be a positive multiple of the sampling step");
  }

  const auto& fault = trajectory.fault;
  const std::size_t normal = classes.index_of(kNormalFault);
  const std::size_t fault_class = fault.is_normal() ? normal : classes.index_of(fault.fault_id);
  const std::size_t channels = trajectory.channels.size();

  std::vector<WindowedSample> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t first = w * *stride_steps;
    WindowedSample s;
    s.window_start_minute = trajectory.timestamps[first];
    const double window_end = s.window_start_minute + geometry.window_minutes;
    s.label = (!fault.is_normal() && window_end >= fault.onset_minute) ? fault_class : normal;
    s.features.reserve(points * channels);
    for (std::size_t p = 1; p <= points; ++p) {
      const std::size_t idx = first + p;
      for (std::size_t c = 0; c < channels; ++c) s.features.push_back(trajectory.channels[c][idx]);
      const bool faulty = !fault.is_normal() && trajectory.timestamps[idx] >= fault.onset_minute;
      s.point_labels.push_back(faulty ? fault_class : normal);
    }
    out.push_back(std::move(s));
  }
  return out;
}

Vector Normalization::apply(std::span<const double> raw) const {
  if (raw.size() != mean.size()) {
    throw InvalidArgument("normalization expects " + std::to_string(mean.size()) +
                          " values, found " + std::to_string(raw.size()));
  }
  Vector out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - mean[i]) / std[i];
  return out;
}

Vector Normalization::invert(std::span<const double> normalized) const {
  if (normalized.size() != mean.size()) {
    throw InvalidArgument("normalization expects " + std::to_string(mean.size()) +
                          " values, found " + std::to_string(normalized.size()));
  }
  Vector out(normalized.size());
  for (std::size_t i = 0; i < normalized.size(); ++i) out[i] = normalized[i] * std[i] + mean[i];
  return out;
}

Normalization fit_normalization(const std::vector<Vector>& rows, std::vector<std::string> names) {
  if (rows.empty()) throw InvalidArgument("cannot fit normalization on an empty split");
  const std::size_t d = rows.front().size();
  Normalization norm;
  norm.names = std::move(names);
  norm.mean.assign(d, 0.0);
  norm.std.assign(d, 0.0);
  for (const auto& r : rows) {
    if (r.size() != d) throw InvalidArgument("ragged rows in normalization fit");
    for (std::size_t i = 0; i < d; ++i) norm.mean[i] += r[i];
  }
  const double n = static_cast<double>(rows.size());
  for (double& m : norm.mean) m /= n;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < d; ++i) {
      const double e = r[i] - norm.mean[i];
      norm.std[i] += e * e;
    }
  }
  for (double& s : norm.std) {
    s = std::sqrt(s / n);
    if (!(s > 1e-12)) s = 1.0;
  }
  return norm;
}

std::vector<int> assign_splits(const std::vector<std::size_t>& scenario_classes,
                               const SplitFractions& split) {
  const double fractions[3] = {split.train, split.validation, split.test};
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw InvalidArgument("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidArgument("split fractions sum to " + std::to_string(total) + ", expected 1");
  }
  std::vector<std::size_t> order(scenario_classes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scenario_classes[a] < scenario_classes[b];
  });
  std::vector<int> out(scenario_classes.size(), 0);
  double counts[3] = {0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < order.size(); ++i) {
    int best = 0;
    double best_deficit = -1e300;
    for (int s = 0; s < 3; ++s) {
      if (fractions[s] <= 0.0) continue;
      const double deficit = fractions[s] * static_cast<double>(i + 1) - counts[s];
      if (deficit > best_deficit + 1e-9) {
        best = s;
        best_deficit = deficit;
      }
    }
    out[order[i]] = best;
    counts[best] += 1.0;
  }
  return out;
}

Dataset assemble_dataset(const std::vector<Trajectory>& trajectories,
                         const WindowGeometry& geometry, const ClassTable& classes,
                         const SplitFractions& split, const Normalization* fixed_normalization) {
  if (trajectories.empty()) throw InvalidArgument("dataset needs at least one scenario");
  Dataset ds;
  ds.classes = classes;
  ds.geometry = geometry;
  ds.channel_names = trajectories.front().channel_names;
  const auto& first = trajectories.front();
  if (first.length() < 2) throw InvalidArgument("trajectory needs at least two points");
  ds.step_minutes = first.timestamps[1] - first.timestamps[0];
  ds.points_per_window = points_per_window(geometry, ds.step_minutes);

  std::vector<std::size_t> scenario_classes;
  std::vector<std::size_t> per_class(classes.size(), 0);
  for (const auto& t : trajectories) {
    if (t.channel_names != ds.channel_names) {
      throw InvalidArgument("trajectories disagree on channel layout");
    }
    const std::size_t cls = classes.index_of(t.fault.is_normal() ? kNormalFault : t.fault.fault_id);
    scenario_classes.push_back(cls);
    ++per_class[cls];
  }
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (per_class[c] == 0) ds.warnings.push_back("class " + classes.names[c] + " has no scenarios");
  }
  ds.scenario_split = assign_splits(scenario_classes, split);

  DatasetSplit* targets[3] = {&ds.train, &ds.validation, &ds.test};
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& t = trajectories[i];
    auto samples = window_samples(t, geometry, classes);
    DatasetSplit& dst = *targets[ds.scenario_split[i]];
    for (auto& s : samples) {
      SampleOrigin origin{i, t.fault.is_normal() ? kNormalFault : t.fault.fault_id, std::nullopt};
      if (!t.fault.is_normal()) origin.onset_minute = t.fault.onset_minute;
      dst.samples.push_back(std::move(s));
      dst.origins.push_back(std::move(origin));
    }
  }

  std::vector<std::string> names;
  for (std::size_t p = 0; p < ds.points_per_window; ++p) {
    for (const auto& c : ds.channel_names) names.push_back(c + "@" + std::to_string(p));
  }
  if (fixed_normalization) {
    if (fixed_normalization->mean.size() != names.size()) {
      throw InvalidArgument("stored normalization covers " +
                            std::to_string(fixed_normalization->mean.size()) +
                            " features, windows have " + std::to_string(names.size()));
    }
    ds.normalization = *fixed_normalization;
  } else {
    const DatasetSplit& fit_on = ds.train.samples.empty() ? ds.validation : ds.train;
    std::vector<Vector> rows;
    for (const auto& s : fit_on.samples) rows.push_back(s.features);
    if (rows.empty()) throw InvalidArgument("dataset has no samples to fit normalization on");
    ds.normalization = fit_normalization(rows, std::move(names));
  }
  for (DatasetSplit* split_ptr : targets) {
    for (auto& s : split_ptr->samples) s.features = ds.normalization.apply(s.features);
  }
  return ds;
}

Dataset build_dataset(const std::vector<Scenario>& scenarios,
                      const std::vector<SensorSpec>& plant, const WindowGeometry& geometry,
                      const ClassTable& classes, const SplitFractions& split) {
  if (scenarios.empty()) throw InvalidArgument("dataset needs at least one scenario");
  std::vector<Trajectory> trajectories;
  trajectories.reserve(scenarios.size());
  for (const auto& s : scenarios) trajectories.push_back(simulate_scenario(plant, s));
  return assemble_dataset(trajectories, geometry, classes, split);
}

std::vector<SensorSpec> default_plant() {
  // name, unit, nominal mean, nominal std, AR innovation std
  return {
      {"CO", "ppm", 180.0, 20.0, 2.0},
      {"Temp", "degC", 1050.0, 25.0, 2.5},
      {"O2", "%", 3.5, 0.4, 0.04},
      {"RPM", "rpm", 3.2, 0.15, 0.015},
      {"Press", "mbar", -4.0, 0.6, 0.06},
      {"TempInlet", "degC", 880.0, 20.0, 2.0},
      {"TempOutlet", "degC", 1250.0, 30.0, 3.0},
      {"PressOutlet", "mbar", -9.0, 0.8, 0.08},
      {"dBurner", "kW", 0.0, 50.0, 5.0},
      {"dAir", "m3/h", 0.0, 400.0, 40.0},
      {"dIDFan", "%", 0.0, 2.0, 0.2},
  };
}

const FaultSpec& FaultCatalog::get(const std::string& fault_id) const {
  for (const auto& f : faults) {
    if (f.fault_id == fault_id) return f;
  }
  throw InvalidArgument("fault '" + fault_id + "' is not in the catalog");
}

FaultCatalog default_fault_catalog() {
  const auto plant = default_plant();
  FaultCatalog cat;
  for (std::size_t k = 0; k < 11; ++k) {
    FaultSpec f;
    f.fault_id = "F" + std::to_string(k + 1);
    // Incipient-only faults in the catalog: ring formation and refractory wear.
    f.mode = (k == 4 || k == 7) ? FaultMode::kIncipient : FaultMode::kAbrupt;
    f.magnitude = 3.0;
    f.affected_channels = {{plant[k].name, 1.0}, {plant[(k + 3) % 11].name, -1.0}};
    cat.faults.push_back(std::move(f));
  }
  cat.faults.push_back({"S1", FaultMode::kAbrupt, 0.0, 3.0, {{"Temp", 1.0}}});
  cat.faults.push_back({"S2", FaultMode::kIncipient, 0.0, 3.0, {{"O2", -1.0}}});
  cat.faults.push_back({"S3", FaultMode::kAbrupt, 0.0, 3.0, {{"Press", 1.0}}});
  return cat;
}

std::vector<Scenario> make_scenarios(const FaultCatalog& catalog, const ClassTable& classes,
                                     std::size_t per_class, double onset_minute,
                                     double duration_minutes, double step_minutes,
                                     std::uint64_t master_seed) {
  std::vector<Scenario> out;
  for (const auto& name : classes.names) {
    for (std::size_t k = 0; k < per_class; ++k) {
      Scenario s;
      s.duration_minutes = duration_minutes;
      s.step_minutes = step_minutes;
      if (name != kNormalFault) {
        s.fault = catalog.get(name);
        s.fault.onset_minute = onset_minute;
      }
      s.seed = derive_seed(master_seed, "scenario/" + std::to_string(out.size()));
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace tnfs
