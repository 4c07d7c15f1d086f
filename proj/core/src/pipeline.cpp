#include "tnfs/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "tnfs/errors.hpp"
#include "tnfs/seed.hpp"

namespace tnfs {

std::vector<TrainingSequence> classification_sequences(const DatasetSplit& split,
                                                       std::size_t input_dim,
                                                       std::size_t class_count) {
  std::vector<TrainingSequence> out;
  out.reserve(split.size());
  for (const auto& s : split.samples) {
    TrainingSequence seq;
    seq.inputs = window_inputs(s.features, input_dim);
    if (s.point_labels.size() != seq.inputs.size()) {
      throw InvalidArgument("window has " + std::to_string(seq.inputs.size()) + " points but " +
                            std::to_string(s.point_labels.size()) + " point labels");
    }
    for (std::size_t label : s.point_labels) {
      if (label >= class_count) throw InvalidArgument("point label outside the class table");
      Vector t(class_count, 0.0);
      t[label] = 1.0;
      seq.targets.push_back(std::move(t));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

Normalization fit_channel_normalization(std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) throw InvalidArgument("no trajectories to fit normalization on");
  std::vector<Vector> rows;
  for (const auto& t : trajectories) {
    if (t.channel_names != trajectories.front().channel_names) {
      throw InvalidArgument("trajectories disagree on their channel list");
    }
    for (std::size_t k = 0; k < t.length(); ++k) rows.push_back(t.at(k));
  }
  return fit_normalization(rows, trajectories.front().channel_names);
}

std::vector<std::size_t> channel_indices(const Trajectory& trajectory,
                                         const std::vector<std::string>& names) {
  std::vector<std::size_t> idx;
  for (const auto& n : names) {
    auto it = std::find(trajectory.channel_names.begin(), trajectory.channel_names.end(), n);
    if (it == trajectory.channel_names.end()) {
      throw InvalidArgument("channel '" + n + "' is not in the trajectory");
    }
    idx.push_back(static_cast<std::size_t>(it - trajectory.channel_names.begin()));
  }
  return idx;
}

Trajectory select_channels(const Trajectory& trajectory, const std::vector<std::string>& names) {
  const auto idx = channel_indices(trajectory, names);
  Trajectory out;
  out.timestamps = trajectory.timestamps;
  out.fault = trajectory.fault;
  out.channel_names = names;
  for (std::size_t i : idx) out.channels.push_back(trajectory.channels[i]);
  return out;
}

std::vector<TrainingSequence> prediction_sequences(std::span<const Trajectory> trajectories,
                                                   const std::vector<std::string>& input_channels,
                                                   const std::vector<std::string>& output_channels,
                                                   const Normalization& normalization) {
  std::vector<TrainingSequence> out;
  for (const auto& t : trajectories) {
    if (t.length() < 2) throw InvalidArgument("trajectory needs at least two points");
    if (normalization.names != t.channel_names) {
      throw InvalidArgument("normalization record does not match the trajectory channels");
    }
    const auto in = channel_indices(t, input_channels);
    const auto outc = channel_indices(t, output_channels);
    TrainingSequence seq;
    for (std::size_t k = 0; k + 1 < t.length(); ++k) {
      const Vector now = normalization.apply(t.at(k));
      const Vector next = normalization.apply(t.at(k + 1));
      Vector u, y;
      for (std::size_t i : in) u.push_back(now[i]);
      for (std::size_t i : outc) y.push_back(next[i]);
      seq.inputs.push_back(std::move(u));
      seq.targets.push_back(std::move(y));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

AutoregressiveMapping channel_mapping(const std::vector<std::string>& input_channels,
                                      const std::vector<std::string>& output_channels) {
  AutoregressiveMapping m;
  for (const auto& o : output_channels) {
    auto it = std::find(input_channels.begin(), input_channels.end(), o);
    if (it == input_channels.end()) {
      m.feeds.push_back(std::nullopt);
    } else {
      m.feeds.push_back(static_cast<std::size_t>(it - input_channels.begin()));
    }
  }
  return m;
}

namespace {

std::size_t state_dim_for(const RunConfig& config, std::size_t outputs) {
  return config.model.state_dim == 0 ? outputs : config.model.state_dim;
}

void prepare_classify(const RunConfig& config, const std::vector<Trajectory>& trajectories,
                      const ModelArchive* archive, TaskData& data) {
  const ClassTable& classes = config.classes;
  std::vector<Trajectory> subset;
  const auto& channels = config.model.input_channels;
  if (!channels.empty() && channels != trajectories.front().channel_names) {
    for (const auto& t : trajectories) subset.push_back(select_channels(t, channels));
  }
  Dataset ds = assemble_dataset(subset.empty() ? trajectories : subset, config.window, classes,
                                config.split, archive ? &archive->normalization : nullptr);
  data.class_names = classes.names;
  data.input_channels = ds.channel_names;
  data.step_minutes = ds.step_minutes;
  data.window = ds.geometry;
  data.normalization = ds.normalization;
  data.warnings = ds.warnings;
  const std::size_t m = ds.channel_names.size();
  data.dims = {state_dim_for(config, classes.size()), m, classes.size()};
  data.train = classification_sequences(ds.train, m, classes.size());
  data.validation = classification_sequences(ds.validation, m, classes.size());
  data.test = classification_sequences(ds.test, m, classes.size());
  data.dataset = std::move(ds);
}

void prepare_predict(const RunConfig& config, const std::vector<Trajectory>& trajectories,
                     const ModelArchive* archive, TaskData& data) {
  const auto& front = trajectories.front();
  data.input_channels =
      config.model.input_channels.empty() ? front.channel_names : config.model.input_channels;
  data.output_channels = config.model.output_channels;
  if (data.output_channels.empty()) throw InvalidArgument("predict task needs output_channels");
  channel_indices(front, data.input_channels);
  channel_indices(front, data.output_channels);
  data.step_minutes = front.length() > 1 ? front.timestamps[1] - front.timestamps[0] : 0.0;
  data.window = config.window;

  std::vector<std::size_t> scenario_classes;
  for (const auto& t : trajectories) {
    const std::string& id = t.fault.is_normal() ? kNormalFault : t.fault.fault_id;
    auto c = config.classes.find(id);
    scenario_classes.push_back(c ? *c : config.classes.size());
  }
  const auto assignment = assign_splits(scenario_classes, config.split);
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    data.split_trajectories[assignment[i]].push_back(trajectories[i]);
  }
  if (archive) {
    data.normalization = archive->normalization;
  } else {
    const auto& fit_on = data.split_trajectories[0].empty() ? trajectories : data.split_trajectories[0];
    data.normalization = fit_channel_normalization(fit_on);
  }
  const std::size_t p = data.output_channels.size();
  data.dims = {state_dim_for(config, p), data.input_channels.size(), p};
  auto build = [&](const std::vector<Trajectory>& ts) {
    return ts.empty() ? std::vector<TrainingSequence>{}
                      : prediction_sequences(ts, data.input_channels, data.output_channels,
                                             data.normalization);
  };
  data.train = build(data.split_trajectories[0]);
  data.validation = build(data.split_trajectories[1]);
  data.test = build(data.split_trajectories[2]);
}

}  // namespace

TaskData prepare_task_data(const RunConfig& config, const std::vector<Trajectory>& trajectories,
                           const ModelArchive* archive) {
  if (trajectories.empty()) throw InvalidArgument("no trajectories");
  TaskData data;
  data.task = archive ? archive->task : config.model.task;
  RunConfig effective = config;
  if (archive) {
    if (archive->task == Task::kClassify) effective.classes.names = archive->class_names;
    effective.model.input_channels = archive->input_channels;
    effective.model.output_channels = archive->output_channels;
    effective.model.state_dim = archive->model.dims.state;
    effective.window = archive->window;
  }
  if (data.task == Task::kClassify) {
    prepare_classify(effective, trajectories, archive, data);
  } else {
    prepare_predict(effective, trajectories, archive, data);
  }
  return data;
}

void check_compatible(const ModelArchive& archive, const TaskData& data) {
  const Dimensions& d = archive.model.dims;
  auto mismatch = [](const std::string& what, std::size_t expected, std::size_t found) {
    throw InvalidArgument(what + " mismatch: model expects " + std::to_string(expected) +
                          ", data has " + std::to_string(found));
  };
  if (d.input != data.dims.input) mismatch("input dimension", d.input, data.dims.input);
  if (d.output != data.dims.output) mismatch("output dimension", d.output, data.dims.output);
  if (archive.input_channels != data.input_channels) {
    throw InvalidArgument("input channel list of the data differs from the model's");
  }
  if (archive.task == Task::kClassify && archive.class_names != data.class_names) {
    throw InvalidArgument("class table of the data differs from the model's");
  }
  if (std::abs(archive.step_minutes - data.step_minutes) > 1e-9) {
    throw InvalidArgument("sampling step mismatch: model expects " +
                          std::to_string(archive.step_minutes) + " min, data has " +
                          std::to_string(data.step_minutes) + " min");
  }
}

InitOutcome initialize_model(std::span<const TrainingSequence> sequences, Dimensions dims,
                             const ClusterSettings& settings, std::uint64_t consequent_seed) {
  if (sequences.empty()) throw InvalidArgument("no training sequences to initialize from");
  const Matrix features = state_input_features(sequences, dims.state);
  InitOutcome out;
  ClusterConfig cc = settings.fcm;
  if (settings.count) {
    cc.cluster_count = *settings.count;
  } else {
    const std::size_t hi = std::min(settings.range_max, features.rows());
    ClusterScan scan = scan_cluster_counts(features, settings.range_min, hi, cc);
    cc.cluster_count = scan.best;
    // Same stream the scan used for this count, so the rules match the table.
    cc.seed = derive_seed(settings.fcm.seed, "fcm/c=" + std::to_string(scan.best));
    out.scan = std::move(scan);
  }
  out.clusters = fcm(features, cc);
  RuleInitOptions opts;
  opts.fuzzifier_m = cc.fuzzifier_m;
  opts.min_width = std::max(kWidthFloor, settings.min_width);
  opts.consequent_seed = consequent_seed;
  out.model = rules_from_clusters(out.clusters, features, dims, opts);
  return out;
}

ModelArchive make_archive(const TaskData& data, TnfsModel model, const RunConfig& config) {
  ModelArchive a;
  a.task = data.task;
  a.model = std::move(model);
  a.normalization = data.normalization;
  a.class_names = data.class_names;
  a.input_channels = data.input_channels;
  a.output_channels = data.output_channels;
  a.step_minutes = data.step_minutes;
  a.window = data.window;
  a.provenance = {config.seed, config.digest};
  return a;
}

}  // namespace tnfs
