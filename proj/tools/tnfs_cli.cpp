// tnfs: simulate plant scenarios, build, train and run temporal neuro-fuzzy
// models from the command line.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include "tnfs/archive.hpp"
#include "tnfs/clustering.hpp"
#include "tnfs/config.hpp"
#include "tnfs/csv.hpp"
#include "tnfs/diagnosis.hpp"
#include "tnfs/errors.hpp"
#include "tnfs/pipeline.hpp"
#include "tnfs/seed.hpp"
#include "tnfs/training.hpp"

namespace fs = std::filesystem;
using namespace tnfs;

namespace {

enum ExitCode { kOk = 0, kInvalid = 1, kDiverged = 2, kIo = 3 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string data;
  std::string model;
  std::string trajectory;
  std::optional<std::size_t> rules;
  std::optional<int> epochs;
  std::optional<double> learning_rate;
  double horizon = 0.0;
  std::optional<double> step;
  std::string split = "test";
  double threshold = 0.1;
  double fd_step = 1e-5;
};

RunConfig run_config(const Options& o) {
  if (o.config.empty()) return default_run_config(o.seed.value_or(0));
  return load_run_config(o.config, o.seed);
}

std::vector<Trajectory> trajectories_for(const Options& o, const RunConfig& cfg) {
  if (!o.data.empty()) return load_trajectories(o.data);
  std::vector<Trajectory> out;
  for (const auto& s : cfg.scenarios) out.push_back(simulate_scenario(cfg.plant, s));
  return out;
}

fs::path model_path(const Options& o) {
  return o.model.empty() ? fs::path(o.out) / "model.json" : fs::path(o.model);
}

std::string scenario_file(std::size_t index, const Scenario& s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scenario_%03zu_", index);
  return buf + s.fault.fault_id + ".csv";
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_simulate(const Options& o) {
  const RunConfig cfg = run_config(o);
  std::vector<ManifestEntry> manifest;
  for (std::size_t i = 0; i < cfg.scenarios.size(); ++i) {
    const Scenario& s = cfg.scenarios[i];
    const std::string file = scenario_file(i, s);
    write_trajectory_csv(fs::path(o.out) / file, simulate_scenario(cfg.plant, s));
    manifest.push_back({file, s});
  }
  write_text_atomic(fs::path(o.out) / kManifestName, format_manifest(manifest));
  std::cout << "wrote " << manifest.size() << " scenarios to " << o.out << "\n";
  return kOk;
}

std::string cluster_report(const InitOutcome& init) {
  std::string out;
  if (init.scan) {
    for (const auto& e : init.scan->entries) {
      out += format_record({{"c", std::to_string(e.cluster_count)},
                            {"validity_index", format_double(e.index)},
                            {"iterations", std::to_string(e.iterations_used)}}) + "\n";
    }
    out += format_record({{"selected", std::to_string(init.scan->best)}}) + "\n";
  }
  const Matrix& v = init.clusters.centers;
  for (std::size_t i = 0; i < v.rows(); ++i) {
    std::string center;
    for (std::size_t j = 0; j < v.cols(); ++j) center += (j ? "," : "") + format_double(v(i, j));
    out += format_record({{"cluster", std::to_string(i)}, {"center", center}}) + "\n";
  }
  return out;
}

int cmd_init(const Options& o) {
  RunConfig cfg = run_config(o);
  if (o.rules) cfg.cluster.count = *o.rules;
  const TaskData data = prepare_task_data(cfg, trajectories_for(o, cfg));
  print_warnings(data.warnings);
  const InitOutcome init =
      initialize_model(data.train, data.dims, cfg.cluster, derive_seed(cfg.seed, "consequents"));
  if (init.scan) {
    std::cout << "c\tvalidity_index\n";
    for (const auto& e : init.scan->entries) {
      std::cout << e.cluster_count << "\t" << format_double(e.index) << "\n";
    }
    std::cout << "selected c = " << init.scan->best << "\n";
  }
  write_text_atomic(fs::path(o.out) / "clusters.txt", cluster_report(init));
  save_archive(fs::path(o.out) / "model.json", make_archive(data, init.model, cfg));
  std::cout << "model with " << init.model.rule_count() << " rules written to "
            << (fs::path(o.out) / "model.json").string() << "\n";
  return kOk;
}

int cmd_train(const Options& o) {
  RunConfig cfg = run_config(o);
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.learning_rate) cfg.train.learning_rate = *o.learning_rate;
  validate(cfg.train);
  ModelArchive archive = load_archive(model_path(o));
  const TaskData data = prepare_task_data(cfg, trajectories_for(o, cfg), &archive);
  check_compatible(archive, data);
  print_warnings(data.warnings);
  const TrainResult result = train(archive.model, data.train, cfg.train, data.validation);

  std::string loss;
  for (const auto& r : result.history) {
    loss += format_record({{"epoch", std::to_string(r.epoch)},
                           {"train_mse", format_double(r.train_mse)},
                           {"validation_mse",
                            r.validation_mse ? format_double(*r.validation_mse) : "nan"}}) + "\n";
  }
  write_text_atomic(fs::path(o.out) / "loss.txt", loss);
  archive.model = result.model;
  archive.provenance = {cfg.seed, cfg.digest};
  save_archive(fs::path(o.out) / "model.json", archive);
  const auto& first = result.history.front();
  const auto& last = result.history.back();
  std::cout << "train_mse " << format_double(first.train_mse) << " -> "
            << format_double(last.train_mse) << " over " << result.history.size()
            << " epochs\n";
  return kOk;
}

int cmd_gradcheck(const Options& o) {
  TnfsModel model;
  std::vector<TrainingSequence> data;
  const std::uint64_t seed = o.seed.value_or(0);
  if (o.model.empty()) {
    model = make_random_model({2, 1, 1}, 3, derive_seed(seed, "gradcheck/model"));
    std::mt19937_64 rng(derive_seed(seed, "gradcheck/data"));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    TrainingSequence seq;
    for (int t = 0; t < 5; ++t) {
      seq.inputs.push_back({u(rng)});
      seq.targets.push_back({u(rng)});
    }
    data.push_back(std::move(seq));
  } else {
    const ModelArchive archive = load_archive(o.model);
    const RunConfig cfg = run_config(o);
    const TaskData td = prepare_task_data(cfg, trajectories_for(o, cfg), &archive);
    check_compatible(archive, td);
    model = archive.model;
    data.assign(td.train.begin(), td.train.begin() + std::min<std::ptrdiff_t>(4, td.train.size()));
  }
  const GradientSet analytic = analytic_gradients(model, data);
  const GradientSet numeric = finite_difference_gradients(model, data, o.fd_step);
  const double err = max_relative_error(analytic, numeric);
  std::cout << format_record({{"parameters", std::to_string(parameter_count(model))},
                              {"max_relative_error", format_double(err)}})
            << "\n";
  return err <= 1e-4 ? kOk : kInvalid;
}

std::string report_text(const EvaluationReport& r) {
  std::string out;
  out += format_record({{"samples", std::to_string(r.sample_count)},
                        {"accuracy", format_double(r.accuracy)}}) + "\n";
  out += format_record({{"faulty_scenarios", std::to_string(r.faulty_scenarios)},
                        {"detected_scenarios", std::to_string(r.detected_scenarios)},
                        {"mean_detection_delay_minutes",
                         r.mean_detection_delay_minutes
                             ? format_double(*r.mean_detection_delay_minutes)
                             : "nan"}}) + "\n";
  for (std::size_t i = 0; i < r.class_names.size(); ++i) {
    std::string row;
    for (std::size_t j = 0; j < r.class_names.size(); ++j) {
      row += (j ? "," : "") + std::to_string(r.confusion_matrix[i][j]);
    }
    out += format_record({{"class", r.class_names[i]},
                          {"recall", r.recall[i] ? format_double(*r.recall[i]) : "nan"},
                          {"confusion", row}}) + "\n";
  }
  return out;
}

int cmd_evaluate(const Options& o) {
  const RunConfig cfg = run_config(o);
  const ModelArchive archive = load_archive(model_path(o));
  const TaskData data = prepare_task_data(cfg, trajectories_for(o, cfg), &archive);
  check_compatible(archive, data);
  std::string text;
  if (archive.task == Task::kClassify) {
    const Dataset& ds = *data.dataset;
    const DatasetSplit* split = nullptr;
    if (o.split == "train") split = &ds.train;
    if (o.split == "validation") split = &ds.validation;
    if (o.split == "test") split = &ds.test;
    if (!split) throw InvalidArgument("--split must be train, validation or test");
    if (split->size() == 0) throw InvalidArgument("the " + o.split + " split is empty");
    text = format_record({{"split", o.split}}) + "\n" +
           report_text(evaluate(archive.model, *split, ds.classes));
  } else {
    const std::vector<TrainingSequence>* seqs = nullptr;
    if (o.split == "train") seqs = &data.train;
    if (o.split == "validation") seqs = &data.validation;
    if (o.split == "test") seqs = &data.test;
    if (!seqs) throw InvalidArgument("--split must be train, validation or test");
    if (seqs->empty()) throw InvalidArgument("the " + o.split + " split is empty");
    text = format_record({{"split", o.split},
                          {"sequences", std::to_string(seqs->size())},
                          {"one_step_mse", format_double(mse_loss(archive.model, *seqs))}}) +
           "\n";
  }
  write_text_atomic(fs::path(o.out) / "evaluation.txt", text);
  std::cout << text;
  return kOk;
}

int cmd_predict(const Options& o) {
  const ModelArchive archive = load_archive(model_path(o));
  if (archive.task != Task::kPredict) {
    throw InvalidArgument("predict needs a model trained for the predict task");
  }
  if (o.trajectory.empty()) throw InvalidArgument("predict needs --trajectory <csv>");
  const Trajectory traj = read_trajectory_csv(o.trajectory);
  if (traj.length() < 2) throw InvalidArgument("trajectory needs at least two points");
  const double data_step = traj.timestamps[1] - traj.timestamps[0];
  const double step = o.step.value_or(archive.step_minutes);
  if (std::abs(step - archive.step_minutes) > 1e-9 || std::abs(data_step - step) > 1e-9) {
    throw InvalidArgument("step mismatch: model expects " + format_double(archive.step_minutes) +
                          " min, requested " + format_double(step) + " min, trajectory has " +
                          format_double(data_step) + " min");
  }
  const std::size_t steps = horizon_steps(o.horizon, step);
  if (archive.normalization.names != traj.channel_names) {
    throw InvalidArgument("trajectory channels differ from the model's normalization record");
  }
  const auto in = channel_indices(traj, archive.input_channels);
  const auto outc = channel_indices(traj, archive.output_channels);
  const AutoregressiveMapping mapping =
      channel_mapping(archive.input_channels, archive.output_channels);
  std::vector<Vector> inputs;
  for (std::size_t k = 0; k < traj.length(); ++k) {
    const Vector z = archive.normalization.apply(traj.at(k));
    Vector u;
    for (std::size_t i : in) u.push_back(z[i]);
    inputs.push_back(std::move(u));
  }

  std::string csv = "anchor_minute,lead_minute,minute";
  for (const auto& ch : archive.output_channels) csv += "," + ch + "_pred," + ch + "_true";
  csv += "\n";
  std::size_t anchors = 0;
  for (std::size_t a = 0; a + steps < traj.length(); ++a) {
    HorizonPredictor p(archive.model, mapping);
    p.prime(std::span<const Vector>(inputs).first(a + 1));
    const auto preds = p.advance(steps);
    for (std::size_t k = 0; k < steps; ++k) {
      const std::size_t t = a + 1 + k;
      csv += format_double(traj.timestamps[a]) + "," + format_double((k + 1) * step) + "," +
             format_double(traj.timestamps[t]);
      for (std::size_t j = 0; j < outc.size(); ++j) {
        const std::size_t c = outc[j];
        const double raw = preds[k][j] * archive.normalization.std[c] + archive.normalization.mean[c];
        csv += "," + format_double(raw) + "," + format_double(traj.channels[c][t]);
      }
      csv += "\n";
    }
    ++anchors;
  }
  write_text_atomic(fs::path(o.out) / "predictions.csv", csv);
  std::cout << anchors << " anchors x " << steps << " steps written to "
            << (fs::path(o.out) / "predictions.csv").string() << "\n";
  return kOk;
}

int cmd_diagnose(const Options& o) {
  const ModelArchive archive = load_archive(model_path(o));
  if (archive.task != Task::kClassify) {
    throw InvalidArgument("diagnose needs a model trained for the classify task");
  }
  if (o.trajectory.empty()) throw InvalidArgument("diagnose needs --trajectory <csv>");
  Trajectory traj = read_trajectory_csv(o.trajectory);
  // Throws naming the first channel the model needs but the file lacks.
  if (traj.channel_names != archive.input_channels) {
    traj = select_channels(traj, archive.input_channels);
  }
  if (traj.length() > 1 &&
      std::abs(traj.timestamps[1] - traj.timestamps[0] - archive.step_minutes) > 1e-9) {
    throw InvalidArgument("sampling step mismatch: model expects " +
                          format_double(archive.step_minutes) + " min");
  }
  ClassTable classes{archive.class_names};
  const std::size_t normal = classes.index_of(kNormalFault);
  for (auto sample : window_samples(traj, archive.window, classes)) {
    sample.features = archive.normalization.apply(sample.features);
    const DiagnosisVerdict v = classify(archive.model, sample, classes);
    std::cout << format_record(
                     {{"window_start", format_double(sample.window_start_minute)},
                      {"window_end",
                       format_double(sample.window_start_minute + archive.window.window_minutes)},
                      {"class", v.class_name},
                      {"confidence", format_double(v.confidence)},
                      {"detection", to_string(detect(v, normal, o.threshold))}})
              << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal neuro-fuzzy fault diagnosis toolkit"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "Run config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Master seed (overrides the config)");
  app.add_option("--out", o.out, "Output directory")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "Simulate the configured scenarios to CSV");
  auto* init = app.add_subcommand("init", "Cluster the training data into an initial model");
  auto* trainc = app.add_subcommand("train", "Train a model by gradient descent");
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients");
  auto* evaluatec = app.add_subcommand("evaluate", "Score a model on a data split");
  auto* predict = app.add_subcommand("predict", "Recursive multi-step output prediction");
  auto* diagnose = app.add_subcommand("diagnose", "Stream per-window verdicts for a trajectory");

  for (auto* sub : {init, trainc, gradcheck, evaluatec}) {
    sub->add_option("--data", o.data, "Directory written by simulate (default: simulate in memory)");
  }
  for (auto* sub : {trainc, gradcheck, evaluatec, predict, diagnose}) {
    sub->add_option("--model", o.model, "Model archive (default: <out>/model.json)");
  }
  for (auto* sub : {predict, diagnose}) {
    sub->add_option("--trajectory", o.trajectory, "Trajectory CSV")->required();
  }
  init->add_option("--rules", o.rules, "Fixed rule count instead of the validity scan");
  trainc->add_option("--epochs", o.epochs, "Override train.epochs");
  trainc->add_option("--lr", o.learning_rate, "Override train.learning_rate");
  gradcheck->add_option("--fd-step", o.fd_step, "Central difference step")->capture_default_str();
  evaluatec->add_option("--split", o.split, "train, validation or test")->capture_default_str();
  predict->add_option("--horizon", o.horizon, "Prediction horizon in minutes")->required();
  predict->add_option("--step", o.step, "Prediction step in minutes (default: model step)");
  diagnose->add_option("--threshold", o.threshold, "Confidence needed to flag ABNORMAL")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*simulate) return cmd_simulate(o);
    if (*init) return cmd_init(o);
    if (*trainc) return cmd_train(o);
    if (*gradcheck) return cmd_gradcheck(o);
    if (*evaluatec) return cmd_evaluate(o);
    if (*predict) return cmd_predict(o);
    if (*diagnose) return cmd_diagnose(o);
  } catch (const Divergence& e) {
    std::cerr << "error: " << e.what() << " (last finite epoch " << e.last_finite_epoch()
              << ")\n";
    return kDiverged;
  } catch (const NumericOverflow& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
  return kInvalid;
}
