#include "tnfs/diagnosis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tnfs/errors.hpp"

namespace tnfs {

std::size_t argmax(std::span<const double> scores) {
  if (scores.empty()) throw InvalidArgument("argmax of an empty score vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

double softmax_confidence(std::span<const double> scores) {
  const double top = scores[argmax(scores)];
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - top);
  return 1.0 / sum;
}

std::vector<Vector> window_inputs(std::span<const double> features, std::size_t input_dim) {
  if (input_dim == 0 || features.empty() || features.size() % input_dim != 0) {
    throw InvalidArgument("window of " + std::to_string(features.size()) +
                          " features does not split into input vectors of length " +
                          std::to_string(input_dim));
  }
  std::vector<Vector> inputs;
  for (std::size_t off = 0; off < features.size(); off += input_dim) {
    inputs.emplace_back(features.begin() + static_cast<std::ptrdiff_t>(off),
                        features.begin() + static_cast<std::ptrdiff_t>(off + input_dim));
  }
  return inputs;
}

DiagnosisVerdict classify(const TnfsModel& model, const WindowedSample& sample,
                          const ClassTable& classes) {
  if (classes.size() != model.dims.output) {
    throw InvalidArgument("model has " + std::to_string(model.dims.output) +
                          " outputs but the class table has " + std::to_string(classes.size()) +
                          " classes");
  }
  const auto inputs = window_inputs(sample.features, model.dims.input);
  const Rollout r = rollout(model, inputs);
  DiagnosisVerdict v;
  v.score_vector = r.outputs.back();
  v.class_index = argmax(v.score_vector);
  v.class_name = classes.names[v.class_index];
  v.confidence = softmax_confidence(v.score_vector);
  return v;
}

std::string to_string(Detection d) { return d == Detection::kAbnormal ? "ABNORMAL" : "NORMAL"; }

Detection detect(const DiagnosisVerdict& verdict, std::size_t normal_class, double threshold) {
  if (verdict.class_index != normal_class && verdict.confidence >= threshold) {
    return Detection::kAbnormal;
  }
  return Detection::kNormal;
}

HorizonPredictor::HorizonPredictor(const TnfsModel& model, AutoregressiveMapping mapping)
    : model_(model), mapping_(std::move(mapping)) {
  if (mapping_.feeds.empty()) mapping_.feeds.assign(model.dims.output, std::nullopt);
  if (mapping_.feeds.size() != model.dims.output) {
    throw InvalidArgument("autoregressive mapping lists " + std::to_string(mapping_.feeds.size()) +
                          " outputs, model has " + std::to_string(model.dims.output));
  }
  for (const auto& f : mapping_.feeds) {
    if (f && *f >= model.dims.input) {
      throw InvalidArgument("autoregressive mapping targets input " + std::to_string(*f) +
                            " of " + std::to_string(model.dims.input));
    }
  }
}

void HorizonPredictor::prime(std::span<const Vector> history) {
  if (history.empty()) throw InvalidArgument("prediction needs at least one history point");
  const Rollout r = rollout(model_, history);
  state_ = r.states.back();
  pending_ = r.outputs.back();
  last_input_ = history.back();
  primed_ = true;
}

std::vector<Vector> HorizonPredictor::advance(std::size_t steps) {
  if (!primed_) throw InvalidArgument("HorizonPredictor::advance before prime");
  std::vector<Vector> out;
  out.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    out.push_back(pending_);
    Vector u = last_input_;
    for (std::size_t p = 0; p < mapping_.feeds.size(); ++p) {
      if (mapping_.feeds[p]) u[*mapping_.feeds[p]] = pending_[p];
    }
    state_ = state_transition(model_, state_, u);
    pending_ = output_projection(model_, state_);
    last_input_ = std::move(u);
  }
  return out;
}

std::size_t horizon_steps(double horizon_minutes, double step_minutes) {
  if (!(step_minutes > 0.0)) throw InvalidArgument("prediction step must be positive");
  if (!(horizon_minutes >= 0.0)) throw InvalidArgument("prediction horizon must be >= 0");
  const double q = horizon_minutes / step_minutes;
  const double r = std::round(q);
  if (std::abs(q - r) > 1e-9 * std::max(1.0, q)) {
    throw InvalidArgument("horizon " + std::to_string(horizon_minutes) +
                          " is not a multiple of step " + std::to_string(step_minutes));
  }
  return static_cast<std::size_t>(r);
}

std::vector<Vector> predict_horizon(const TnfsModel& model, std::span<const Vector> history,
                                    double horizon_minutes, double step_minutes,
                                    const AutoregressiveMapping& mapping) {
  const std::size_t steps = horizon_steps(horizon_minutes, step_minutes);
  HorizonPredictor predictor(model, mapping);
  predictor.prime(history);
  return predictor.advance(steps);
}

EvaluationReport summarize(const DatasetSplit& split, std::span<const std::size_t> predicted,
                           const ClassTable& classes) {
  if (predicted.size() != split.samples.size()) {
    throw InvalidArgument("prediction count does not match split size");
  }
  const std::size_t k = classes.size();
  EvaluationReport rep;
  rep.class_names = classes.names;
  rep.sample_count = split.samples.size();
  rep.confusion_matrix.assign(k, std::vector<std::size_t>(k, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const std::size_t truth = split.samples[i].label;
    if (truth >= k || predicted[i] >= k) throw InvalidArgument("class index out of range");
    ++rep.confusion_matrix[truth][predicted[i]];
    if (truth == predicted[i]) ++correct;
  }
  rep.accuracy = rep.sample_count ? static_cast<double>(correct) / rep.sample_count : 0.0;
  rep.recall.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t row = 0;
    for (auto v : rep.confusion_matrix[c]) row += v;
    if (row > 0) rep.recall[c] = static_cast<double>(rep.confusion_matrix[c][c]) / row;
  }

  if (split.origins.size() == split.samples.size() && !split.origins.empty()) {
    // scenario -> (onset, earliest correct fault window start)
    std::map<std::size_t, std::pair<double, std::optional<double>>> scenarios;
    for (std::size_t i = 0; i < split.samples.size(); ++i) {
      const auto& origin = split.origins[i];
      if (!origin.onset_minute) continue;
      auto [it, inserted] = scenarios.try_emplace(
          origin.scenario_index, *origin.onset_minute, std::optional<double>{});
      const auto& s = split.samples[i];
      const auto fault_class = classes.find(origin.fault_id);
      if (fault_class && s.label == *fault_class && predicted[i] == *fault_class) {
        auto& first = it->second.second;
        if (!first || s.window_start_minute < *first) first = s.window_start_minute;
      }
    }
    rep.faulty_scenarios = scenarios.size();
    double total = 0.0;
    for (const auto& [idx, entry] : scenarios) {
      if (!entry.second) continue;
      total += std::max(0.0, *entry.second - entry.first);
      ++rep.detected_scenarios;
    }
    if (rep.detected_scenarios > 0) rep.mean_detection_delay_minutes = total / rep.detected_scenarios;
  }
  return rep;
}

EvaluationReport evaluate(const TnfsModel& model, const DatasetSplit& split,
                          const ClassTable& classes) {
  if (split.samples.empty()) throw InvalidArgument("cannot evaluate an empty split");
  std::vector<std::size_t> predicted;
  predicted.reserve(split.samples.size());
  for (const auto& s : split.samples) predicted.push_back(classify(model, s, classes).class_index);
  return summarize(split, predicted, classes);
}

}  // namespace tnfs
