#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tnfs/model.hpp"
#include "tnfs/plant.hpp"

namespace tnfs {

struct DiagnosisVerdict {
  std::size_t class_index = 0;
  std::string class_name;
  Vector score_vector;      // raw model outputs at the last window point
  double confidence = 0.0;  // largest softmax probability of the scores
};

// argmax with ties resolved toward the lower index.
std::size_t argmax(std::span<const double> scores);
double softmax_confidence(std::span<const double> scores);

// Splits the time-major window features into T input vectors of length M and
// rolls the model from its initial context; the last output vector holds the
// class scores.
DiagnosisVerdict classify(const TnfsModel& model, const WindowedSample& sample,
                          const ClassTable& classes);

// Time-major window features -> rollout input sequence.
std::vector<Vector> window_inputs(std::span<const double> features, std::size_t input_dim);

enum class Detection { kNormal, kAbnormal };

std::string to_string(Detection d);

Detection detect(const DiagnosisVerdict& verdict, std::size_t normal_class, double threshold);

// Maps model outputs back onto model inputs for recursive prediction:
// feeds[p] is the input index that output p overwrites, if any. Inputs not
// fed by an output hold their last observed value.
struct AutoregressiveMapping {
  std::vector<std::optional<std::size_t>> feeds;
};

// Recursive multi-step predictor. prime() runs the model through observed
// inputs to build the context state; every advance() step emits the current
// one-step-ahead output and then feeds it forward.
class HorizonPredictor {
 public:
  HorizonPredictor(const TnfsModel& model, AutoregressiveMapping mapping);

  void prime(std::span<const Vector> history);
  std::vector<Vector> advance(std::size_t steps);

  const Vector& state() const { return state_; }

 private:
  const TnfsModel& model_;
  AutoregressiveMapping mapping_;
  Vector state_;
  Vector last_input_;
  Vector pending_;
  bool primed_ = false;
};

// horizon_minutes / step_minutes future output vectors after `history`
// (model-space input vectors, oldest first).
std::vector<Vector> predict_horizon(const TnfsModel& model, std::span<const Vector> history,
                                    double horizon_minutes, double step_minutes,
                                    const AutoregressiveMapping& mapping);

// Steps in a horizon; throws unless horizon is a non-negative multiple of step.
std::size_t horizon_steps(double horizon_minutes, double step_minutes);

struct EvaluationReport {
  std::vector<std::string> class_names;
  std::vector<std::vector<std::size_t>> confusion_matrix;  // [true][predicted]
  double accuracy = 0.0;
  std::vector<std::optional<double>> recall;  // none for classes without samples
  std::optional<double> mean_detection_delay_minutes;
  std::size_t faulty_scenarios = 0;
  std::size_t detected_scenarios = 0;
  std::size_t sample_count = 0;
};

// Detection delay per faulty scenario: minutes from onset to the start of the
// first fault-labeled window classified as its fault (clamped at 0), averaged
// over detected scenarios. Needs split.origins.
EvaluationReport evaluate(const TnfsModel& model, const DatasetSplit& split,
                          const ClassTable& classes);

// Same report from precomputed predictions.
EvaluationReport summarize(const DatasetSplit& split, std::span<const std::size_t> predicted,
                           const ClassTable& classes);

}  // namespace tnfs
