#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tnfs/model.hpp"

namespace tnfs {

struct TrainingSequence {
  std::vector<Vector> inputs;   // T vectors of length M
  std::vector<Vector> targets;  // T vectors of length P
  std::optional<Vector> x_init;
};

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 100;
  std::optional<double> grad_clip_norm = 10.0;
  std::uint64_t shuffle_seed = 0;
  // Fraction of sequences held out (seeded shuffle) and reported as
  // validation_mse; they never contribute to the gradient.
  double validation_fraction = 0.0;
  bool train_output_matrix = true;
};

void validate(const TrainConfig& config);

struct TermGradient {
  double center = 0.0;
  double width = 0.0;
};

struct RuleGradient {
  std::vector<TermGradient> state_terms;
  std::vector<TermGradient> input_terms;
  Matrix A;
  Matrix B;
};

// d(loss)/d(parameter) laid out like the model it was taken from.
struct GradientSet {
  std::vector<RuleGradient> rules;
  Matrix C;

  static GradientSet zeros_like(const TnfsModel& model);

  // Same ordering as flatten_parameters().
  Vector flatten() const;
  double norm() const;
  void scale(double factor);
};

// Trainable scalars in a fixed order: per rule, (center, width) of each
// state term then each input term, A row-major, B row-major; finally C.
Vector flatten_parameters(const TnfsModel& model);
void assign_parameters(TnfsModel& model, std::span<const double> values);
std::size_t parameter_count(const TnfsModel& model);

struct LossReport {
  int epoch = 0;
  double train_mse = 0.0;
  std::optional<double> validation_mse;
};

// Mean over every (sequence, step) pair of ||y_pred - y_target||^2 / P.
double mse_loss(const TnfsModel& model, std::span<const TrainingSequence> data);

// Exact gradient of mse_loss by reverse accumulation through the whole
// unrolled recurrence of every sequence.
GradientSet analytic_gradients(const TnfsModel& model, std::span<const TrainingSequence> data);

// Loss and gradient from one forward/backward sweep.
struct LossAndGradient {
  double loss = 0.0;
  GradientSet gradient;
};
LossAndGradient loss_and_gradient(const TnfsModel& model,
                                  std::span<const TrainingSequence> data);

// Central differences on every trainable scalar, with the loss evaluated in
// long double. Width probes are clamped to kWidthFloor and divided by the
// actual displacement.
GradientSet finite_difference_gradients(const TnfsModel& model,
                                        std::span<const TrainingSequence> data, double step);

struct TrainResult {
  TnfsModel model;
  std::vector<LossReport> history;  // one entry per epoch, loss before the step
};

// Full-batch gradient descent. Deterministic for a given config and data.
TrainResult train(TnfsModel model, std::span<const TrainingSequence> data,
                  const TrainConfig& config);

// As above with an explicit validation set; config.validation_fraction is
// ignored.
TrainResult train(TnfsModel model, std::span<const TrainingSequence> data,
                  const TrainConfig& config, std::span<const TrainingSequence> validation);

// Default consequent initialization: A^r = 0.5 I + U(-0.01, 0.01),
// B^r and C entries U(-0.1, 0.1).
void initialize_consequents(TnfsModel& model, std::uint64_t seed);

// Antecedent centers U(-center_range, center_range), widths
// U(width_min, width_max), consequents per initialize_consequents.
struct RandomModelOptions {
  double center_range = 1.0;
  double width_min = 0.5;
  double width_max = 1.5;
};
TnfsModel make_random_model(Dimensions dims, std::size_t rule_count, std::uint64_t seed,
                            const RandomModelOptions& options = {});

// Largest per-parameter relative difference, with denominator
// max(|a|, |b|, floor).
double max_relative_error(const GradientSet& a, const GradientSet& b, double floor = 1e-8);

}  // namespace tnfs
