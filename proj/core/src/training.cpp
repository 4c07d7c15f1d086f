#include "tnfs/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "tnfs/errors.hpp"
#include "tnfs/seed.hpp"

namespace tnfs {

namespace {

struct StepCache {
  Vector prev_state;
  StepTrace trace;
  Vector output;
};

void check_sequence(const TnfsModel& model, const TrainingSequence& seq, std::size_t index) {
  const std::string tag = "sequence " + std::to_string(index);
  if (seq.inputs.empty()) throw InvalidArgument(tag + ": empty");
  if (seq.inputs.size() != seq.targets.size()) {
    throw InvalidArgument(tag + ": " + std::to_string(seq.inputs.size()) + " inputs vs " +
                          std::to_string(seq.targets.size()) + " targets");
  }
  for (std::size_t t = 0; t < seq.inputs.size(); ++t) {
    if (seq.inputs[t].size() != model.dims.input || seq.targets[t].size() != model.dims.output) {
      throw InvalidArgument(tag + " step " + std::to_string(t) + ": expected input length " +
                            std::to_string(model.dims.input) + " and target length " +
                            std::to_string(model.dims.output) + ", found " +
                            std::to_string(seq.inputs[t].size()) + " and " +
                            std::to_string(seq.targets[t].size()));
    }
    if (!all_finite(seq.inputs[t]) || !all_finite(seq.targets[t])) {
      throw InvalidArgument(tag + " step " + std::to_string(t) + ": non-finite values");
    }
  }
  if (seq.x_init && seq.x_init->size() != model.dims.state) {
    throw InvalidArgument(tag + ": x_init length " + std::to_string(seq.x_init->size()) +
                          ", model state dimension " + std::to_string(model.dims.state));
  }
}

std::size_t total_steps(const TnfsModel& model, std::span<const TrainingSequence> data) {
  if (data.empty()) throw InvalidArgument("training data is empty");
  std::size_t steps = 0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    check_sequence(model, data[s], s);
    steps += data[s].inputs.size();
  }
  return steps;
}

// Forward pass of one sequence keeping every intermediate; returns the summed
// squared error over its steps.
double forward(const TnfsModel& model, const TrainingSequence& seq, std::size_t index,
               std::vector<StepCache>* cache) {
  Vector state = seq.x_init ? *seq.x_init : model.x0;
  double sq = 0.0;
  if (cache) cache->resize(seq.inputs.size());
  for (std::size_t t = 0; t < seq.inputs.size(); ++t) {
    StepTrace trace = trace_step(model, state, seq.inputs[t]);
    if (!all_finite(trace.next_state)) {
      throw NumericOverflow("rollout of sequence " + std::to_string(index) +
                                " overflowed at step " + std::to_string(t),
                            index);
    }
    Vector y = output_projection(model, trace.next_state);
    for (std::size_t p = 0; p < y.size(); ++p) {
      const double e = y[p] - seq.targets[t][p];
      sq += e * e;
    }
    if (cache) {
      auto& c = (*cache)[t];
      c.prev_state = std::move(state);
      state = trace.next_state;
      c.trace = std::move(trace);
      c.output = std::move(y);
    } else {
      state = std::move(trace.next_state);
    }
  }
  if (!std::isfinite(sq)) {
    throw NumericOverflow("squared error of sequence " + std::to_string(index) + " overflowed",
                          index);
  }
  return sq;
}

void accumulate_term(const GaussianTerm& term, double value, double weight, TermGradient& g,
                     double* g_value) {
  const double d = value - term.center;
  const double inv_s2 = 1.0 / (term.width * term.width);
  g.center += weight * d * inv_s2;
  g.width += weight * d * d * inv_s2 / term.width;
  if (g_value) *g_value -= weight * d * inv_s2;
}

void backward(const TnfsModel& model, const TrainingSequence& seq,
              const std::vector<StepCache>& cache, double scale, GradientSet& grad) {
  const std::size_t n = model.dims.state;
  const std::size_t rules = model.rules.size();
  Vector g_state(n, 0.0);
  Vector g_prev(n);
  Vector dy(model.dims.output);
  Vector g_h(rules);
  Vector local(n);

  for (std::size_t t = seq.inputs.size(); t-- > 0;) {
    const auto& c = cache[t];
    const auto& u = seq.inputs[t];
    const auto& x_prev = c.prev_state;
    const auto& h = c.trace.normalized;

    for (std::size_t p = 0; p < dy.size(); ++p) dy[p] = scale * (c.output[p] - seq.targets[t][p]);
    add_outer(grad.C, 1.0, dy, c.trace.next_state);
    multiply_transpose_add(model.C, dy, g_state);

    std::fill(g_prev.begin(), g_prev.end(), 0.0);
    for (std::size_t r = 0; r < rules; ++r) {
      const auto& cons = model.rules[r].consequent;
      add_outer(grad.rules[r].A, h[r], g_state, x_prev);
      add_outer(grad.rules[r].B, h[r], g_state, u);
      // g_prev += h_r * A_r^T g_state
      for (std::size_t i = 0; i < n; ++i) {
        const double gi = h[r] * g_state[i];
        for (std::size_t j = 0; j < n; ++j) g_prev[j] += cons.A(i, j) * gi;
      }
      if (!c.trace.uniform_fallback) {
        std::fill(local.begin(), local.end(), 0.0);
        multiply_add(cons.A, x_prev, local);
        multiply_add(cons.B, u, local);
        g_h[r] = dot(g_state, local);
      }
    }

    if (!c.trace.uniform_fallback) {
      double mean_g = 0.0;
      for (std::size_t r = 0; r < rules; ++r) mean_g += h[r] * g_h[r];
      for (std::size_t r = 0; r < rules; ++r) {
        // f_r * dL/df_r; the 1/S factor of the normalization cancels.
        const double w = h[r] * (g_h[r] - mean_g);
        if (w == 0.0) continue;
        const auto& ante = model.rules[r].antecedent;
        auto& g = grad.rules[r];
        for (std::size_t i = 0; i < n; ++i) {
          accumulate_term(ante.state_terms[i], x_prev[i], w, g.state_terms[i], &g_prev[i]);
        }
        for (std::size_t j = 0; j < u.size(); ++j) {
          accumulate_term(ante.input_terms[j], u[j], w, g.input_terms[j], nullptr);
        }
      }
    }
    g_state.swap(g_prev);
  }
}

std::vector<bool> width_mask(const TnfsModel& model) {
  std::vector<bool> mask;
  mask.reserve(parameter_count(model));
  const std::size_t terms = model.dims.state + model.dims.input;
  const std::size_t matrix = model.dims.state * (model.dims.state + model.dims.input);
  for (std::size_t r = 0; r < model.rules.size(); ++r) {
    for (std::size_t k = 0; k < terms; ++k) {
      mask.push_back(false);
      mask.push_back(true);
    }
    mask.insert(mask.end(), matrix, false);
  }
  mask.insert(mask.end(), model.C.size(), false);
  return mask;
}

void clamp_widths(TnfsModel& model) {
  for (auto& rule : model.rules) {
    for (auto& t : rule.antecedent.state_terms) t.width = std::max(t.width, kWidthFloor);
    for (auto& t : rule.antecedent.input_terms) t.width = std::max(t.width, kWidthFloor);
  }
}

}  // namespace

void validate(const TrainConfig& config) {
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
    throw InvalidArgument("learning_rate must be finite and non-negative");
  }
  if (config.epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (config.grad_clip_norm && !(*config.grad_clip_norm > 0.0)) {
    throw InvalidArgument("grad_clip_norm must be positive when set");
  }
  if (!(config.validation_fraction >= 0.0 && config.validation_fraction < 1.0)) {
    throw InvalidArgument("validation_fraction must lie in [0, 1)");
  }
}

GradientSet GradientSet::zeros_like(const TnfsModel& model) {
  GradientSet g;
  g.rules.resize(model.rules.size());
  for (auto& r : g.rules) {
    r.state_terms.assign(model.dims.state, TermGradient{});
    r.input_terms.assign(model.dims.input, TermGradient{});
    r.A = Matrix(model.dims.state, model.dims.state);
    r.B = Matrix(model.dims.state, model.dims.input);
  }
  g.C = Matrix(model.dims.output, model.dims.state);
  return g;
}

Vector GradientSet::flatten() const {
  Vector out;
  for (const auto& r : rules) {
    for (const auto& t : r.state_terms) {
      out.push_back(t.center);
      out.push_back(t.width);
    }
    for (const auto& t : r.input_terms) {
      out.push_back(t.center);
      out.push_back(t.width);
    }
    out.insert(out.end(), r.A.values().begin(), r.A.values().end());
    out.insert(out.end(), r.B.values().begin(), r.B.values().end());
  }
  out.insert(out.end(), C.values().begin(), C.values().end());
  return out;
}

double GradientSet::norm() const {
  const Vector flat = flatten();
  return std::sqrt(dot(flat, flat));
}

void GradientSet::scale(double factor) {
  for (auto& r : rules) {
    for (auto& t : r.state_terms) {
      t.center *= factor;
      t.width *= factor;
    }
    for (auto& t : r.input_terms) {
      t.center *= factor;
      t.width *= factor;
    }
    for (double& v : r.A.values()) v *= factor;
    for (double& v : r.B.values()) v *= factor;
  }
  for (double& v : C.values()) v *= factor;
}

std::size_t parameter_count(const TnfsModel& model) {
  const auto [n, m, p] = model.dims;
  return model.rules.size() * (2 * (n + m) + n * n + n * m) + p * n;
}

Vector flatten_parameters(const TnfsModel& model) {
  Vector out;
  out.reserve(parameter_count(model));
  for (const auto& r : model.rules) {
    for (const auto& t : r.antecedent.state_terms) {
      out.push_back(t.center);
      out.push_back(t.width);
    }
    for (const auto& t : r.antecedent.input_terms) {
      out.push_back(t.center);
      out.push_back(t.width);
    }
    out.insert(out.end(), r.consequent.A.values().begin(), r.consequent.A.values().end());
    out.insert(out.end(), r.consequent.B.values().begin(), r.consequent.B.values().end());
  }
  out.insert(out.end(), model.C.values().begin(), model.C.values().end());
  return out;
}

void assign_parameters(TnfsModel& model, std::span<const double> values) {
  if (values.size() != parameter_count(model)) {
    throw InvalidArgument("assign_parameters: expected " + std::to_string(parameter_count(model)) +
                          " values, found " + std::to_string(values.size()));
  }
  std::size_t k = 0;
  for (auto& r : model.rules) {
    for (auto& t : r.antecedent.state_terms) {
      t.center = values[k++];
      t.width = values[k++];
    }
    for (auto& t : r.antecedent.input_terms) {
      t.center = values[k++];
      t.width = values[k++];
    }
    for (double& v : r.consequent.A.values()) v = values[k++];
    for (double& v : r.consequent.B.values()) v = values[k++];
  }
  for (double& v : model.C.values()) v = values[k++];
}

double mse_loss(const TnfsModel& model, std::span<const TrainingSequence> data) {
  const std::size_t steps = total_steps(model, data);
  double sq = 0.0;
  for (std::size_t s = 0; s < data.size(); ++s) sq += forward(model, data[s], s, nullptr);
  return sq / static_cast<double>(steps * model.dims.output);
}

LossAndGradient loss_and_gradient(const TnfsModel& model,
                                  std::span<const TrainingSequence> data) {
  const std::size_t steps = total_steps(model, data);
  const double denom = static_cast<double>(steps * model.dims.output);
  LossAndGradient out{0.0, GradientSet::zeros_like(model)};
  std::vector<StepCache> cache;
  double sq = 0.0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    sq += forward(model, data[s], s, &cache);
    backward(model, data[s], cache, 2.0 / denom, out.gradient);
  }
  out.loss = sq / denom;
  if (!all_finite(out.gradient.flatten())) {
    throw NumericOverflow("gradient contains non-finite entries", 0);
  }
  return out;
}

GradientSet analytic_gradients(const TnfsModel& model, std::span<const TrainingSequence> data) {
  return loss_and_gradient(model, data).gradient;
}

namespace {

// Loss evaluated in extended precision. The finite-difference oracle
// subtracts two nearly equal losses; doing that in long double keeps the
// cancellation noise far below the gradients it is compared against.
long double precise_loss(const TnfsModel& model, std::span<const TrainingSequence> data) {
  using Ld = long double;
  const std::size_t n = model.dims.state;
  const std::size_t m = model.dims.input;
  const std::size_t p = model.dims.output;
  const std::size_t rules = model.rules.size();
  auto mu = [](const GaussianTerm& term, Ld v) {
    const Ld d = v - static_cast<Ld>(term.center);
    const Ld w = term.width;
    return std::exp(-d * d / (2.0L * w * w));
  };
  Ld sq = 0.0L;
  std::size_t steps = 0;
  std::vector<Ld> x(n), next(n), f(rules);
  for (const auto& seq : data) {
    for (std::size_t i = 0; i < n; ++i) x[i] = seq.x_init ? (*seq.x_init)[i] : model.x0[i];
    for (std::size_t t = 0; t < seq.inputs.size(); ++t) {
      const Vector& u = seq.inputs[t];
      Ld total = 0.0L;
      for (std::size_t r = 0; r < rules; ++r) {
        const auto& a = model.rules[r].antecedent;
        Ld prod = 1.0L;
        for (std::size_t i = 0; i < n; ++i) prod *= mu(a.state_terms[i], x[i]);
        for (std::size_t j = 0; j < m; ++j) prod *= mu(a.input_terms[j], u[j]);
        f[r] = prod;
        total += prod;
      }
      std::fill(next.begin(), next.end(), 0.0L);
      for (std::size_t r = 0; r < rules; ++r) {
        const Ld h = total < kUnderflowEps ? 1.0L / static_cast<Ld>(rules) : f[r] / total;
        const auto& c = model.rules[r].consequent;
        for (std::size_t i = 0; i < n; ++i) {
          Ld v = 0.0L;
          for (std::size_t k = 0; k < n; ++k) v += c.A(i, k) * x[k];
          for (std::size_t k = 0; k < m; ++k) v += c.B(i, k) * static_cast<Ld>(u[k]);
          next[i] += h * v;
        }
      }
      x.swap(next);
      for (std::size_t i = 0; i < p; ++i) {
        Ld y = 0.0L;
        for (std::size_t k = 0; k < n; ++k) y += model.C(i, k) * x[k];
        const Ld e = y - static_cast<Ld>(seq.targets[t][i]);
        sq += e * e;
      }
      ++steps;
    }
  }
  return sq / static_cast<Ld>(steps * p);
}

}  // namespace

GradientSet finite_difference_gradients(const TnfsModel& model,
                                        std::span<const TrainingSequence> data, double step) {
  if (!(step > 0.0)) throw InvalidArgument("finite difference step must be positive");
  total_steps(model, data);
  const Vector theta = flatten_parameters(model);
  const std::vector<bool> is_width = width_mask(model);
  Vector grad(theta.size());
  TnfsModel probe = model;
  Vector shifted = theta;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    double plus = theta[k] + step;
    double minus = theta[k] - step;
    if (is_width[k]) {
      plus = std::max(plus, kWidthFloor);
      minus = std::max(minus, kWidthFloor);
    }
    shifted[k] = plus;
    assign_parameters(probe, shifted);
    const long double loss_plus = precise_loss(probe, data);
    shifted[k] = minus;
    assign_parameters(probe, shifted);
    const long double loss_minus = precise_loss(probe, data);
    shifted[k] = theta[k];
    grad[k] = static_cast<double>((loss_plus - loss_minus) / (plus - minus));
  }
  GradientSet out = GradientSet::zeros_like(model);
  // Reuse the parameter layout to scatter the flat vector back.
  TnfsModel carrier = model;
  assign_parameters(carrier, grad);
  for (std::size_t r = 0; r < model.rules.size(); ++r) {
    const auto& src = carrier.rules[r];
    auto& dst = out.rules[r];
    for (std::size_t i = 0; i < src.antecedent.state_terms.size(); ++i) {
      dst.state_terms[i] = {src.antecedent.state_terms[i].center,
                            src.antecedent.state_terms[i].width};
    }
    for (std::size_t j = 0; j < src.antecedent.input_terms.size(); ++j) {
      dst.input_terms[j] = {src.antecedent.input_terms[j].center,
                            src.antecedent.input_terms[j].width};
    }
    dst.A = src.consequent.A;
    dst.B = src.consequent.B;
  }
  out.C = carrier.C;
  return out;
}

TrainResult train(TnfsModel model, std::span<const TrainingSequence> data,
                  const TrainConfig& config) {
  validate(config);
  if (data.empty()) throw InvalidArgument("training data is empty");
  std::vector<TrainingSequence> fit;
  std::vector<TrainingSequence> held_out;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t n_val = 0;
  if (config.validation_fraction > 0.0 && data.size() > 1) {
    std::mt19937_64 rng(derive_seed(config.shuffle_seed, "train/validation-split"));
    std::shuffle(order.begin(), order.end(), rng);
    n_val = static_cast<std::size_t>(
        std::llround(config.validation_fraction * static_cast<double>(data.size())));
    n_val = std::min(n_val, data.size() - 1);
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? held_out : fit).push_back(data[order[i]]);
  }
  return train(std::move(model), fit, config, held_out);
}

TrainResult train(TnfsModel model, std::span<const TrainingSequence> fit,
                  const TrainConfig& config, std::span<const TrainingSequence> held_out) {
  validate(config);
  validate(model);
  if (fit.empty()) throw InvalidArgument("training data is empty");

  TrainResult result;
  result.history.reserve(static_cast<std::size_t>(config.epochs));
  int last_finite = -1;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    LossAndGradient lg;
    try {
      lg = loss_and_gradient(model, fit);
    } catch (const NumericOverflow& e) {
      throw Divergence(std::string("training diverged at epoch ") + std::to_string(epoch) +
                           ": " + e.what(),
                       last_finite);
    }
    if (!std::isfinite(lg.loss)) {
      throw Divergence("training loss became non-finite at epoch " + std::to_string(epoch),
                       last_finite);
    }
    last_finite = epoch;

    LossReport report{epoch, lg.loss, std::nullopt};
    if (!held_out.empty()) {
      try {
        report.validation_mse = mse_loss(model, held_out);
      } catch (const NumericOverflow&) {
        report.validation_mse = std::numeric_limits<double>::infinity();
      }
    }
    result.history.push_back(report);

    auto& grad = lg.gradient;
    if (!config.train_output_matrix) {
      for (double& v : grad.C.values()) v = 0.0;
    }
    if (config.grad_clip_norm) {
      const double norm = grad.norm();
      if (norm > *config.grad_clip_norm) grad.scale(*config.grad_clip_norm / norm);
    }
    Vector theta = flatten_parameters(model);
    const Vector g = grad.flatten();
    for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= config.learning_rate * g[k];
    assign_parameters(model, theta);
    clamp_widths(model);
  }
  if (!all_finite(flatten_parameters(model))) {
    throw Divergence("parameters became non-finite in the last step", last_finite);
  }
  result.model = std::move(model);
  return result;
}

void initialize_consequents(TnfsModel& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> a_noise(-0.01, 0.01);
  std::uniform_real_distribution<double> small(-0.1, 0.1);
  const std::size_t n = model.dims.state;
  for (auto& rule : model.rules) {
    rule.consequent.A = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        rule.consequent.A(i, j) = (i == j ? 0.5 : 0.0) + a_noise(rng);
      }
    }
    rule.consequent.B = Matrix(n, model.dims.input);
    for (double& v : rule.consequent.B.values()) v = small(rng);
  }
  model.C = Matrix(model.dims.output, n);
  for (double& v : model.C.values()) v = small(rng);
}

TnfsModel make_random_model(Dimensions dims, std::size_t rule_count, std::uint64_t seed,
                            const RandomModelOptions& options) {
  TnfsModel model = make_model(dims, rule_count);
  std::mt19937_64 rng(derive_seed(seed, "model/antecedents"));
  std::uniform_real_distribution<double> center(-options.center_range, options.center_range);
  std::uniform_real_distribution<double> width(options.width_min, options.width_max);
  for (auto& rule : model.rules) {
    for (auto& t : rule.antecedent.state_terms) t = {center(rng), width(rng)};
    for (auto& t : rule.antecedent.input_terms) t = {center(rng), width(rng)};
  }
  initialize_consequents(model, derive_seed(seed, "model/consequents"));
  return model;
}

double max_relative_error(const GradientSet& a, const GradientSet& b, double floor) {
  const Vector fa = a.flatten();
  const Vector fb = b.flatten();
  if (fa.size() != fb.size()) throw InvalidArgument("gradient sets differ in shape");
  double worst = 0.0;
  for (std::size_t k = 0; k < fa.size(); ++k) {
    const double denom = std::max({std::abs(fa[k]), std::abs(fb[k]), floor});
    worst = std::max(worst, std::abs(fa[k] - fb[k]) / denom);
  }
  return worst;
}

}  // namespace tnfs
