#include "tnfs/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tnfs/errors.hpp"

namespace tnfs {

namespace {

void require_length(std::span<const double> v, std::size_t expected, const char* what) {
  if (v.size() != expected) {
    throw InvalidArgument(std::string(what) + ": expected length " + std::to_string(expected) +
                          ", found " + std::to_string(v.size()));
  }
}

void require_finite(std::span<const double> v, const char* what) {
  if (!all_finite(v)) throw InvalidArgument(std::string(what) + " contains non-finite values");
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw InvalidArgument(what + ": expected " + std::to_string(rows) + "x" +
                          std::to_string(cols) + ", found " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()));
  }
}

void check_term(const GaussianTerm& t, const std::string& where) {
  if (!std::isfinite(t.center) || !std::isfinite(t.width) || t.width < kWidthFloor) {
    throw InvalidArgument(where + ": invalid Gaussian term (center " + std::to_string(t.center) +
                          ", width " + std::to_string(t.width) + ")");
  }
}

}  // namespace

TnfsModel make_model(Dimensions dims, std::size_t rule_count) {
  TnfsModel model;
  model.dims = dims;
  model.rules.resize(rule_count);
  for (auto& rule : model.rules) {
    rule.antecedent.state_terms.assign(dims.state, GaussianTerm{});
    rule.antecedent.input_terms.assign(dims.input, GaussianTerm{});
    rule.consequent.A = Matrix(dims.state, dims.state);
    rule.consequent.B = Matrix(dims.state, dims.input);
  }
  model.C = Matrix(dims.output, dims.state);
  model.x0.assign(dims.state, 0.0);
  return model;
}

void validate(const TnfsModel& model) {
  const auto [n, m, p] = model.dims;
  if (n == 0 || p == 0) throw InvalidArgument("model: state and output dimensions must be >= 1");
  if (model.rules.empty()) throw InvalidArgument("model: at least one rule is required");
  for (std::size_t r = 0; r < model.rules.size(); ++r) {
    const auto& rule = model.rules[r];
    const std::string tag = "rule " + std::to_string(r);
    if (rule.antecedent.state_terms.size() != n || rule.antecedent.input_terms.size() != m) {
      throw InvalidArgument(tag + ": antecedent has " +
                            std::to_string(rule.antecedent.state_terms.size()) + " state / " +
                            std::to_string(rule.antecedent.input_terms.size()) +
                            " input terms, model expects " + std::to_string(n) + " / " +
                            std::to_string(m));
    }
    for (const auto& t : rule.antecedent.state_terms) check_term(t, tag);
    for (const auto& t : rule.antecedent.input_terms) check_term(t, tag);
    require_shape(rule.consequent.A, n, n, tag + " A");
    require_shape(rule.consequent.B, n, m, tag + " B");
    if (!rule.consequent.A.all_finite() || !rule.consequent.B.all_finite()) {
      throw InvalidArgument(tag + ": consequent contains non-finite entries");
    }
  }
  require_shape(model.C, p, n, "output matrix C");
  if (!model.C.all_finite()) throw InvalidArgument("output matrix C contains non-finite entries");
  require_length(model.x0, n, "x0");
  require_finite(model.x0, "x0");
}

double membership(const GaussianTerm& term, double value) {
  if (!std::isfinite(value)) throw InvalidArgument("membership: non-finite value");
  if (!(term.width >= kWidthFloor) || !std::isfinite(term.width)) {
    throw InvalidArgument("membership: width " + std::to_string(term.width) +
                          " below floor " + std::to_string(kWidthFloor));
  }
  const double d = value - term.center;
  return std::exp(-(d * d) / (2.0 * term.width * term.width));
}

Vector firing_strengths(const TnfsModel& model, std::span<const double> x,
                        std::span<const double> u) {
  require_length(x, model.dims.state, "state vector");
  require_length(u, model.dims.input, "input vector");
  Vector f(model.rules.size());
  for (std::size_t r = 0; r < model.rules.size(); ++r) {
    const auto& ante = model.rules[r].antecedent;
    double prod = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) prod *= membership(ante.state_terms[i], x[i]);
    for (std::size_t j = 0; j < u.size(); ++j) prod *= membership(ante.input_terms[j], u[j]);
    f[r] = prod;
  }
  return f;
}

Vector normalize_strengths(std::span<const double> f) {
  if (f.empty()) throw InvalidArgument("normalize_strengths: empty strength vector");
  double sum = 0.0;
  for (double v : f) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidArgument("normalize_strengths: strengths must be finite and non-negative");
    }
    sum += v;
  }
  Vector h(f.size());
  if (sum < kUnderflowEps) {
    h.assign(f.size(), 1.0 / static_cast<double>(f.size()));
    return h;
  }
  for (std::size_t r = 0; r < f.size(); ++r) h[r] = f[r] / sum;
  return h;
}

AggregatedSystem aggregate_parameters(const TnfsModel& model, std::span<const double> h) {
  require_length(h, model.rules.size(), "normalized strengths");
  double sum = 0.0;
  for (double v : h) sum += v;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw InvalidArgument("aggregate_parameters: weights sum to " + std::to_string(sum));
  }
  AggregatedSystem out{Matrix(model.dims.state, model.dims.state),
                       Matrix(model.dims.state, model.dims.input)};
  for (std::size_t r = 0; r < model.rules.size(); ++r) {
    add_scaled(out.A, h[r], model.rules[r].consequent.A);
    add_scaled(out.B, h[r], model.rules[r].consequent.B);
  }
  return out;
}

StepTrace trace_step(const TnfsModel& model, std::span<const double> x,
                     std::span<const double> u) {
  StepTrace trace;
  trace.strengths = firing_strengths(model, x, u);
  double sum = 0.0;
  for (double v : trace.strengths) sum += v;
  trace.uniform_fallback = sum < kUnderflowEps;
  trace.normalized = normalize_strengths(trace.strengths);
  const auto sys = aggregate_parameters(model, trace.normalized);
  trace.next_state = multiply(sys.A, x);
  multiply_add(sys.B, u, trace.next_state);
  return trace;
}

Vector state_transition(const TnfsModel& model, std::span<const double> x,
                        std::span<const double> u) {
  return trace_step(model, x, u).next_state;
}

Vector state_transition_rulewise(const TnfsModel& model, std::span<const double> x,
                                 std::span<const double> u) {
  const Vector h = normalize_strengths(firing_strengths(model, x, u));
  Vector next(model.dims.state, 0.0);
  Vector local(model.dims.state);
  for (std::size_t r = 0; r < model.rules.size(); ++r) {
    std::fill(local.begin(), local.end(), 0.0);
    multiply_add(model.rules[r].consequent.A, x, local);
    multiply_add(model.rules[r].consequent.B, u, local);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += h[r] * local[i];
  }
  return next;
}

Vector output_projection(const TnfsModel& model, std::span<const double> x) {
  require_length(x, model.dims.state, "state vector");
  return multiply(model.C, x);
}

Rollout rollout(const TnfsModel& model, std::span<const Vector> inputs,
                std::optional<Vector> x_init) {
  if (inputs.empty()) throw InvalidArgument("rollout: empty input sequence");
  Vector state = x_init ? std::move(*x_init) : model.x0;
  require_length(state, model.dims.state, "initial state");
  require_finite(state, "initial state");
  Rollout out;
  out.states.reserve(inputs.size());
  out.outputs.reserve(inputs.size());
  for (const auto& u : inputs) {
    require_finite(u, "input vector");
    state = state_transition(model, state, u);
    out.outputs.push_back(output_projection(model, state));
    out.states.push_back(state);
  }
  return out;
}

}  // namespace tnfs
