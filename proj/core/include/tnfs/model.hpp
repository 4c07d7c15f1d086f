#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tnfs/matrix.hpp"

namespace tnfs {

// Lower bound on every Gaussian width, in normalized-signal units.
inline constexpr double kWidthFloor = 1e-3;
// Below this total firing strength the normalized strengths fall back to
// the uniform vector instead of dividing by (nearly) zero.
inline constexpr double kUnderflowEps = 1e-30;

struct GaussianTerm {
  double center = 0.0;
  double width = 1.0;

  friend bool operator==(const GaussianTerm&, const GaussianTerm&) = default;
};

struct RuleAntecedent {
  std::vector<GaussianTerm> state_terms;  // N entries
  std::vector<GaussianTerm> input_terms;  // M entries

  friend bool operator==(const RuleAntecedent&, const RuleAntecedent&) = default;
};

// Local linear model X(t+1) = A X(t) + B U(t).
struct RuleConsequent {
  Matrix A;  // N x N
  Matrix B;  // N x M

  friend bool operator==(const RuleConsequent&, const RuleConsequent&) = default;
};

struct Rule {
  RuleAntecedent antecedent;
  RuleConsequent consequent;

  friend bool operator==(const Rule&, const Rule&) = default;
};

struct Dimensions {
  std::size_t state = 0;   // N
  std::size_t input = 0;   // M
  std::size_t output = 0;  // P

  friend bool operator==(const Dimensions&, const Dimensions&) = default;
};

// Recurrent Takagi-Sugeno state-space model. Immutable during inference;
// every free function below is pure and safe to call concurrently.
struct TnfsModel {
  Dimensions dims;
  std::vector<Rule> rules;
  Matrix C;   // P x N
  Vector x0;  // N, initial context state

  std::size_t rule_count() const noexcept { return rules.size(); }

  friend bool operator==(const TnfsModel&, const TnfsModel&) = default;
};

// A model with R rules whose terms are centered at 0 with unit width, zero
// consequents, zero C and zero x0.
TnfsModel make_model(Dimensions dims, std::size_t rule_count);

// Throws InvalidArgument describing the first violated invariant.
void validate(const TnfsModel& model);

double membership(const GaussianTerm& term, double value);

Vector firing_strengths(const TnfsModel& model, std::span<const double> x,
                        std::span<const double> u);

Vector normalize_strengths(std::span<const double> f);

struct AggregatedSystem {
  Matrix A;  // N x N
  Matrix B;  // N x M
};

AggregatedSystem aggregate_parameters(const TnfsModel& model, std::span<const double> h);

// Next state via the aggregated matrices: (sum h_r A^r) x + (sum h_r B^r) u.
Vector state_transition(const TnfsModel& model, std::span<const double> x,
                        std::span<const double> u);

// Next state via the rule-wise blend: sum h_r (A^r x + B^r u). Algebraically
// identical to state_transition; kept as an independent route for checks.
Vector state_transition_rulewise(const TnfsModel& model, std::span<const double> x,
                                 std::span<const double> u);

Vector output_projection(const TnfsModel& model, std::span<const double> x);

struct Rollout {
  std::vector<Vector> states;   // T entries of length N
  std::vector<Vector> outputs;  // T entries of length P
};

// states[t] = state_transition(states[t-1], inputs[t]), states[-1] = x_init
// (model.x0 when omitted); outputs[t] = C states[t].
Rollout rollout(const TnfsModel& model, std::span<const Vector> inputs,
                std::optional<Vector> x_init = std::nullopt);

// Everything one inference step computes, for callers that need the
// intermediates (training, diagnostics).
struct StepTrace {
  Vector strengths;             // f, length R
  Vector normalized;            // h, length R
  bool uniform_fallback = false;
  Vector next_state;            // length N
};

StepTrace trace_step(const TnfsModel& model, std::span<const double> x,
                     std::span<const double> u);

}  // namespace tnfs
