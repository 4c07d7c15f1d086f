#include <doctest.h>

#include <cmath>
#include <random>

#include "tnfs/errors.hpp"
#include "tnfs/training.hpp"

using namespace tnfs;

namespace {

std::vector<TrainingSequence> random_sequences(const Dimensions& d, std::size_t sequences,
                                          std::size_t steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<TrainingSequence> out(sequences);
  for (auto& s : out) {
    for (std::size_t t = 0; t < steps; ++t) {
      Vector in(d.input), tg(d.output);
      for (auto& v : in) v = u(rng);
      for (auto& v : tg) v = u(rng);
      s.inputs.push_back(in);
      s.targets.push_back(tg);
    }
  }
  return out;
}

// Targets replaced by the model's own outputs.
std::vector<TrainingSequence> self_targets(const TnfsModel& m, std::vector<TrainingSequence> data) {
  for (auto& s : data) s.targets = rollout(m, s.inputs, s.x_init).outputs;
  return data;
}

double max_abs(const Vector& v) {
  double out = 0.0;
  for (double x : v) out = std::max(out, std::abs(x));
  return out;
}

}  // namespace

TEST_CASE("mse loss") {
  TnfsModel m = make_model({1, 1, 1}, 1);
  m.rules[0].consequent.B = Matrix(1, 1, {1.0});
  m.C = Matrix(1, 1, {1.0});
  TrainingSequence s{{{1.0}}, {{3.0}}, std::nullopt};
  CHECK(mse_loss(m, std::vector{s}) == 4.0);

  SUBCASE("perfect fit") {
    TnfsModel r = make_random_model({2, 2, 2}, 3, 1);
    const auto data = self_targets(r, random_sequences(r.dims, 3, 6, 2));
    CHECK(mse_loss(r, data) == 0.0);
  }
  SUBCASE("doubling the errors quadruples the loss") {
    TnfsModel r = make_random_model({2, 2, 2}, 3, 3);
    auto data = random_sequences(r.dims, 3, 6, 4);
    const double base = mse_loss(r, data);
    const auto fit = self_targets(r, data);
    for (std::size_t i = 0; i < data.size(); ++i) {
      for (std::size_t t = 0; t < data[i].targets.size(); ++t) {
        for (std::size_t p = 0; p < 2; ++p) {
          const double pred = fit[i].targets[t][p];
          data[i].targets[t][p] = pred + 2.0 * (data[i].targets[t][p] - pred);
        }
      }
    }
    CHECK(mse_loss(r, data) == doctest::Approx(4.0 * base).epsilon(1e-12));
  }
  SUBCASE("mismatched target length names both sizes") {
    TrainingSequence bad{{{1.0}}, {{1.0, 2.0}}, std::nullopt};
    CHECK_THROWS_WITH_AS(mse_loss(m, std::vector{bad}), doctest::Contains("target length 1"),
                         InvalidArgument);
  }
}

TEST_CASE("parameter vector layout") {
  TnfsModel m = make_random_model({2, 3, 2}, 4, 5);
  const std::size_t per_rule = 2 * 2 + 2 * 3 + 2 * 2 + 2 * 3;
  CHECK(parameter_count(m) == 4 * per_rule + 2 * 2);
  Vector theta = flatten_parameters(m);
  CHECK(theta.size() == parameter_count(m));
  CHECK(theta[0] == m.rules[0].antecedent.state_terms[0].center);
  CHECK(theta[1] == m.rules[0].antecedent.state_terms[0].width);
  CHECK(theta[4] == m.rules[0].antecedent.input_terms[0].center);
  CHECK(theta[10] == m.rules[0].consequent.A(0, 0));
  CHECK(theta[14] == m.rules[0].consequent.B(0, 0));
  CHECK(theta.back() == m.C(1, 1));
  TnfsModel copy = make_model(m.dims, 4);
  assign_parameters(copy, theta);
  CHECK(flatten_parameters(copy) == theta);
}

TEST_CASE("gradient is zero at a perfect fit") {
  TnfsModel m = make_random_model({2, 1, 1}, 3, 6);
  const auto data = self_targets(m, random_sequences(m.dims, 2, 5, 7));
  CHECK(max_abs(analytic_gradients(m, data).flatten()) <= 1e-10);
}

TEST_CASE("tied rules receive tied consequent gradients") {
  TnfsModel m = make_random_model({2, 2, 1}, 2, 8);
  m.rules[1] = m.rules[0];
  const auto g = analytic_gradients(m, random_sequences(m.dims, 2, 6, 9));
  CHECK(g.rules[0].A == g.rules[1].A);
  CHECK(g.rules[0].B == g.rules[1].B);
}

TEST_CASE("analytic gradients agree with central differences") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    const Dimensions d{1 + seed % 3, 1 + (seed / 3) % 3, 1 + (seed / 9) % 3};
    const std::size_t rules = 1 + seed % 4;
    const std::size_t steps = 1 + seed % 8;
    TnfsModel m = make_random_model(d, rules, 1000 + seed);
    auto data = random_sequences(d, 2, steps, 2000 + seed);
    if (seed % 5 == 0) data[0].x_init = Vector(d.state, 0.3);
    const double err = max_relative_error(analytic_gradients(m, data),
                                          finite_difference_gradients(m, data, 1e-5));
    CHECK_MESSAGE(err <= 1e-4, "seed " << seed << " error " << err);
    ++checked;
  }
  CHECK(checked == 150);
}

TEST_CASE("loss_and_gradient is one consistent sweep") {
  TnfsModel m = make_random_model({2, 2, 2}, 3, 10);
  const auto data = random_sequences(m.dims, 3, 4, 11);
  const auto lg = loss_and_gradient(m, data);
  CHECK(lg.loss == mse_loss(m, data));
  CHECK(lg.gradient.flatten() == analytic_gradients(m, data).flatten());
}

TEST_CASE("finite differences on a scalar linear recurrence") {
  // x(t+1) = a x(t), y = x, x(0) = 1, targets 0: loss = (1/T) sum a^(2t),
  // dloss/da = (1/T) sum 2t a^(2t-1).
  const double a = 0.7;
  const int T = 6;
  TnfsModel m = make_model({1, 1, 1}, 1);
  m.rules[0].consequent.A = Matrix(1, 1, {a});
  m.C = Matrix(1, 1, {1.0});
  TrainingSequence s;
  for (int t = 0; t < T; ++t) {
    s.inputs.push_back({0.0});
    s.targets.push_back({0.0});
  }
  s.x_init = Vector{1.0};
  double exact = 0.0;
  for (int t = 1; t <= T; ++t) exact += 2.0 * t * std::pow(a, 2 * t - 1);
  exact /= T;
  const std::vector data{s};
  const double h = 1e-4;
  const auto fd = finite_difference_gradients(m, data, h);
  CHECK(std::abs(fd.rules[0].A(0, 0) - exact) <= 1e-6);
  CHECK(std::abs(analytic_gradients(m, data).rules[0].A(0, 0) - exact) <= 1e-12);

  SUBCASE("halving the step quarters the error") {
    const double e1 = std::abs(finite_difference_gradients(m, data, 1e-2).rules[0].A(0, 0) - exact);
    const double e2 = std::abs(finite_difference_gradients(m, data, 5e-3).rules[0].A(0, 0) - exact);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
  }
}

TEST_CASE("train with zero learning rate changes nothing") {
  TnfsModel m = make_random_model({2, 1, 1}, 3, 12);
  const auto data = random_sequences(m.dims, 2, 5, 13);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 7;
  const auto res = train(m, data, cfg);
  CHECK(res.model == m);
  REQUIRE(res.history.size() == 7);
  for (const auto& r : res.history) CHECK(r.train_mse == res.history.front().train_mse);
  CHECK(res.history.front().epoch == 1);
  CHECK(res.history.back().epoch == 7);
}

TEST_CASE("training is deterministic") {
  TnfsModel m = make_random_model({2, 2, 1}, 3, 14);
  const auto data = random_sequences(m.dims, 6, 5, 15);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.learning_rate = 0.05;
  cfg.validation_fraction = 0.34;
  cfg.shuffle_seed = 99;
  const auto a = train(m, data, cfg);
  const auto b = train(m, data, cfg);
  CHECK(a.model == b.model);
  REQUIRE(a.history.front().validation_mse);
  CHECK(*a.history.back().validation_mse == *b.history.back().validation_mse);
}

TEST_CASE("held-out sequences never touch the gradient") {
  TnfsModel m = make_random_model({2, 2, 1}, 2, 16);
  const auto fit = random_sequences(m.dims, 3, 5, 17);
  const auto held = random_sequences(m.dims, 2, 5, 18);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.learning_rate = 0.1;
  const auto with_val = train(m, fit, cfg, held);
  const auto without = train(m, fit, cfg);
  CHECK(with_val.model == without.model);
  CHECK(with_val.history.back().validation_mse.has_value());
  CHECK(!without.history.back().validation_mse.has_value());
}

TEST_CASE("widths never fall below the floor") {
  TnfsModel m = make_random_model({2, 2, 1}, 4, 19, {1.0, 0.002, 0.01});
  const auto data = random_sequences(m.dims, 3, 6, 20);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.learning_rate = 5.0;
  const auto res = train(m, data, cfg);
  for (const auto& r : res.model.rules) {
    for (const auto& t : r.antecedent.state_terms) CHECK(t.width >= kWidthFloor);
    for (const auto& t : r.antecedent.input_terms) CHECK(t.width >= kWidthFloor);
  }
}

TEST_CASE("a tiny unclipped step never raises the loss") {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.learning_rate = 1e-6;
  cfg.grad_clip_norm.reset();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TnfsModel m = make_random_model({2, 1, 1}, 3, 300 + seed);
    const auto data = random_sequences(m.dims, 1, 5, 400 + seed);
    const double before = mse_loss(m, data);
    const double after = mse_loss(train(m, data, cfg).model, data);
    CHECK(after <= before + 1e-9);
  }
}

TEST_CASE("some learning rate strictly decreases the loss") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TnfsModel m = make_random_model({2, 1, 1}, 3, 500 + seed);
    const auto data = random_sequences(m.dims, 2, 5, 600 + seed);
    const double g = analytic_gradients(m, data).norm();
    REQUIRE(g > 1e-6);
    const double before = mse_loss(m, data);
    bool decreased = false;
    for (double lr = 1.0; lr > 1e-8 && !decreased; lr /= 10.0) {
      TrainConfig cfg;
      cfg.epochs = 1;
      cfg.learning_rate = lr;
      cfg.grad_clip_norm.reset();
      decreased = mse_loss(train(m, data, cfg).model, data) < before;
    }
    CHECK(decreased);
  }
}

TEST_CASE("gradient clipping bounds the step") {
  TnfsModel m = make_random_model({2, 1, 1}, 3, 21);
  auto data = random_sequences(m.dims, 2, 5, 22);
  for (auto& s : data) {
    for (auto& t : s.targets) t[0] *= 100.0;
  }
  const double g = analytic_gradients(m, data).norm();
  REQUIRE(g > 0.1);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.learning_rate = 0.01;
  cfg.grad_clip_norm = 0.5 * g;
  const Vector before = flatten_parameters(m);
  const Vector after = flatten_parameters(train(m, data, cfg).model);
  double step = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i) step += (after[i] - before[i]) * (after[i] - before[i]);
  CHECK(std::sqrt(step) == doctest::Approx(0.005 * g).epsilon(1e-6));
}

TEST_CASE("frozen output matrix") {
  TnfsModel m = make_random_model({2, 1, 1}, 2, 23);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.learning_rate = 0.1;
  cfg.train_output_matrix = false;
  const auto res = train(m, random_sequences(m.dims, 2, 4, 24), cfg);
  CHECK(res.model.C == m.C);
  CHECK(!(res.model.rules == m.rules));
}

TEST_CASE("student learns a two-rule teacher") {
  const Dimensions d{2, 1, 1};
  const TnfsModel teacher = make_random_model(d, 2, 25);
  const auto data = self_targets(teacher, random_sequences(d, 4, 10, 26));
  const TnfsModel student = make_random_model(d, 2, 27);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 0.5;
  const auto res = train(student, data, cfg);
  CHECK(mse_loss(res.model, data) <= 0.5 * res.history.front().train_mse);
}

TEST_CASE("divergence is reported with the last finite epoch") {
  TnfsModel m = make_model({1, 1, 1}, 1);
  m.rules[0].consequent.A = Matrix(1, 1, {1e150});
  m.rules[0].consequent.B = Matrix(1, 1, {1.0});
  m.C = Matrix(1, 1, {1.0});
  TrainingSequence s;
  for (int t = 0; t < 4; ++t) {
    s.inputs.push_back({1.0});
    s.targets.push_back({0.0});
  }
  TrainConfig cfg;
  cfg.epochs = 3;
  try {
    train(m, std::vector{s}, cfg);
    FAIL("expected divergence");
  } catch (const Divergence& e) {
    CHECK(e.last_finite_epoch() == -1);
  }
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.epochs = 0;
  CHECK_THROWS_AS(validate(cfg), InvalidArgument);
  cfg = {};
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(validate(cfg), InvalidArgument);
  cfg = {};
  cfg.validation_fraction = 1.0;
  CHECK_THROWS_AS(validate(cfg), InvalidArgument);
  cfg = {};
  cfg.grad_clip_norm = 0.0;
  CHECK_THROWS_AS(validate(cfg), InvalidArgument);
}

TEST_CASE("initial consequents follow the documented ranges") {
  TnfsModel m = make_model({3, 2, 2}, 4);
  initialize_consequents(m, 28);
  for (const auto& r : m.rules) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        const double base = i == j ? 0.5 : 0.0;
        CHECK(std::abs(r.consequent.A(i, j) - base) <= 0.01);
      }
    }
    for (double v : r.consequent.B.values()) CHECK(std::abs(v) <= 0.1);
  }
  for (double v : m.C.values()) CHECK(std::abs(v) <= 0.1);
}
