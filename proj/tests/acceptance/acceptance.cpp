// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tnfs/archive.hpp"
#include "tnfs/clustering.hpp"
#include "tnfs/config.hpp"
#include "tnfs/diagnosis.hpp"
#include "tnfs/errors.hpp"
#include "tnfs/pipeline.hpp"
#include "tnfs/seed.hpp"
#include "tnfs/training.hpp"

using namespace tnfs;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Plain loops over the model equations; no library helpers.
std::vector<Vector> reference_rollout(const TnfsModel& m, const std::vector<Vector>& inputs) {
  const std::size_t n = m.dims.state, mi = m.dims.input, p = m.dims.output;
  const std::size_t rules = m.rules.size();
  std::vector<double> x = m.x0;
  std::vector<Vector> ys;
  for (const auto& u : inputs) {
    std::vector<double> f(rules);
    double s = 0.0;
    for (std::size_t r = 0; r < rules; ++r) {
      double e = 0.0;
      const auto& a = m.rules[r].antecedent;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = (x[i] - a.state_terms[i].center) / a.state_terms[i].width;
        e += 0.5 * d * d;
      }
      for (std::size_t j = 0; j < mi; ++j) {
        const double d = (u[j] - a.input_terms[j].center) / a.input_terms[j].width;
        e += 0.5 * d * d;
      }
      f[r] = std::exp(-e);
      s += f[r];
    }
    std::vector<double> next(n, 0.0);
    for (std::size_t r = 0; r < rules; ++r) {
      const double h = s < 1e-30 ? 1.0 / static_cast<double>(rules) : f[r] / s;
      const auto& c = m.rules[r].consequent;
      for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        for (std::size_t k = 0; k < n; ++k) v += c.A(i, k) * x[k];
        for (std::size_t k = 0; k < mi; ++k) v += c.B(i, k) * u[k];
        next[i] += h * v;
      }
    }
    x = next;
    Vector y(p, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t k = 0; k < n; ++k) y[i] += m.C(i, k) * x[k];
    }
    ys.push_back(y);
  }
  return ys;
}

std::vector<Vector> uniform_series(std::size_t t, std::size_t dim, double lo, double hi,
                                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<Vector> out(t, Vector(dim));
  for (auto& v : out) {
    for (auto& e : v) e = d(rng);
  }
  return out;
}

// 1. Inference invariants and the forward pass against the reference on
// 1000 random models with N, M, P <= 4 and R <= 6.
Outcome forward_pass() {
  std::mt19937_64 rng(derive_seed(1, "acceptance/forward"));
  double sum_err = 0.0, form_err = 0.0, envelope = 0.0, rollout_err = 0.0;
  bool memberships_ok = true;
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const Dimensions d{1 + k % 4, 1 + (k / 4) % 4, 1 + (k / 16) % 4};
    TnfsModel m = make_random_model(d, 1 + k % 6, derive_seed(k, "acceptance/model"));
    m.x0 = uniform_series(1, d.state, -1.0, 1.0, rng)[0];
    const auto inputs = uniform_series(1 + k % 30, d.input, -2.0, 2.0, rng);
    const Vector x = uniform_series(1, d.state, -2.0, 2.0, rng)[0];
    const Vector& u = inputs.front();

    for (const auto& r : m.rules) {
      for (std::size_t i = 0; i < d.state; ++i) {
        const double mu = membership(r.antecedent.state_terms[i], x[i]);
        memberships_ok = memberships_ok && mu > 0.0 && mu <= 1.0;
      }
      for (std::size_t j = 0; j < d.input; ++j) {
        const double mu = membership(r.antecedent.input_terms[j], u[j]);
        memberships_ok = memberships_ok && mu > 0.0 && mu <= 1.0;
      }
    }
    const Vector h = normalize_strengths(firing_strengths(m, x, u));
    double total = 0.0;
    for (double v : h) total += v;
    sum_err = std::max(sum_err, std::abs(total - 1.0));

    const AggregatedSystem agg = aggregate_parameters(m, h);
    for (std::size_t e = 0; e < agg.A.size(); ++e) {
      double lo = 1e300, hi = -1e300;
      for (const auto& r : m.rules) {
        lo = std::min(lo, r.consequent.A.values()[e]);
        hi = std::max(hi, r.consequent.A.values()[e]);
      }
      const double v = agg.A.values()[e];
      envelope = std::max({envelope, lo - v, v - hi});
    }
    const Vector p = state_transition(m, x, u);
    const Vector q = state_transition_rulewise(m, x, u);
    for (std::size_t i = 0; i < p.size(); ++i) form_err = std::max(form_err, std::abs(p[i] - q[i]));

    const auto got = rollout(m, inputs).outputs;
    const auto want = reference_rollout(m, inputs);
    for (std::size_t t = 0; t < want.size(); ++t) {
      for (std::size_t i = 0; i < want[t].size(); ++i) {
        rollout_err = std::max(rollout_err, std::abs(got[t][i] - want[t][i]) /
                                                std::max(1.0, std::abs(want[t][i])));
      }
    }
  }
  const bool ok = memberships_ok && sum_err <= 1e-12 && envelope <= 1e-12 && form_err <= 1e-12 &&
                  rollout_err <= 1e-12;
  return {ok, "sum_h_error=" + fmt("%.3g", sum_err) + " envelope_excess=" + fmt("%.3g", envelope) +
                  " form_error=" + fmt("%.3g", form_err) + " rollout_error=" +
                  fmt("%.3g", rollout_err) + " memberships_in_(0,1]=" +
                  (memberships_ok ? "yes" : "no") + " tol=1e-12"};
}

// 2. Analytic against central-difference gradients.
Outcome gradients() {
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const Dimensions d{2, 1, 1};
    const TnfsModel m = make_random_model(d, 3, derive_seed(k, "acceptance/grad-model"));
    std::mt19937_64 rng(derive_seed(k, "acceptance/grad-data"));
    std::vector<TrainingSequence> data(2);
    for (auto& s : data) {
      s.inputs = uniform_series(5, 1, -1.0, 1.0, rng);
      s.targets = uniform_series(5, 1, -1.0, 1.0, rng);
    }
    worst = std::max(worst, max_relative_error(analytic_gradients(m, data),
                                               finite_difference_gradients(m, data, 1e-5)));
  }
  return {worst <= 1e-4, "max_relative_error=" + fmt("%.3g", worst) + " tol=1e-4"};
}

// 3. With A = 0.5 I in every rule the model is linear: x(t) = 0.5^t x0 + 2 (1 - 0.5^t) B u
// for a constant input. Checked for one rule and for three rules sharing A and B.
Outcome linear_limit() {
  const Dimensions d{3, 2, 2};
  Matrix A(3, 3), B(3, 2, {0.2, -0.4, 1.0, 0.3, -0.7, 0.5});
  for (std::size_t i = 0; i < 3; ++i) A(i, i) = 0.5;
  const Vector u{0.8, -0.6};
  const std::vector<Vector> inputs(100, u);
  double worst = 0.0;
  for (std::size_t rules : {1, 3}) {
    TnfsModel m = make_random_model(d, rules, 42);
    for (auto& r : m.rules) r.consequent = {A, B};
    m.x0 = {1.0, -2.0, 0.5};
    const auto ys = rollout(m, inputs).outputs;
    for (std::size_t t = 1; t <= 100; ++t) {
      const double g = std::pow(0.5, static_cast<double>(t));
      Vector x(3);
      for (std::size_t i = 0; i < 3; ++i) {
        x[i] = g * m.x0[i] + 2.0 * (1.0 - g) * (B(i, 0) * u[0] + B(i, 1) * u[1]);
      }
      for (std::size_t p = 0; p < 2; ++p) {
        double y = 0.0;
        for (std::size_t i = 0; i < 3; ++i) y += m.C(p, i) * x[i];
        worst = std::max(worst, std::abs(ys[t - 1][p] - y));
      }
    }
  }
  return {worst <= 1e-12, "max_error=" + fmt("%.3g", worst) + " tol=1e-12"};
}

// 4. FCM objective never increases; four blobs pick c = 4 with centers at the
// blob sample means.
Outcome clustering() {
  const std::vector<std::pair<double, double>> centers{{0, 0}, {5, 0}, {0, 5}, {5, 5}};
  std::mt19937_64 rng(derive_seed(4, "acceptance/blobs"));
  std::normal_distribution<double> noise(0.0, 0.05);
  Matrix data(200, 2);
  std::vector<std::pair<double, double>> means(4, {0.0, 0.0});
  for (std::size_t k = 0; k < 200; ++k) {
    data(k, 0) = centers[k % 4].first + noise(rng);
    data(k, 1) = centers[k % 4].second + noise(rng);
    means[k % 4].first += data(k, 0) / 50.0;
    means[k % 4].second += data(k, 1) / 50.0;
  }
  ClusterConfig cfg;
  cfg.seed = 17;
  const std::size_t selected = select_cluster_count(data, 2, 8, cfg);
  bool monotone = true;
  for (std::size_t c = 2; c <= 8; ++c) {
    cfg.cluster_count = c;
    cfg.seed = 100 + c;
    const auto h = fcm(data, cfg).objective_history;
    for (std::size_t i = 1; i < h.size(); ++i) {
      monotone = monotone && h[i] <= h[i - 1] * (1.0 + 1e-12);
    }
  }
  cfg.cluster_count = selected;
  cfg.seed = derive_seed(17, "fcm/c=" + std::to_string(selected));
  const ClusterResult r = fcm(data, cfg);
  double worst = 0.0;
  for (const auto& [cx, cy] : means) {
    double best = 1e300;
    for (std::size_t i = 0; i < r.centers.rows(); ++i) {
      best = std::min(best, std::hypot(r.centers(i, 0) - cx, r.centers(i, 1) - cy));
    }
    worst = std::max(worst, best);
  }
  const bool ok = monotone && selected == 4 && worst <= 0.05;
  return {ok, "monotone=" + std::string(monotone ? "yes" : "no") +
                  " selected_c=" + std::to_string(selected) +
                  " center_error=" + fmt("%.3g", worst) + " tol=0.05"};
}

// 5. Window arithmetic and the thirds split.
Outcome windowing() {
  const std::size_t per = window_count(120.0, 40.0, 10.0);
  const ClassTable classes = default_class_table();
  const FaultCatalog catalog = default_fault_catalog();
  std::vector<Scenario> scenarios;
  for (std::size_t i = 0; i < 38; ++i) {
    Scenario s;
    s.seed = derive_seed(5, "acceptance/scenario/" + std::to_string(i));
    const std::string& name = classes.names[i % classes.size()];
    if (name != kNormalFault) {
      s.fault = catalog.get(name);
      s.fault.onset_minute = 40.0;
    }
    scenarios.push_back(s);
  }
  const Dataset ds = build_dataset(scenarios, default_plant(), {40.0, 10.0}, classes, {});
  const std::size_t total = ds.train.size() + ds.validation.size() + ds.test.size();

  // 45 scenarios, three per class: each split holds one of every class.
  const auto even = make_scenarios(catalog, classes, 3, 40.0, 120.0, 10.0, 5);
  std::vector<std::size_t> scenario_classes;
  for (const auto& s : even) scenario_classes.push_back(classes.index_of(s.fault.fault_id));
  const auto assignment = assign_splits(scenario_classes, {});
  bool thirds = true;
  for (int split = 0; split < 3; ++split) {
    std::vector<int> seen(classes.size(), 0);
    for (std::size_t i = 0; i < even.size(); ++i) {
      if (assignment[i] == split) ++seen[scenario_classes[i]];
    }
    thirds = thirds && std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; });
  }
  const bool ok = per == 9 && total == 342 && thirds;
  return {ok, "windows_per_scenario=" + std::to_string(per) + " samples=" +
                  std::to_string(total) + " thirds_exact=" + (thirds ? "yes" : "no")};
}

// 6. End-to-end diagnosis on a catalog with separable signatures.
Outcome diagnosis() {
  const RunConfig cfg = load_run_config(std::filesystem::path(TNFS_CONFIG_DIR) / "separable.json");
  // Fault step over the stationary std of the AR(1) noise, weakest channel.
  double snr = 1e300;
  for (const auto& f : cfg.catalog.faults) {
    for (const auto& e : f.affected_channels) {
      for (const auto& s : cfg.plant) {
        if (s.name != e.channel) continue;
        const double noise = s.noise_std / std::sqrt(1.0 - kArCoefficient * kArCoefficient);
        snr = std::min(snr, std::abs(e.gain) * f.magnitude * s.nominal_std / noise);
      }
    }
  }
  std::vector<Trajectory> trajs;
  for (const auto& s : cfg.scenarios) trajs.push_back(simulate_scenario(cfg.plant, s));
  const TaskData data = prepare_task_data(cfg, trajs);
  const InitOutcome init =
      initialize_model(data.train, data.dims, cfg.cluster, derive_seed(cfg.seed, "consequents"));
  const TrainResult trained = train(init.model, data.train, cfg.train, data.validation);
  const EvaluationReport r = evaluate(trained.model, data.dataset->test, data.dataset->classes);
  const double delay = r.mean_detection_delay_minutes.value_or(1e300);
  const bool ok = snr >= 5.0 && cfg.classes.size() == 15 && cfg.train.epochs <= 500 &&
                  r.accuracy >= 0.90 && delay <= 20.0;
  return {ok, "snr=" + fmt("%.1f", snr) + " (>=5) accuracy=" + fmt("%.4f", r.accuracy) + " (>=0.90) delay_min=" +
                  fmt("%.1f", delay) + " (<=20) rules=" +
                  std::to_string(trained.model.rule_count())};
}

// 7. A student recovers a two-rule teacher's behaviour.
Outcome teacher_student() {
  const Dimensions d{2, 1, 1};
  // Default consequents give outputs of order 1e-3; B and C are scaled up so
  // the targets are not negligible. Teacher and student share the scaling.
  auto draw = [&](const char* label) {
    TnfsModel m = make_random_model(d, 2, derive_seed(7, label));
    for (auto& r : m.rules) {
      for (auto& v : r.consequent.B.values()) v *= 10.0;
    }
    for (auto& v : m.C.values()) v *= 10.0;
    return m;
  };
  const TnfsModel teacher = draw("acceptance/teacher");
  std::mt19937_64 rng(derive_seed(7, "acceptance/teacher-data"));
  std::vector<TrainingSequence> data(6);
  for (auto& s : data) {
    s.inputs = uniform_series(15, 1, -1.0, 1.0, rng);
    s.targets = rollout(teacher, s.inputs).outputs;
  }
  const TnfsModel student = draw("acceptance/student");
  TrainConfig cfg;
  cfg.epochs = 500;
  cfg.learning_rate = 0.5;
  const TrainResult r = train(student, data, cfg);
  const double before = mse_loss(student, data);
  const double after = mse_loss(r.model, data);
  return {after <= 0.5 * before, "initial_mse=" + fmt("%.4g", before) + " final_mse=" +
                                     fmt("%.4g", after) + " ratio=" + fmt("%.3f", after / before) +
                                     " (<=0.5)"};
}

// 8. Archives reproduce outputs bit for bit and reject other format versions.
Outcome archive_round_trip() {
  const TnfsModel m = make_random_model({3, 2, 2}, 4, derive_seed(8, "acceptance/archive"));
  ModelArchive a;
  a.model = m;
  a.class_names = {"NORMAL", "F1"};
  const ModelArchive b = parse_archive(serialize_archive(a));
  std::mt19937_64 rng(derive_seed(8, "acceptance/battery"));
  std::size_t identical = 0;
  for (int k = 0; k < 100; ++k) {
    const auto inputs = uniform_series(1 + k % 10, 2, -3.0, 3.0, rng);
    identical += rollout(m, inputs).outputs == rollout(b.model, inputs).outputs;
  }
  std::string text = serialize_archive(a);
  const std::string key = "\"format_version\": 1";
  text.replace(text.find(key), key.size(), "\"format_version\": 99");
  bool rejected = false;
  try {
    parse_archive(text);
  } catch (const VersionMismatch&) {
    rejected = true;
  }
  const bool ok = identical == 100 && b.model == m && rejected;
  return {ok, "identical=" + std::to_string(identical) + "/100 version_rejected=" +
                  (rejected ? "yes" : "no")};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"forward-pass-reference", 10.0, forward_pass},
      {"gradient-check", 30.0, gradients},
      {"linear-limit", 10.0, linear_limit},
      {"fcm-cluster-selection", 10.0, clustering},
      {"window-dataset-counts", 10.0, windowing},
      {"separable-diagnosis", 300.0, diagnosis},
      {"teacher-student-fit", 60.0, teacher_student},
      {"archive-round-trip", 10.0, archive_round_trip},
  };
  int failures = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("[%s] %d %s: %s time=%.2fs (<=%.0fs)\n", pass ? "PASS" : "FAIL", index, c.name,
                o.detail.c_str(), secs, c.budget_s);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
