#include "tnfs/clustering.hpp"

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

double squared_distance(const Matrix& a, std::size_t ra, const Matrix& b, std::size_t rb) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    const double d = a(ra, j) - b(rb, j);
    acc += d * d;
  }
  return acc;
}

bool rows_equal(const Matrix& a, std::size_t ra, std::size_t rb) {
  for (std::size_t j = 0; j < a.cols(); ++j) {
    if (a(ra, j) != a(rb, j)) return false;
  }
  return true;
}

// u_ik proportional to (1 / d_ik^2)^(1/(m-1)), evaluated in the log domain so
// fuzzifiers close to 1 do not overflow. A point sitting exactly on a center
// belongs to it entirely.
void update_memberships(const Matrix& data, const Matrix& centers, double m, Matrix& u) {
  const std::size_t c = centers.rows();
  const double inv = 1.0 / (m - 1.0);
  std::vector<double> logits(c);
  for (std::size_t k = 0; k < data.rows(); ++k) {
    std::size_t coincident = c;
    for (std::size_t i = 0; i < c; ++i) {
      const double d2 = squared_distance(data, k, centers, i);
      if (d2 <= std::numeric_limits<double>::min()) {
        coincident = i;
        break;
      }
      logits[i] = -inv * std::log(d2);
    }
    if (coincident < c) {
      for (std::size_t i = 0; i < c; ++i) u(k, i) = (i == coincident) ? 1.0 : 0.0;
      continue;
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      logits[i] = std::exp(logits[i] - top);
      sum += logits[i];
    }
    for (std::size_t i = 0; i < c; ++i) u(k, i) = logits[i] / sum;
  }
}

void update_centers(const Matrix& data, const Matrix& u, double m, Matrix& centers) {
  const std::size_t d = data.cols();
  for (std::size_t i = 0; i < centers.rows(); ++i) {
    double weight_sum = 0.0;
    std::vector<double> acc(d, 0.0);
    for (std::size_t k = 0; k < data.rows(); ++k) {
      const double w = std::pow(u(k, i), m);
      weight_sum += w;
      for (std::size_t j = 0; j < d; ++j) acc[j] += w * data(k, j);
    }
    // A cluster that lost every point keeps its previous center.
    if (weight_sum <= 0.0) continue;
    for (std::size_t j = 0; j < d; ++j) centers(i, j) = acc[j] / weight_sum;
  }
}

}  // namespace

void validate(const ClusterConfig& config) {
  if (config.cluster_count < 1) throw InvalidArgument("cluster_count must be >= 1");
  if (!(config.fuzzifier_m > 1.0) || !std::isfinite(config.fuzzifier_m)) {
    throw InvalidArgument("fuzzifier m must be > 1");
  }
  if (!(config.tolerance > 0.0)) throw InvalidArgument("tolerance must be > 0");
  if (config.max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
}

double fcm_objective(const Matrix& data, const Matrix& centers, const Matrix& memberships,
                     double fuzzifier_m) {
  double j = 0.0;
  for (std::size_t k = 0; k < data.rows(); ++k) {
    for (std::size_t i = 0; i < centers.rows(); ++i) {
      j += std::pow(memberships(k, i), fuzzifier_m) * squared_distance(data, k, centers, i);
    }
  }
  return j;
}

ClusterResult fcm(const Matrix& data, const ClusterConfig& config) {
  validate(config);
  const std::size_t n = data.rows();
  const std::size_t c = config.cluster_count;
  if (data.cols() < 1) throw InvalidArgument("fcm: data needs at least one column");
  if (n < c) {
    throw InvalidArgument("fcm: " + std::to_string(n) + " points cannot form " +
                          std::to_string(c) + " clusters");
  }
  if (!data.all_finite()) throw InvalidArgument("fcm: data contains non-finite values");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(config.seed, "fcm/init"));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> picked;
  for (std::size_t idx : order) {
    if (picked.size() == c) break;
    const bool duplicate = std::any_of(picked.begin(), picked.end(),
                                       [&](std::size_t p) { return rows_equal(data, p, idx); });
    if (!duplicate) picked.push_back(idx);
  }
  if (picked.size() < c) {
    throw DegenerateData("fcm: data has only " + std::to_string(picked.size()) +
                         " distinct points, cannot seed " + std::to_string(c) + " clusters");
  }

  ClusterResult result;
  result.centers = Matrix(c, data.cols());
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < data.cols(); ++j) result.centers(i, j) = data(picked[i], j);
  }
  result.memberships = Matrix(n, c);
  Matrix next = result.centers;
  for (int it = 1; it <= config.max_iterations; ++it) {
    update_memberships(data, result.centers, config.fuzzifier_m, result.memberships);
    update_centers(data, result.memberships, config.fuzzifier_m, next);
    result.objective_history.push_back(
        fcm_objective(data, next, result.memberships, config.fuzzifier_m));
    double shift = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      shift = std::max(shift, std::sqrt(squared_distance(next, i, result.centers, i)));
    }
    result.centers = next;
    result.iterations_used = it;
    if (shift < config.tolerance) break;
  }
  return result;
}

double validity_index(const Matrix& data, const ClusterResult& result, double fuzzifier_m) {
  const std::size_t c = result.centers.rows();
  if (c < 2) throw UndefinedIndex("validity index is undefined for a single cluster");
  if (result.memberships.rows() != data.rows() || result.memberships.cols() != c ||
      result.centers.cols() != data.cols()) {
    throw InvalidArgument("validity_index: cluster result does not match data shape");
  }
  double min_sep = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = i + 1; j < c; ++j) {
      min_sep = std::min(min_sep, squared_distance(result.centers, i, result.centers, j));
    }
  }
  if (min_sep <= 0.0) return std::numeric_limits<double>::infinity();
  const double j = fcm_objective(data, result.centers, result.memberships, fuzzifier_m);
  return j / (static_cast<double>(data.rows()) * min_sep);
}

ClusterScan scan_cluster_counts(const Matrix& data, std::size_t c_min, std::size_t c_max,
                                const ClusterConfig& config) {
  if (c_min < 2 || c_min > c_max || c_max > data.rows()) {
    throw InvalidArgument("cluster count range [" + std::to_string(c_min) + ", " +
                          std::to_string(c_max) + "] invalid for " +
                          std::to_string(data.rows()) + " points");
  }
  ClusterScan scan;
  for (std::size_t c = c_min; c <= c_max; ++c) {
    ClusterConfig cfg = config;
    cfg.cluster_count = c;
    cfg.seed = derive_seed(config.seed, "fcm/c=" + std::to_string(c));
    const ClusterResult result = fcm(data, cfg);
    const double index = validity_index(data, result, cfg.fuzzifier_m);
    scan.entries.push_back({c, index, result.iterations_used});
  }
  scan.best = best_cluster_count(scan.entries);
  return scan;
}

std::size_t best_cluster_count(std::span<const ClusterScanEntry> entries) {
  if (entries.empty()) throw InvalidArgument("no cluster counts to choose from");
  const ClusterScanEntry* best = &entries.front();
  for (const auto& e : entries) {
    if (e.index < best->index ||
        (e.index == best->index && e.cluster_count < best->cluster_count)) {
      best = &e;
    }
  }
  return best->cluster_count;
}

std::size_t select_cluster_count(const Matrix& data, std::size_t c_min, std::size_t c_max,
                                 const ClusterConfig& config) {
  return scan_cluster_counts(data, c_min, c_max, config).best;
}

TnfsModel rules_from_clusters(const ClusterResult& result, const Matrix& data, Dimensions dims,
                              const RuleInitOptions& options) {
  const std::size_t d = data.cols();
  if (d != dims.state + dims.input) {
    throw InvalidArgument("rules_from_clusters: cluster space has " + std::to_string(d) +
                          " columns, expected N + M = " +
                          std::to_string(dims.state + dims.input));
  }
  const std::size_t c = result.centers.rows();
  if (c == 0 || result.centers.cols() != d || result.memberships.rows() != data.rows() ||
      result.memberships.cols() != c) {
    throw InvalidArgument("rules_from_clusters: cluster result does not match data shape");
  }

  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (std::size_t j = 0; j < d; ++j) {
      if (result.centers(a, j) != result.centers(b, j)) {
        return result.centers(a, j) < result.centers(b, j);
      }
    }
    return a < b;
  });

  const double floor = std::max(kWidthFloor, options.min_width);
  TnfsModel model = make_model(dims, c);
  for (std::size_t r = 0; r < c; ++r) {
    const std::size_t i = order[r];
    double weight_sum = 0.0;
    std::vector<double> scatter(d, 0.0);
    for (std::size_t k = 0; k < data.rows(); ++k) {
      const double w = std::pow(result.memberships(k, i), options.fuzzifier_m);
      weight_sum += w;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = data(k, j) - result.centers(i, j);
        scatter[j] += w * diff * diff;
      }
    }
    auto& ante = model.rules[r].antecedent;
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = weight_sum > 0.0 ? std::sqrt(scatter[j] / weight_sum) : 0.0;
      const GaussianTerm term{result.centers(i, j), std::max(sd, floor)};
      if (j < dims.state) {
        ante.state_terms[j] = term;
      } else {
        ante.input_terms[j - dims.state] = term;
      }
    }
  }
  initialize_consequents(model, options.consequent_seed);
  return model;
}

Matrix state_input_features(std::span<const TrainingSequence> sequences, std::size_t state_dim) {
  if (sequences.empty()) throw InvalidArgument("state_input_features: no sequences");
  const std::size_t m = sequences.front().inputs.front().size();
  std::size_t rows = 0;
  for (const auto& s : sequences) rows += s.inputs.size();
  Matrix out(rows, state_dim + m);
  std::size_t row = 0;
  for (const auto& s : sequences) {
    const bool proxy = !s.targets.empty() && s.targets.front().size() == state_dim;
    for (std::size_t t = 0; t < s.inputs.size(); ++t) {
      if (s.inputs[t].size() != m) throw InvalidArgument("state_input_features: ragged inputs");
      if (proxy) {
        const Vector* prev = nullptr;
        if (t > 0) {
          prev = &s.targets[t - 1];
        } else if (s.x_init) {
          prev = &*s.x_init;
        }
        if (prev) {
          for (std::size_t i = 0; i < state_dim; ++i) out(row, i) = (*prev)[i];
        }
      }
      for (std::size_t j = 0; j < m; ++j) out(row, state_dim + j) = s.inputs[t][j];
      ++row;
    }
  }
  return out;
}

Matrix lagged_output_features(std::span<const double> series, std::size_t lags) {
  if (lags < 1) throw InvalidArgument("lagged_output_features: lags must be >= 1");
  if (series.size() < lags + 1) {
    throw InvalidArgument("lagged_output_features: series of length " +
                          std::to_string(series.size()) + " too short for " +
                          std::to_string(lags) + " lags");
  }
  const std::size_t rows = series.size() - lags;
  Matrix out(rows, lags + 1);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t t = r + lags - 1;
    out(r, 0) = series[t + 1];
    for (std::size_t l = 0; l < lags; ++l) out(r, 1 + l) = series[t + 1 - lags + l];
  }
  return out;
}

}  // namespace tnfs
