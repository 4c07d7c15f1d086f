#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tnfs/matrix.hpp"
#include "tnfs/model.hpp"
#include "tnfs/training.hpp"

namespace tnfs {

struct ClusterConfig {
  std::size_t cluster_count = 4;
  double fuzzifier_m = 2.0;
  double tolerance = 1e-6;
  int max_iterations = 300;
  std::uint64_t seed = 0;
};

void validate(const ClusterConfig& config);

struct ClusterResult {
  Matrix centers;      // c x d
  Matrix memberships;  // n x c, rows sum to 1
  std::vector<double> objective_history;
  int iterations_used = 0;
};

// Fuzzy C-means with centers seeded from distinct random data points
// (rows of `data` are points).
ClusterResult fcm(const Matrix& data, const ClusterConfig& config);

// Sum_k Sum_i u_ik^m ||x_k - v_i||^2.
double fcm_objective(const Matrix& data, const Matrix& centers, const Matrix& memberships,
                     double fuzzifier_m);

// Xie-Beni index J / (n * min_{i != j} ||v_i - v_j||^2); lower is better.
// Coincident centers give +infinity. Throws UndefinedIndex for c = 1.
double validity_index(const Matrix& data, const ClusterResult& result, double fuzzifier_m);

struct ClusterScanEntry {
  std::size_t cluster_count = 0;
  double index = 0.0;
  int iterations_used = 0;
};

struct ClusterScan {
  std::size_t best = 0;
  std::vector<ClusterScanEntry> entries;
};

// Runs fcm for every c in [c_min, c_max], each with its own seed derived from
// config.seed and c, and keeps the c with the lowest validity index (ties go
// to the smaller c).
ClusterScan scan_cluster_counts(const Matrix& data, std::size_t c_min, std::size_t c_max,
                                const ClusterConfig& config);

// Lowest index wins; equal indices go to the smaller count.
std::size_t best_cluster_count(std::span<const ClusterScanEntry> entries);

std::size_t select_cluster_count(const Matrix& data, std::size_t c_min, std::size_t c_max,
                                 const ClusterConfig& config);

struct RuleInitOptions {
  double fuzzifier_m = 2.0;
  // Widths are clamped to max(kWidthFloor, min_width).
  double min_width = kWidthFloor;
  std::uint64_t consequent_seed = 0;
};

// One rule per cluster. The first N coordinates of the cluster space feed the
// state terms, the remaining M the input terms; widths are the fuzzy standard
// deviation of each cluster. Clusters are put in a canonical order (by center,
// lexicographically) first, so relabeling clusters yields the same model.
TnfsModel rules_from_clusters(const ClusterResult& result, const Matrix& data, Dimensions dims,
                              const RuleInitOptions& options = {});

// Cluster space of the state-space form: one row (x_proxy(t), u(t)) per step
// of every sequence. The state proxy is the previous step's target (x_init or
// zero at t = 0) when N == P, and zero otherwise.
Matrix state_input_features(std::span<const TrainingSequence> sequences,
                            std::size_t state_dim);

// Cluster space of the autoregressive form over a scalar series: one row
// (y(t+1), y(t-lags+1), ..., y(t)) per admissible t. With lags = 3 and N = 1
// this is the y(t-2), y(t-1), y(t) -> y(t+1) rule template, y(t+1) feeding
// the single state term.
Matrix lagged_output_features(std::span<const double> series, std::size_t lags);

}  // namespace tnfs
