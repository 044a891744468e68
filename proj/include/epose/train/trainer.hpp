#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "epose/nn/params.hpp"
#include "epose/routing/types.hpp"

namespace epose::train {

enum class Mode { Epose, OffpolicyFixedAlpha, OnpolicyFixedEntropy };

// CLI contract strings: "epose", "offpolicy-fixed", "onpolicy-fixed".
const char* mode_name(Mode m);
Mode parse_mode(const std::string& s);  // throws std::invalid_argument

// Raised when a loss or the temperature goes non-finite; the CLI maps this
// to its numeric-failure exit code.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  routing::ProblemKind kind = routing::ProblemKind::Tsp;
  int n = 20;
  Mode mode = Mode::Epose;
  nn::NetConfig net;
  int batch = 512;  // fresh episodes per step (drop to 256 for CVRP n=100)
  int steps_per_epoch = 2500;
  int epochs = 1;
  double lr = 1e-4;
  double eta = 0.005;        // target smoothing
  double alpha_init = 0.03;  // also the pinned value in the fixed-alpha modes
  double alpha_lr = 1e-2;
  double entropy_coeff = 0.98;  // target = coeff * ln(feasible count)
  std::size_t replay_capacity = 1'000'000;
  int q_batch = 0;  // transitions per Q update; 0 means use `batch`
  int val_instances = 1000;
  std::uint64_t seed = 1;
  std::string out_dir;  // empty: no files, results stay in memory

  void validate() const;  // throws std::invalid_argument
};

struct MetricsRow {
  int step = 0;
  int epoch = 0;
  std::uint64_t trajectories = 0;
  double train_return = 0.0;
  std::optional<double> val_greedy_len;
  double entropy = 0.0;
  double alpha = 0.0;
  std::optional<double> loss_q1, loss_q2;
  double loss_pi = 0.0;
};

extern const char* const kMetricsHeader;
std::string metrics_line(const MetricsRow& row);

struct TrainResult {
  nn::ParameterSet params;
  std::vector<MetricsRow> metrics;
  double initial_val_mean = 0.0;  // untrained greedy mean on the held-out set
  double final_val_mean = 0.0;
  std::uint64_t trajectories = 0;
  std::uint64_t replay_reads = 0;  // sampled transitions; 0 in on-policy mode
  std::string checkpoint_path, metrics_path;
};

TrainResult train(const TrainConfig& cfg);

}  // namespace epose::train
