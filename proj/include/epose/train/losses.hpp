#pragma once

#include <memory>
#include <string>
#include <vector>

#include "epose/nn/model.hpp"
#include "epose/replay/replay.hpp"
#include "epose/train/optim.hpp"
#include "epose/util/rng.hpp"

namespace epose::train {

enum class ActionSource { Sample, Scripted, Greedy };

struct EpisodePassConfig {
  ActionSource source = ActionSource::Sample;
  const std::vector<int>* scripted = nullptr;  // required for Scripted
  util::Rng* rng = nullptr;                    // required for Sample
  double alpha = 0.0;                          // entropy bonus weight
  bool want_grads = true;
  // Tests can pin the advantage baseline; by default the critic's own value
  // at s0 is used (as a constant in the policy term).
  const double* baseline_override = nullptr;
  nn::BnMode bn_mode = nn::BnMode::Train;
  nn::BnLog* bn_log = nullptr;
};

struct EpisodeResult {
  std::vector<int> actions;
  double total_return = 0.0;  // sum of rewards, equals -length
  double log_prob = 0.0;      // log p of the chosen trajectory
  double entropy_sum = 0.0;
  std::vector<double> step_entropy;
  std::vector<int> feasible_count;
  double value = 0.0;             // critic estimate at s0
  double loss = 0.0;              // policy + entropy + critic terms
  double policy_objective = 0.0;  // loss without the critic regression term
};

// Rolls out one episode and builds its loss on the tape:
//   -(R - b) * log p(traj) - alpha * sum_t H_t + 1/2 (v(s0) - R)^2
// with b detached. If want_grads, runs backward and accumulates raw gradients
// (unscaled; callers average over the batch afterwards).
EpisodeResult episode_pass(nn::Tape& tape, const nn::ParameterSet& params,
                           std::shared_ptr<const routing::ProblemInstance> inst,
                           const EpisodePassConfig& cfg, GradAccum* grads);

// Regression targets q_t = r + V'(s') (q_t = r at terminal transitions),
// with V'(s') the exact feasible-set expectation of min-target-Q minus
// alpha-weighted log-probability. No gradients flow anywhere. Parallel over
// transitions; results do not depend on the thread count.
std::vector<double> compute_q_targets(const nn::ParameterSet& params,
                                      const std::vector<replay::Transition>& batch,
                                      double alpha);

// Mean 1/2 (Q(s,a) - q_t)^2 for one Q group ("q1/" or "q2/"); accumulated
// gradients are averaged over the batch. Work is chunked over instances with
// a fixed chunk layout, so losses and gradients are thread-count independent.
double compute_q_loss(const nn::ParameterSet& params, const std::string& prefix,
                      const std::vector<replay::Transition>& batch,
                      const std::vector<double>& targets, GradAccum* grads, nn::BnLog* bn_log);

// Per-step entropy target: coeff * ln(feasible count).
double entropy_target(int feasible, double coeff);

// Temperature objective alpha * mean(H_t - target_t) over all steps of the
// batch; its derivative w.r.t. log_alpha equals the objective itself.
struct AlphaLoss {
  double value = 0.0;
  double grad_log_alpha = 0.0;
  double mean_gap = 0.0;
};
AlphaLoss compute_alpha_loss(const std::vector<EpisodeResult>& batch, double alpha, double coeff);

}  // namespace epose::train
