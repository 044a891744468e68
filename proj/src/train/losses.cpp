#include "epose/train/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "epose/env/env.hpp"
#include "epose/util/parallel.hpp"

namespace epose::train {

using env::ConstructionState;
using nn::Binder;
using nn::Mat;
using nn::Tape;
using nn::Var;

EpisodeResult episode_pass(Tape& tape, const nn::ParameterSet& params,
                           std::shared_ptr<const routing::ProblemInstance> inst,
                           const EpisodePassConfig& cfg, GradAccum* grads) {
  if (cfg.source == ActionSource::Sample && !cfg.rng)
    throw std::invalid_argument("episode_pass: Sample needs an rng");
  if (cfg.source == ActionSource::Scripted && !cfg.scripted)
    throw std::invalid_argument("episode_pass: Scripted needs actions");

  tape.clear();
  Binder policy(tape, params, "policy/");
  const nn::EncodeOut enc = nn::encode_graph(tape, policy, *inst, cfg.bn_mode, cfg.bn_log,
                                             params.config().encoder_layers);
  const nn::DecoderVars cache = nn::decoder_cache(tape, policy, enc.nodes);

  ConstructionState s = env::reset(inst);
  const Var v0 = nn::critic_value(tape, policy, enc, s, cfg.bn_mode, cfg.bn_log);

  EpisodeResult out;
  Var logp_sum = tape.scalar(0.0);
  Var ent_sum = tape.scalar(0.0);
  while (!s.terminal) {
    const std::vector<std::uint8_t> mask = env::feasible_mask(s);
    const nn::DecodeOut dec = nn::decode_logprobs(tape, policy, enc, cache, s, mask);
    const Mat& lp = tape.val(dec.logp);

    int a = -1;
    switch (cfg.source) {
      case ActionSource::Sample: a = nn::sample_masked(lp, mask, *cfg.rng); break;
      case ActionSource::Scripted: a = (*cfg.scripted)[out.actions.size()]; break;
      case ActionSource::Greedy: a = nn::argmax_masked(lp, mask); break;
    }
    if (a < 0 || a >= static_cast<int>(mask.size()) || !mask[static_cast<std::size_t>(a)])
      throw std::logic_error("episode_pass: chose infeasible action");

    const Var h = tape.entropy_from_logp(dec.logp, mask);
    logp_sum = tape.add(logp_sum, tape.pick(dec.logp, a));
    ent_sum = tape.add(ent_sum, h);

    out.actions.push_back(a);
    out.step_entropy.push_back(tape.val(h).item());
    out.feasible_count.push_back(static_cast<int>(
        std::count(mask.begin(), mask.end(), std::uint8_t{1})));

    auto res = env::step(s, a);
    out.total_return += res.reward;
    s = std::move(res.state);
  }

  out.log_prob = tape.val(logp_sum).item();
  out.entropy_sum = tape.val(ent_sum).item();
  out.value = tape.val(v0).item();

  const double R = out.total_return;
  const double baseline = cfg.baseline_override ? *cfg.baseline_override : out.value;
  const double adv = R - baseline;

  const Var policy_term = tape.scale(logp_sum, -adv);
  const Var ent_term = tape.scale(ent_sum, -cfg.alpha);
  const Var critic_term = tape.scale(tape.square(tape.sub(v0, tape.scalar(R))), 0.5);
  const Var loss = tape.add(tape.add(policy_term, ent_term), critic_term);

  out.policy_objective = tape.val(policy_term).item() + tape.val(ent_term).item();
  out.loss = tape.val(loss).item();

  if (cfg.want_grads) {
    if (!grads) throw std::invalid_argument("episode_pass: want_grads without accumulator");
    tape.backward(loss);
    policy.collect_grads(grads->g, 1.0);
  }
  return out;
}

namespace {

// Transitions sharing an instance are grouped so each chunk encodes every
// instance it owns exactly once. Group order follows first appearance, and
// the chunk layout is fixed, so results are thread-count independent.
struct InstanceGroup {
  const routing::ProblemInstance* key;
  std::vector<std::size_t> items;  // indices into the batch
};

std::vector<InstanceGroup> group_by_instance(const std::vector<replay::Transition>& batch) {
  std::vector<InstanceGroup> groups;
  std::unordered_map<const routing::ProblemInstance*, std::size_t> at;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const routing::ProblemInstance* key = batch[i].instance.get();
    auto it = at.find(key);
    if (it == at.end()) {
      it = at.emplace(key, groups.size()).first;
      groups.push_back(InstanceGroup{key, {}});
    }
    groups[it->second].items.push_back(i);
  }
  return groups;
}

constexpr int kGradChunks = 16;

}  // namespace

std::vector<double> compute_q_targets(const nn::ParameterSet& params,
                                      const std::vector<replay::Transition>& batch,
                                      double alpha) {
  struct Frozen {
    nn::FrozenPolicyEncoding pi;
    nn::FrozenQEncoding q1t, q2t;
  };
  const std::vector<InstanceGroup> groups = group_by_instance(batch);

  std::vector<Frozen> frozen(groups.size());
  util::parallel_items(groups.size(), [&](std::size_t gi) {
    const routing::ProblemInstance& inst = *batch[groups[gi].items.front()].instance;
    frozen[gi] = Frozen{nn::freeze_policy_encoding(params, inst, nn::BnMode::Train),
                        nn::freeze_q_encoding(params, "q1t/", inst, nn::BnMode::Train),
                        nn::freeze_q_encoding(params, "q2t/", inst, nn::BnMode::Train)};
  });

  std::vector<double> targets(batch.size());
  util::parallel_chunks(groups.size(), kGradChunks,
                        [&](std::size_t, std::size_t begin, std::size_t end) {
    Tape scratch;
    for (std::size_t gi = begin; gi < end; ++gi) {
      const Frozen& f = frozen[gi];
      for (const std::size_t i : groups[gi].items) {
        const replay::Transition& tr = batch[i];
        if (tr.terminal) {
          targets[i] = tr.reward;
          continue;
        }
        const std::vector<std::uint8_t> mask = env::feasible_mask(tr.next_state);
        const Mat lp = nn::frozen_logprobs(scratch, params, f.pi, tr.next_state, mask);
        std::vector<int> feas;
        const std::vector<double> q1 =
            nn::frozen_q_values(scratch, params, "q1t/", f.q1t, tr.next_state, mask, &feas);
        const std::vector<double> q2 =
            nn::frozen_q_values(scratch, params, "q2t/", f.q2t, tr.next_state, mask, nullptr);
        double v = 0.0;
        for (std::size_t k = 0; k < feas.size(); ++k) {
          const double lpj = lp.a[static_cast<std::size_t>(feas[k])];
          v += std::exp(lpj) * (std::min(q1[k], q2[k]) - alpha * lpj);
        }
        targets[i] = tr.reward + v;
      }
    }
  });
  return targets;
}

double compute_q_loss(const nn::ParameterSet& params, const std::string& prefix,
                      const std::vector<replay::Transition>& batch,
                      const std::vector<double>& targets, GradAccum* grads, nn::BnLog* bn_log) {
  if (batch.empty()) throw std::invalid_argument("compute_q_loss: empty batch");
  if (batch.size() != targets.size())
    throw std::invalid_argument("compute_q_loss: batch/target size mismatch");

  const std::vector<InstanceGroup> groups = group_by_instance(batch);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  std::vector<double> chunk_loss(kGradChunks, 0.0);
  std::vector<GradAccum> chunk_grads(kGradChunks, GradAccum(params.size()));
  std::vector<nn::BnLog> chunk_logs(kGradChunks);

  util::parallel_chunks(groups.size(), kGradChunks,
                        [&](std::size_t c, std::size_t begin, std::size_t end) {
    if (begin == end) return;
    Tape tape;
    Binder qb(tape, params, prefix);
    Var sum = tape.scalar(0.0);
    for (std::size_t gi = begin; gi < end; ++gi) {
      const routing::ProblemInstance& inst = *batch[groups[gi].items.front()].instance;
      const nn::EncodeOut enc = nn::encode_graph(tape, qb, inst, nn::BnMode::Train,
                                                 &chunk_logs[c], params.config().critic_layers);
      const Var Kq = tape.matmul(enc.nodes, qb("head/Wk"));
      for (const std::size_t i : groups[gi].items) {
        const replay::Transition& tr = batch[i];
        const std::vector<std::uint8_t> mask = env::feasible_mask(tr.state);
        const nn::QOut q = nn::q_head(tape, qb, enc, Kq, tr.state, mask);
        const Var diff = tape.sub(tape.pick(q.all, tr.action), tape.scalar(targets[i]));
        sum = tape.add(sum, tape.scale(tape.square(diff), 0.5));
      }
    }
    const Var local = tape.scale(sum, inv_batch);
    chunk_loss[c] = tape.val(local).item();
    if (grads) {
      tape.backward(local);
      qb.collect_grads(chunk_grads[c].g, 1.0);
    }
  });

  double loss = 0.0;
  for (int c = 0; c < kGradChunks; ++c) {
    loss += chunk_loss[c];
    if (grads) grads->add(chunk_grads[c]);
    if (bn_log)
      bn_log->items.insert(bn_log->items.end(), chunk_logs[c].items.begin(),
                           chunk_logs[c].items.end());
  }
  return loss;
}

double entropy_target(int feasible, double coeff) {
  return coeff * std::log(static_cast<double>(feasible));
}

AlphaLoss compute_alpha_loss(const std::vector<EpisodeResult>& batch, double alpha,
                             double coeff) {
  double gap = 0.0;
  std::size_t steps = 0;
  for (const EpisodeResult& ep : batch) {
    for (std::size_t t = 0; t < ep.step_entropy.size(); ++t) {
      gap += ep.step_entropy[t] - entropy_target(ep.feasible_count[t], coeff);
      ++steps;
    }
  }
  if (steps == 0) throw std::invalid_argument("compute_alpha_loss: no steps");
  AlphaLoss out;
  out.mean_gap = gap / static_cast<double>(steps);
  out.value = alpha * out.mean_gap;
  out.grad_log_alpha = alpha * out.mean_gap;
  return out;
}

}  // namespace epose::train
