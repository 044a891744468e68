#include "epose/eval/decode.hpp"

#include <stdexcept>

#include "epose/env/env.hpp"

namespace epose::eval {

namespace {

routing::Solution rollout(const nn::ParameterSet& params, const nn::FrozenPolicyEncoding& fe,
                          const std::shared_ptr<const routing::ProblemInstance>& inst,
                          nn::Tape& scratch, util::Rng* rng) {
  env::ConstructionState s = env::reset(inst);
  while (!s.terminal) {
    const std::vector<std::uint8_t> mask = env::feasible_mask(s);
    const nn::Mat lp = nn::frozen_logprobs(scratch, params, fe, s, mask);
    const int a = rng ? nn::sample_masked(lp, mask, *rng) : nn::argmax_masked(lp, mask);
    s = env::step(s, a).state;
  }
  return env::final_solution(s);
}

}  // namespace

routing::Solution greedy_decode(const nn::ParameterSet& params,
                                const std::shared_ptr<const routing::ProblemInstance>& inst) {
  const nn::FrozenPolicyEncoding fe =
      nn::freeze_policy_encoding(params, *inst, nn::BnMode::Eval);
  nn::Tape scratch;
  return rollout(params, fe, inst, scratch, nullptr);
}

routing::Solution sample_decode(const nn::ParameterSet& params,
                                const std::shared_ptr<const routing::ProblemInstance>& inst,
                                int k, util::Rng& rng) {
  if (k < 1) throw std::invalid_argument("sample_decode: k must be >= 1");
  const nn::FrozenPolicyEncoding fe =
      nn::freeze_policy_encoding(params, *inst, nn::BnMode::Eval);
  nn::Tape scratch;
  routing::Solution best;
  for (int i = 0; i < k; ++i) {
    routing::Solution cand = rollout(params, fe, inst, scratch, &rng);
    if (i == 0 || cand.length < best.length) best = std::move(cand);
  }
  return best;
}

}  // namespace epose::eval
