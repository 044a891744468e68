#pragma once

#include <memory>

#include "epose/nn/model.hpp"
#include "epose/routing/types.hpp"
#include "epose/util/rng.hpp"

namespace epose::eval {

// Constructs a solution by taking the most probable feasible node at every
// step (ties to the lowest index). Deterministic; normalization runs in
// evaluation mode, so repeated calls agree exactly.
routing::Solution greedy_decode(const nn::ParameterSet& params,
                                const std::shared_ptr<const routing::ProblemInstance>& inst);

// Best of k stochastic rollouts; the instance is encoded once and all k
// decodes run against the frozen encoding. Ties keep the earliest rollout.
routing::Solution sample_decode(const nn::ParameterSet& params,
                                const std::shared_ptr<const routing::ProblemInstance>& inst,
                                int k, util::Rng& rng);

}  // namespace epose::eval
