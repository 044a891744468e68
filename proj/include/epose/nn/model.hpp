#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "epose/env/env.hpp"
#include "epose/nn/params.hpp"
#include "epose/nn/tape.hpp"
#include "epose/util/rng.hpp"

namespace epose::nn {

// Train: normalize with batch statistics. Eval: use stored running averages.
enum class BnMode { Train, Eval };

// Batch statistics observed during a Train-mode pass, keyed by the entry
// index of the corresponding run_mean array (run_var is the next entry).
struct BnLog {
  struct Item {
    int run_mean_entry;
    Mat mean, var;
  };
  std::vector<Item> items;
};

// Lazily binds one parameter group's arrays as tape leaves.
class Binder {
 public:
  Binder(Tape& tape, const ParameterSet& params, std::string prefix)
      : tape_(&tape), params_(&params), prefix_(std::move(prefix)) {}

  Var operator()(const std::string& rel);
  const Mat& raw(const std::string& rel) const;
  int entry_index(const std::string& rel) const { return params_->require(prefix_ + rel); }
  const ParameterSet& params() const { return *params_; }

  // Adds scale * grad of every bound leaf into accum (indexed like the
  // parameter set; missing mats are created on first use).
  void collect_grads(std::vector<Mat>& accum, double scale) const;

 private:
  Tape* tape_;
  const ParameterSet* params_;
  std::string prefix_;
  std::unordered_map<int, Var> bound_;
};

struct EncodeOut {
  Var nodes;  // m x d node embeddings
  Var graph;  // 1 x d mean embedding
};

// Input projection + `layers` attention blocks under enc{l}/ of the binder's
// group. Policy groups use cfg.encoder_layers, Q groups cfg.critic_layers.
EncodeOut encode_graph(Tape& t, Binder& b, const routing::ProblemInstance& inst,
                       BnMode mode, BnLog* log, int layers);

// Decoder key/value projections; computed once per episode and shared by all
// decode steps of that episode.
struct DecoderVars {
  Var Kg, Vg, Kp;
};
DecoderVars decoder_cache(Tape& t, Binder& b, Var nodes);

struct DecodeOut {
  Var logits;  // 1 x m, clipped, pre-mask
  Var logp;    // 1 x m, -inf on masked entries
};
DecodeOut decode_logprobs(Tape& t, Binder& b, const EncodeOut& enc, const DecoderVars& cache,
                          const env::ConstructionState& s,
                          const std::vector<std::uint8_t>& mask);

// State-value head on top of the policy embeddings (visited nodes receive a
// learned offset, then critic attention layers, mean-pool, small MLP).
Var critic_value(Tape& t, Binder& policy, const EncodeOut& enc,
                 const env::ConstructionState& s, BnMode mode, BnLog* log);

struct QOut {
  Var all;                    // 1 x m compatibility scores
  std::vector<int> feasible;  // indices with mask set
};
// Per-action Q head for one Q group; Kq is the cached key projection.
QOut q_head(Tape& t, Binder& qb, const EncodeOut& enc, Var Kq,
            const env::ConstructionState& s, const std::vector<std::uint8_t>& mask);

// Draws from exp(logp) restricted to the mask; falls back to the last
// feasible entry if rounding leaves the cumulative sum short of 1.
int sample_masked(const Mat& logp, const std::vector<std::uint8_t>& mask, util::Rng& rng);

// Highest log-probability among feasible entries; ties break to the lowest
// index (strict improvement comparison).
int argmax_masked(const Mat& logp, const std::vector<std::uint8_t>& mask);

// --- frozen (value-only) paths ----------------------------------------------

// Encoding snapshot used by decode-heavy evaluation and target computation;
// runs the same builders on a private tape and copies the values out.
struct FrozenPolicyEncoding {
  Mat nodes, graph, Kg, Vg, Kp;
};
FrozenPolicyEncoding freeze_policy_encoding(const ParameterSet& p,
                                            const routing::ProblemInstance& inst, BnMode mode);

// Log-probabilities at one state from a frozen encoding. `scratch` is cleared
// on entry; pass one tape per worker to reuse its allocations.
Mat frozen_logprobs(Tape& scratch, const ParameterSet& p, const FrozenPolicyEncoding& fe,
                    const env::ConstructionState& s, const std::vector<std::uint8_t>& mask);

struct FrozenQEncoding {
  Mat nodes, graph, Kq;
};
FrozenQEncoding freeze_q_encoding(const ParameterSet& p, const std::string& prefix,
                                  const routing::ProblemInstance& inst, BnMode mode);

// Q values over feasible actions from a frozen Q encoding.
std::vector<double> frozen_q_values(Tape& scratch, const ParameterSet& p,
                                    const std::string& prefix, const FrozenQEncoding& fe,
                                    const env::ConstructionState& s,
                                    const std::vector<std::uint8_t>& mask,
                                    std::vector<int>* feasible_out);

}  // namespace epose::nn
