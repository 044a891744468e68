#include "epose/nn/model.hpp"

#include <cmath>
#include <stdexcept>

namespace epose::nn {

using env::ConstructionState;
using routing::ProblemInstance;
using routing::ProblemKind;

Var Binder::operator()(const std::string& rel) {
  const int idx = params_->require(prefix_ + rel);
  const auto it = bound_.find(idx);
  if (it != bound_.end()) return it->second;
  const Var v = tape_->leaf_ref(&params_->value(idx));
  bound_.emplace(idx, v);
  return v;
}

const Mat& Binder::raw(const std::string& rel) const {
  return params_->value(params_->require(prefix_ + rel));
}

void Binder::collect_grads(std::vector<Mat>& accum, double scale) const {
  if (accum.size() < params_->size()) accum.resize(params_->size());
  for (const auto& [idx, var] : bound_) {
    if (!tape_->has_grad(var)) continue;
    const Mat& g = tape_->grad(var);
    Mat& dst = accum[static_cast<std::size_t>(idx)];
    if (dst.size() == 0) dst = Mat(g.rows, g.cols);
    for (std::size_t i = 0; i < dst.a.size(); ++i) dst.a[i] += scale * g.a[i];
  }
}

namespace {

// Multi-head self-attention over the rows of X.
Var self_attention(Tape& t, Binder& b, const std::string& base, Var X, int heads) {
  const int d = t.val(X).cols;
  const int dk = d / heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  const Var Q = t.matmul(X, b(base + "attn/Wq"));
  const Var K = t.matmul(X, b(base + "attn/Wk"));
  const Var V = t.matmul(X, b(base + "attn/Wv"));
  std::vector<Var> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const Var Qh = t.slice_cols(Q, h * dk, dk);
    const Var Kh = t.slice_cols(K, h * dk, dk);
    const Var Vh = t.slice_cols(V, h * dk, dk);
    const Var A = t.softmax_rows(t.scale(t.matmul_nt(Qh, Kh), inv_sqrt_dk));
    outs.push_back(t.matmul(A, Vh));
  }
  return t.matmul(t.concat_cols(outs), b(base + "attn/Wo"));
}

Var bn_sublayer(Tape& t, Binder& b, const std::string& base, Var x, BnMode mode, BnLog* log) {
  Tape::BnStats stats;
  const bool train = mode == BnMode::Train;
  const Var y = t.batchnorm(x, b(base + "gamma"), b(base + "beta"), &b.raw(base + "run_mean"),
                            &b.raw(base + "run_var"), train, 1e-5,
                            train && log ? &stats : nullptr);
  if (train && log)
    log->items.push_back({b.entry_index(base + "run_mean"), std::move(stats.mean),
                          std::move(stats.var)});
  return y;
}

// `layers` blocks of [attention, feed-forward], each with a skip connection
// followed by batch normalization. `base` selects the layer family within the
// binder's group ("" for the main encoder, "vcrit/" for the value critic).
Var encoder_stack(Tape& t, Binder& b, const std::string& base, Var X, int layers, int heads,
                  BnMode mode, BnLog* log) {
  for (int l = 0; l < layers; ++l) {
    const std::string lb = base + "enc" + std::to_string(l) + "/";
    const Var h = self_attention(t, b, lb, X, heads);
    X = bn_sublayer(t, b, lb + "bn1/", t.add(X, h), mode, log);
    const Var f1 = t.relu(t.add_rowvec(t.matmul(X, b(lb + "ff/W1")), b(lb + "ff/b1")));
    const Var f2 = t.add_rowvec(t.matmul(f1, b(lb + "ff/W2")), b(lb + "ff/b2"));
    X = bn_sublayer(t, b, lb + "bn2/", t.add(X, f2), mode, log);
  }
  return X;
}

// Context row shared by the policy decoder and the Q heads. `ph` is the
// prefix under which TSP start-of-episode placeholders live ("dec/" for the
// policy, "head/" for Q groups).
Var build_context(Tape& t, Binder& b, const EncodeOut& enc, const ConstructionState& s,
                  const std::string& ph) {
  if (s.instance->kind == ProblemKind::Tsp) {
    Var first, last;
    if (s.sequence.empty()) {
      first = b(ph + "first_ph");
      last = b(ph + "last_ph");
    } else {
      first = t.row(enc.nodes, s.sequence.front());
      last = t.row(enc.nodes, s.current);
    }
    return t.concat_cols({enc.graph, first, last});
  }
  const Var last = t.row(enc.nodes, s.current);
  const Var cap = t.scalar(env::remaining_capacity_fraction(s));
  return t.concat_cols({enc.graph, last, cap});
}

}  // namespace

EncodeOut encode_graph(Tape& t, Binder& b, const ProblemInstance& inst, BnMode mode, BnLog* log,
                       int layers) {
  const int m = inst.node_count();
  Var X0;
  if (inst.kind == ProblemKind::Tsp) {
    Mat feats(m, 2);
    for (int i = 0; i < m; ++i) {
      feats(i, 0) = inst.coords[static_cast<std::size_t>(i)].x;
      feats(i, 1) = inst.coords[static_cast<std::size_t>(i)].y;
    }
    X0 = t.add_rowvec(t.matmul(t.leaf(std::move(feats)), b("embed/W")), b("embed/b"));
  } else {
    // Row 0 is the depot with its own projection; customers carry their
    // demand fraction as a third feature.
    Mat dep(1, 2);
    dep(0, 0) = inst.depot.x;
    dep(0, 1) = inst.depot.y;
    const int mc = inst.customer_count();
    Mat cust(mc, 3);
    for (int i = 0; i < mc; ++i) {
      cust(i, 0) = inst.coords[static_cast<std::size_t>(i)].x;
      cust(i, 1) = inst.coords[static_cast<std::size_t>(i)].y;
      cust(i, 2) = inst.demand_fraction(i + 1);
    }
    const Var dr = t.add_rowvec(t.matmul(t.leaf(std::move(dep)), b("embed_depot/W")),
                                b("embed_depot/b"));
    const Var cr = t.add_rowvec(t.matmul(t.leaf(std::move(cust)), b("embed/W")), b("embed/b"));
    X0 = t.concat_rows({dr, cr});
  }
  const Var X = encoder_stack(t, b, "", X0, layers, b.params().config().heads, mode, log);
  return EncodeOut{X, t.mean_rows(X)};
}

DecoderVars decoder_cache(Tape& t, Binder& b, Var nodes) {
  return DecoderVars{t.matmul(nodes, b("dec/Wk_g")), t.matmul(nodes, b("dec/Wv_g")),
                     t.matmul(nodes, b("dec/Wk_p"))};
}

DecodeOut decode_logprobs(Tape& t, Binder& b, const EncodeOut& enc, const DecoderVars& cache,
                          const ConstructionState& s, const std::vector<std::uint8_t>& mask) {
  const NetConfig& cfg = b.params().config();
  const int d = cfg.embed_dim;
  const int dk = d / cfg.heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  const Var ctx = build_context(t, b, enc, s, "dec/");
  const Var q0 = t.matmul(ctx, b("dec/Wq_ctx"));

  // One masked glimpse over the nodes, then a clipped pointer layer.
  std::vector<Var> heads_out;
  heads_out.reserve(static_cast<std::size_t>(cfg.heads));
  for (int h = 0; h < cfg.heads; ++h) {
    const Var qh = t.slice_cols(q0, h * dk, dk);
    const Var Kh = t.slice_cols(cache.Kg, h * dk, dk);
    const Var Vh = t.slice_cols(cache.Vg, h * dk, dk);
    const Var a = t.masked_softmax_vec(t.scale(t.matmul_nt(qh, Kh), inv_sqrt_dk), mask);
    heads_out.push_back(t.matmul(a, Vh));
  }
  const Var glimpse = t.matmul(t.concat_cols(heads_out), b("dec/Wo_g"));

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const Var u = t.scale(t.tanh_op(t.scale(t.matmul_nt(glimpse, cache.Kp), inv_sqrt_d)),
                        cfg.clip_c);
  return DecodeOut{u, t.masked_log_softmax_vec(u, mask)};
}

Var critic_value(Tape& t, Binder& policy, const EncodeOut& enc, const ConstructionState& s,
                 BnMode mode, BnLog* log) {
  const int m = s.instance->node_count();
  Mat ind(m, 1);
  for (int i = 0; i < m; ++i) ind(i, 0) = s.visited[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  const Var offset = t.matmul(t.leaf(std::move(ind)), policy("vcrit/visited"));
  Var X = t.add(enc.nodes, offset);
  X = encoder_stack(t, policy, "vcrit/", X, policy.params().config().critic_layers,
                    policy.params().config().heads, mode, log);
  const Var g = t.mean_rows(X);
  const Var h1 = t.relu(t.add_rowvec(t.matmul(g, policy("vcrit/head/W1")),
                                     policy("vcrit/head/b1")));
  return t.add_rowvec(t.matmul(h1, policy("vcrit/head/W2")), policy("vcrit/head/b2"));
}

QOut q_head(Tape& t, Binder& qb, const EncodeOut& enc, Var Kq, const ConstructionState& s,
            const std::vector<std::uint8_t>& mask) {
  const int d = qb.params().config().embed_dim;
  const Var ctx = build_context(t, qb, enc, s, "head/");
  const Var q0 = t.matmul(ctx, qb("head/Wq_ctx"));
  const Var all = t.scale(t.matmul_nt(q0, Kq), 1.0 / std::sqrt(static_cast<double>(d)));
  QOut out;
  out.all = all;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.feasible.push_back(static_cast<int>(i));
  return out;
}

int sample_masked(const Mat& logp, const std::vector<std::uint8_t>& mask, util::Rng& rng) {
  const double r = rng.uniform();
  double cum = 0.0;
  int last = -1;
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (!mask[j]) continue;
    last = static_cast<int>(j);
    cum += std::exp(logp.a[j]);
    if (r < cum) return last;
  }
  return last;
}

int argmax_masked(const Mat& logp, const std::vector<std::uint8_t>& mask) {
  int best = -1;
  double bv = 0.0;
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (!mask[j]) continue;
    if (best < 0 || logp.a[j] > bv) {
      best = static_cast<int>(j);
      bv = logp.a[j];
    }
  }
  return best;
}

// --- frozen paths --------------------------------------------------------------

FrozenPolicyEncoding freeze_policy_encoding(const ParameterSet& p, const ProblemInstance& inst,
                                            BnMode mode) {
  Tape t;
  Binder b(t, p, "policy/");
  const EncodeOut enc = encode_graph(t, b, inst, mode, nullptr, p.config().encoder_layers);
  const DecoderVars cache = decoder_cache(t, b, enc.nodes);
  return FrozenPolicyEncoding{t.val(enc.nodes), t.val(enc.graph), t.val(cache.Kg),
                              t.val(cache.Vg), t.val(cache.Kp)};
}

Mat frozen_logprobs(Tape& scratch, const ParameterSet& p, const FrozenPolicyEncoding& fe,
                    const ConstructionState& s, const std::vector<std::uint8_t>& mask) {
  scratch.clear();
  Binder b(scratch, p, "policy/");
  const EncodeOut enc{scratch.leaf_ref(&fe.nodes), scratch.leaf_ref(&fe.graph)};
  const DecoderVars cache{scratch.leaf_ref(&fe.Kg), scratch.leaf_ref(&fe.Vg),
                          scratch.leaf_ref(&fe.Kp)};
  const DecodeOut out = decode_logprobs(scratch, b, enc, cache, s, mask);
  return scratch.val(out.logp);
}

FrozenQEncoding freeze_q_encoding(const ParameterSet& p, const std::string& prefix,
                                  const ProblemInstance& inst, BnMode mode) {
  Tape t;
  Binder b(t, p, prefix);
  const EncodeOut enc = encode_graph(t, b, inst, mode, nullptr, p.config().critic_layers);
  const Var Kq = t.matmul(enc.nodes, b("head/Wk"));
  return FrozenQEncoding{t.val(enc.nodes), t.val(enc.graph), t.val(Kq)};
}

std::vector<double> frozen_q_values(Tape& scratch, const ParameterSet& p,
                                    const std::string& prefix, const FrozenQEncoding& fe,
                                    const ConstructionState& s,
                                    const std::vector<std::uint8_t>& mask,
                                    std::vector<int>* feasible_out) {
  scratch.clear();
  Binder b(scratch, p, prefix);
  const EncodeOut enc{scratch.leaf_ref(&fe.nodes), scratch.leaf_ref(&fe.graph)};
  const QOut out = q_head(scratch, b, enc, scratch.leaf_ref(&fe.Kq), s, mask);
  const Mat& all = scratch.val(out.all);
  std::vector<double> q;
  q.reserve(out.feasible.size());
  for (const int j : out.feasible) q.push_back(all.a[static_cast<std::size_t>(j)]);
  if (feasible_out) *feasible_out = out.feasible;
  return q;
}

}  // namespace epose::nn
