#include "epose/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "epose/eval/decode.hpp"
#include "epose/replay/replay.hpp"
#include "epose/routing/core.hpp"
#include "epose/train/losses.hpp"
#include "epose/train/optim.hpp"
#include "epose/util/parallel.hpp"

namespace epose::train {

namespace fs = std::filesystem;

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Epose: return "epose";
    case Mode::OffpolicyFixedAlpha: return "offpolicy-fixed";
    case Mode::OnpolicyFixedEntropy: return "onpolicy-fixed";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  if (s == "epose") return Mode::Epose;
  if (s == "offpolicy-fixed") return Mode::OffpolicyFixedAlpha;
  if (s == "onpolicy-fixed") return Mode::OnpolicyFixedEntropy;
  throw std::invalid_argument("unknown mode: " + s +
                              " (expected epose, offpolicy-fixed, or onpolicy-fixed)");
}

void TrainConfig::validate() const {
  net.validate();
  if (n < 2) throw std::invalid_argument("n must be >= 2");
  if (batch < 1) throw std::invalid_argument("batch must be >= 1");
  if (steps_per_epoch < 1 || epochs < 1)
    throw std::invalid_argument("steps and epochs must be >= 1");
  if (lr <= 0.0 || alpha_lr <= 0.0) throw std::invalid_argument("learning rates must be > 0");
  if (eta <= 0.0 || eta >= 1.0) throw std::invalid_argument("eta must lie in (0, 1)");
  if (alpha_init <= 0.0) throw std::invalid_argument("alpha_init must be > 0");
  if (entropy_coeff <= 0.0) throw std::invalid_argument("entropy_coeff must be > 0");
  if (replay_capacity == 0) throw std::invalid_argument("replay_capacity must be > 0");
  if (q_batch < 0) throw std::invalid_argument("q_batch must be >= 0");
  if (val_instances < 1) throw std::invalid_argument("val_instances must be >= 1");
}

const char* const kMetricsHeader =
    "step,epoch,trajectories,train_return,val_greedy_len,entropy,alpha,loss_q1,loss_q2,"
    "loss_pi";

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

// Seed-stream tags: every random draw in a run comes from a substream keyed
// by purpose, so the modes share instance and rollout randomness exactly.
constexpr std::uint64_t kStreamInit = 1;
constexpr std::uint64_t kStreamInstance = 2;
constexpr std::uint64_t kStreamRollout = 3;
constexpr std::uint64_t kStreamReplay = 4;
constexpr std::uint64_t kStreamVal = 5;

constexpr int kRolloutChunks = 16;
constexpr double kBnMomentum = 0.1;

// Folds recorded batch statistics into the stored running averages, one
// averaged update per training step.
void apply_bn_updates(nn::ParameterSet& params, const nn::BnLog& log) {
  struct Agg {
    nn::Mat mean, var;
    int count = 0;
  };
  std::unordered_map<int, Agg> agg;
  for (const nn::BnLog::Item& it : log.items) {
    Agg& a = agg[it.run_mean_entry];
    if (a.count == 0) {
      a.mean = it.mean;
      a.var = it.var;
    } else {
      for (std::size_t k = 0; k < a.mean.a.size(); ++k) {
        a.mean.a[k] += it.mean.a[k];
        a.var.a[k] += it.var.a[k];
      }
    }
    ++a.count;
  }
  for (auto& [idx, a] : agg) {
    nn::Mat& rm = params.value(idx);
    const std::string& name = params.entry(idx).name;
    nn::Mat& rv = params.value(
        params.require(name.substr(0, name.size() - 8) + "run_var"));
    const double inv = 1.0 / a.count;
    for (std::size_t k = 0; k < rm.a.size(); ++k) {
      rm.a[k] = (1.0 - kBnMomentum) * rm.a[k] + kBnMomentum * a.mean.a[k] * inv;
      rv.a[k] = (1.0 - kBnMomentum) * rv.a[k] + kBnMomentum * a.var.a[k] * inv;
    }
  }
}

double validation_mean(const nn::ParameterSet& params,
                       const std::vector<std::shared_ptr<const routing::ProblemInstance>>& val) {
  std::vector<double> lens(val.size());
  util::parallel_items(val.size(), [&](std::size_t i) {
    lens[i] = eval::greedy_decode(params, val[i]).length;
  });
  double sum = 0.0;
  for (const double v : lens) sum += v;
  return sum / static_cast<double>(val.size());
}

void require_finite(double v, const char* what, int step) {
  if (!std::isfinite(v)) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "non-finite %s at step %d", what, step);
    throw NumericError(buf);
  }
}

}  // namespace

std::string metrics_line(const MetricsRow& r) {
  std::string line;
  line += std::to_string(r.step);
  line += ',';
  line += std::to_string(r.epoch);
  line += ',';
  line += std::to_string(r.trajectories);
  line += ',';
  line += num(r.train_return);
  line += ',';
  line += opt_num(r.val_greedy_len);
  line += ',';
  line += num(r.entropy);
  line += ',';
  line += num(r.alpha);
  line += ',';
  line += opt_num(r.loss_q1);
  line += ',';
  line += opt_num(r.loss_q2);
  line += ',';
  line += num(r.loss_pi);
  return line;
}

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  const bool onpolicy = cfg.mode == Mode::OnpolicyFixedEntropy;
  const int q_batch = cfg.q_batch > 0 ? cfg.q_batch : cfg.batch;

  nn::ParameterSet params = nn::ParameterSet::build(
      cfg.net, cfg.kind, util::derive_seed(cfg.seed, kStreamInit), std::log(cfg.alpha_init));

  TrainResult result;

  // File outputs are optional so tests can train fully in memory.
  std::ofstream metrics_out;
  std::string ckpt_path, ckpt_tmp;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    result.metrics_path = (fs::path(cfg.out_dir) / "metrics.csv").string();
    ckpt_path = (fs::path(cfg.out_dir) / "checkpoint.bin").string();
    ckpt_tmp = ckpt_path + ".tmp";
    result.checkpoint_path = ckpt_path;
    nn::save_checkpoint((fs::path(cfg.out_dir) / "checkpoint_init.bin").string(), params);
    metrics_out.open(result.metrics_path);
    if (!metrics_out) throw std::runtime_error("cannot open for write: " + result.metrics_path);
    metrics_out << kMetricsHeader << '\n';
  }

  std::vector<std::shared_ptr<const routing::ProblemInstance>> val;
  val.reserve(static_cast<std::size_t>(cfg.val_instances));
  for (int i = 0; i < cfg.val_instances; ++i)
    val.push_back(std::make_shared<routing::ProblemInstance>(routing::generate_instance(
        cfg.kind, cfg.n,
        util::derive_seed(cfg.seed, kStreamVal, static_cast<std::uint64_t>(i)))));
  result.initial_val_mean = validation_mean(params, val);

  Adam adam_pi(params.trainable_indices(nn::Group::Policy), cfg.lr);
  Adam adam_q1(params.trainable_indices(nn::Group::Q1), cfg.lr);
  Adam adam_q2(params.trainable_indices(nn::Group::Q2), cfg.lr);
  Adam adam_alpha({params.require("log_alpha")}, cfg.alpha_lr);

  replay::ReplayBuffer buffer(cfg.replay_capacity);
  util::Rng replay_rng(util::derive_seed(cfg.seed, kStreamReplay));

  const std::size_t B = static_cast<std::size_t>(cfg.batch);
  std::uint64_t trajectories = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (int it = 1; it <= cfg.steps_per_epoch; ++it) {
      const int step = (epoch - 1) * cfg.steps_per_epoch + it;
      const double alpha = params.alpha();
      require_finite(alpha, "alpha", step);

      std::vector<std::shared_ptr<const routing::ProblemInstance>> batch(B);
      for (std::size_t i = 0; i < B; ++i)
        batch[i] = std::make_shared<routing::ProblemInstance>(routing::generate_instance(
            cfg.kind, cfg.n,
            util::derive_seed(cfg.seed, kStreamInstance, static_cast<std::uint64_t>(step), i)));

      // Fresh on-policy rollouts; per-chunk tapes and accumulators merged in
      // chunk order keep the result independent of the worker count.
      std::vector<EpisodeResult> episodes(B);
      std::vector<GradAccum> chunk_grads(kRolloutChunks, GradAccum(params.size()));
      std::vector<nn::BnLog> chunk_logs(kRolloutChunks);
      util::parallel_chunks(B, kRolloutChunks,
                            [&](std::size_t c, std::size_t begin, std::size_t end) {
        nn::Tape tape;
        for (std::size_t i = begin; i < end; ++i) {
          util::Rng rng(util::derive_seed(cfg.seed, kStreamRollout,
                                          static_cast<std::uint64_t>(step), i));
          EpisodePassConfig pc;
          pc.source = ActionSource::Sample;
          pc.rng = &rng;
          pc.alpha = alpha;
          pc.bn_log = &chunk_logs[c];
          episodes[i] = episode_pass(tape, params, batch[i], pc, &chunk_grads[c]);
        }
      });
      trajectories += B;

      GradAccum pi_grads(params.size());
      nn::BnLog pi_log;
      for (int c = 0; c < kRolloutChunks; ++c) {
        pi_grads.add(chunk_grads[c]);
        pi_log.items.insert(pi_log.items.end(), chunk_logs[c].items.begin(),
                            chunk_logs[c].items.end());
      }
      pi_grads.scale(1.0 / static_cast<double>(B));

      MetricsRow row;
      row.step = step;
      row.epoch = epoch;
      row.trajectories = trajectories;
      row.alpha = alpha;
      double ret_sum = 0.0, ent_sum = 0.0, pol_sum = 0.0;
      std::size_t step_count = 0;
      for (const EpisodeResult& ep : episodes) {
        ret_sum += ep.total_return;
        pol_sum += ep.policy_objective;
        for (const double h : ep.step_entropy) ent_sum += h;
        step_count += ep.step_entropy.size();
      }
      row.train_return = ret_sum / static_cast<double>(B);
      row.entropy = ent_sum / static_cast<double>(step_count);
      row.loss_pi = pol_sum / static_cast<double>(B);
      require_finite(row.loss_pi, "policy loss", step);

      if (!onpolicy) {
        for (std::size_t i = 0; i < B; ++i)
          buffer.push_episode(batch[i], episodes[i].actions);

        // Q regression once the buffer can fill a batch; both groups share
        // the sampled transitions and targets.
        if (buffer.size() >= static_cast<std::size_t>(q_batch)) {
          std::vector<replay::SampleRef> refs(static_cast<std::size_t>(q_batch));
          for (auto& ref : refs) ref = buffer.sample_ref(replay_rng);
          std::vector<replay::Transition> trans(refs.size());
          util::parallel_items(refs.size(),
                               [&](std::size_t i) { trans[i] = buffer.materialize(refs[i]); });

          const std::vector<double> targets = compute_q_targets(params, trans, alpha);

          GradAccum q1_grads(params.size());
          nn::BnLog q1_log;
          row.loss_q1 = compute_q_loss(params, "q1/", trans, targets, &q1_grads, &q1_log);
          require_finite(*row.loss_q1, "q1 loss", step);
          adam_q1.step(params, q1_grads.g);
          apply_bn_updates(params, q1_log);

          GradAccum q2_grads(params.size());
          nn::BnLog q2_log;
          row.loss_q2 = compute_q_loss(params, "q2/", trans, targets, &q2_grads, &q2_log);
          require_finite(*row.loss_q2, "q2 loss", step);
          adam_q2.step(params, q2_grads.g);
          apply_bn_updates(params, q2_log);
        }
      }

      adam_pi.step(params, pi_grads.g);
      apply_bn_updates(params, pi_log);

      if (cfg.mode == Mode::Epose) {
        const AlphaLoss al = compute_alpha_loss(episodes, alpha, cfg.entropy_coeff);
        require_finite(al.value, "alpha loss", step);
        std::vector<nn::Mat> ag(params.size());
        ag[static_cast<std::size_t>(params.require("log_alpha"))] =
            nn::Mat::scalar(al.grad_log_alpha);
        adam_alpha.step(params, ag);
      }

      if (!onpolicy) params.soft_update_targets(cfg.eta);

      if (it == cfg.steps_per_epoch) {
        row.val_greedy_len = validation_mean(params, val);
        result.final_val_mean = *row.val_greedy_len;
        if (!ckpt_path.empty()) {
          nn::save_checkpoint(ckpt_tmp, params);
          fs::rename(ckpt_tmp, ckpt_path);
        }
      }

      if (metrics_out.is_open()) {
        metrics_out << metrics_line(row) << '\n';
        if (it == cfg.steps_per_epoch) metrics_out.flush();
      }
      result.metrics.push_back(std::move(row));
    }
  }

  result.trajectories = trajectories;
  result.replay_reads = buffer.sampled_transitions();
  result.params = std::move(params);
  return result;
}

}  // namespace epose::train
