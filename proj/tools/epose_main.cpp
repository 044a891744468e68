#include <cstdio>
#include <exception>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "epose/eval/report.hpp"
#include "epose/routing/core.hpp"
#include "epose/train/trainer.hpp"
#include "epose/util/rng.hpp"

namespace fs = std::filesystem;

namespace {

// Exit codes: 0 success, 1 I/O, 2 usage or validation, 3 numeric failure.
constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

constexpr std::uint64_t kStreamGenerate = 0x67656e;

struct GenerateArgs {
  std::string kind = "tsp";
  int n = 20;
  int count = 1000;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_generate(const GenerateArgs& a) {
  epose::routing::ProblemKind kind;
  if (!epose::routing::parse_kind(a.kind, kind))
    throw std::invalid_argument("unknown kind: " + a.kind);
  std::vector<epose::routing::ProblemInstance> instances;
  instances.reserve(static_cast<std::size_t>(a.count));
  for (int i = 0; i < a.count; ++i)
    instances.push_back(epose::routing::generate_instance(
        kind, a.n,
        epose::util::derive_seed(a.seed, kStreamGenerate, static_cast<std::uint64_t>(i))));
  epose::routing::write_instances(a.out, instances);
  std::printf("wrote %d %s instances (n=%d) to %s\n", a.count, a.kind.c_str(), a.n,
              a.out.c_str());
  return kExitOk;
}

struct TrainArgs {
  epose::train::TrainConfig cfg;
  std::string kind = "tsp";
  std::string mode = "epose";
  std::string out = "run";
};

int cmd_train(TrainArgs& a) {
  if (!epose::routing::parse_kind(a.kind, a.cfg.kind))
    throw std::invalid_argument("unknown kind: " + a.kind);
  a.cfg.mode = epose::train::parse_mode(a.mode);
  a.cfg.out_dir = a.out;
  a.cfg.validate();
  const epose::train::TrainResult res = epose::train::train(a.cfg);
  std::printf("trained %s %s n=%d: steps=%zu trajectories=%llu val %.4f -> %.4f\n",
              epose::train::mode_name(a.cfg.mode), a.kind.c_str(), a.cfg.n,
              res.metrics.size(), static_cast<unsigned long long>(res.trajectories),
              res.initial_val_mean, res.final_val_mean);
  std::printf("checkpoint: %s\nmetrics: %s\n", res.checkpoint_path.c_str(),
              res.metrics_path.c_str());
  return kExitOk;
}

struct EvalArgs {
  std::string ckpt;
  std::string instances;
  std::string decode = "greedy";
  int k = 1280;
  std::uint64_t seed = 0;
  std::string report;
};

int cmd_eval(const EvalArgs& a) {
  // Missing inputs are usage errors, not I/O failures.
  if (!fs::exists(a.ckpt)) throw std::invalid_argument("checkpoint not found: " + a.ckpt);
  if (!fs::exists(a.instances))
    throw std::invalid_argument("instance file not found: " + a.instances);

  const epose::nn::ParameterSet params = epose::nn::load_checkpoint(a.ckpt);
  std::vector<epose::routing::ProblemInstance> loaded =
      epose::routing::read_instances(a.instances);
  if (loaded.empty()) throw std::invalid_argument("instance file is empty: " + a.instances);

  std::vector<std::shared_ptr<const epose::routing::ProblemInstance>> instances;
  instances.reserve(loaded.size());
  for (auto& inst : loaded) {
    if (inst.kind != params.kind())
      throw std::invalid_argument(
          std::string("checkpoint/instance kind mismatch: checkpoint is ") +
          epose::routing::kind_name(params.kind()) + ", file has " +
          epose::routing::kind_name(inst.kind));
    instances.push_back(
        std::make_shared<const epose::routing::ProblemInstance>(std::move(inst)));
  }

  epose::eval::EvalOptions opts;
  opts.decode_mode = a.decode;
  opts.samples = a.k;
  opts.seed = a.seed;
  const epose::eval::EvalReport rep = epose::eval::evaluate(params, instances, opts);
  if (!a.report.empty()) epose::eval::write_report_csv(a.report, rep);
  std::printf("%s\n", epose::eval::summary_line(rep).c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EPOSE routing: constructive policies with learned temperature"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key=value file");
  app.config_formatter(std::make_shared<CLI::ConfigINI>());

  GenerateArgs gen;
  CLI::App* g = app.add_subcommand("generate", "Write a JSONL instance file");
  g->add_option("--kind", gen.kind, "tsp, cvrp, or sdvrp")->capture_default_str();
  g->add_option("--n", gen.n, "customers per instance")->check(CLI::Range(2, 10000))
      ->capture_default_str();
  g->add_option("--count", gen.count, "instances to write")->check(CLI::PositiveNumber)
      ->capture_default_str();
  g->add_option("--seed", gen.seed, "base seed")->capture_default_str();
  g->add_option("--out", gen.out, "output path")->required();

  TrainArgs tr;
  CLI::App* t = app.add_subcommand("train", "Train a policy");
  t->add_option("--kind", tr.kind, "tsp, cvrp, or sdvrp")->capture_default_str();
  t->add_option("--n", tr.cfg.n, "customers per instance")->check(CLI::Range(2, 10000))
      ->capture_default_str();
  t->add_option("--mode", tr.mode, "epose, offpolicy-fixed, or onpolicy-fixed")
      ->capture_default_str();
  t->add_option("--steps", tr.cfg.steps_per_epoch, "training steps per epoch")
      ->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--epochs", tr.cfg.epochs, "epochs (validation runs per epoch)")
      ->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--batch", tr.cfg.batch, "fresh episodes per step")
      ->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--lr", tr.cfg.lr, "learning rate")->capture_default_str();
  t->add_option("--eta", tr.cfg.eta, "target smoothing coefficient")->capture_default_str();
  t->add_option("--alpha-init", tr.cfg.alpha_init,
                "initial temperature (the fixed value in fixed-alpha modes)")
      ->capture_default_str();
  t->add_option("--alpha-lr", tr.cfg.alpha_lr, "temperature learning rate")
      ->capture_default_str();
  t->add_option("--entropy-coeff", tr.cfg.entropy_coeff, "entropy target coefficient")
      ->capture_default_str();
  t->add_option("--replay-capacity", tr.cfg.replay_capacity, "replay size in transitions")
      ->capture_default_str();
  t->add_option("--q-batch", tr.cfg.q_batch, "transitions per Q update (0: use --batch)")
      ->capture_default_str();
  t->add_option("--val-instances", tr.cfg.val_instances, "held-out validation instances")
      ->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--seed", tr.cfg.seed, "run seed")->capture_default_str();
  t->add_option("--out", tr.out, "output directory")->capture_default_str();
  t->add_option("--embed", tr.cfg.net.embed_dim, "embedding width")->capture_default_str();
  t->add_option("--layers", tr.cfg.net.encoder_layers, "encoder layers")
      ->capture_default_str();
  t->add_option("--heads", tr.cfg.net.heads, "attention heads")->capture_default_str();
  t->add_option("--ff", tr.cfg.net.ff_dim, "feed-forward width")->capture_default_str();
  t->add_option("--clip", tr.cfg.net.clip_c, "logit clipping constant")->capture_default_str();
  t->add_option("--critic-layers", tr.cfg.net.critic_layers, "critic attention layers")
      ->capture_default_str();
  t->add_option("--critic-hidden", tr.cfg.net.critic_hidden, "critic hidden width")
      ->capture_default_str();

  EvalArgs ev;
  CLI::App* e = app.add_subcommand("eval", "Evaluate a checkpoint on an instance file");
  e->add_option("--ckpt", ev.ckpt, "checkpoint path")->required();
  e->add_option("--instances", ev.instances, "JSONL instance file")->required();
  e->add_option("--decode", ev.decode, "greedy or sample")->capture_default_str();
  e->add_option("--k", ev.k, "rollouts per instance for sampling")
      ->check(CLI::PositiveNumber)->capture_default_str();
  e->add_option("--seed", ev.seed, "sampling seed")->capture_default_str();
  e->add_option("--report", ev.report, "report CSV path (optional)");

  try {
    app.parse(argc, argv);
    if (g->parsed()) return cmd_generate(gen);
    if (t->parsed()) return cmd_train(tr);
    if (e->parsed()) return cmd_eval(ev);
    return kExitUsage;
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const epose::train::NumericError& err) {
    std::fprintf(stderr, "numeric failure: %s\n", err.what());
    return kExitNumeric;
  } catch (const std::invalid_argument& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitUsage;
  } catch (const std::logic_error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitUsage;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitIo;
  }
}
