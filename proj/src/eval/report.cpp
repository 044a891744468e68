#include "epose/eval/report.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "epose/eval/decode.hpp"
#include "epose/routing/core.hpp"
#include "epose/util/parallel.hpp"

namespace epose::eval {

namespace {

constexpr std::uint64_t kStreamEvalSample = 0x6576616c;

std::string format_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

EvalReport evaluate(const nn::ParameterSet& params,
                    const std::vector<std::shared_ptr<const routing::ProblemInstance>>& instances,
                    const EvalOptions& opts) {
  if (opts.decode_mode != "greedy" && opts.decode_mode != "sample")
    throw std::invalid_argument("evaluate: decode mode must be greedy or sample");
  if (opts.decode_mode == "sample" && opts.samples < 1)
    throw std::invalid_argument("evaluate: samples must be >= 1");
  const bool sampling = opts.decode_mode == "sample";

  EvalReport rep;
  rep.decode_mode = opts.decode_mode;
  rep.samples = sampling ? opts.samples : 1;

  std::vector<double> pred(instances.size());
  const auto t0 = std::chrono::steady_clock::now();
  util::parallel_items(instances.size(), [&](std::size_t i) {
    if (sampling) {
      util::Rng rng(util::derive_seed(opts.seed, kStreamEvalSample, i));
      pred[i] = sample_decode(params, instances[i], opts.samples, rng).length;
    } else {
      pred[i] = greedy_decode(params, instances[i]).length;
    }
  });
  const auto t1 = std::chrono::steady_clock::now();
  rep.decode_seconds = std::chrono::duration<double>(t1 - t0).count();

  std::vector<Reference> refs(instances.size());
  util::parallel_items(instances.size(), [&](std::size_t i) {
    refs[i] = reference_solution(instances[i]);
  });

  rep.rows.resize(instances.size());
  double len_sum = 0.0, gap_sum = 0.0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const routing::ProblemInstance& inst = *instances[i];
    EvalRow& row = rep.rows[i];
    row.instance_id = std::string(routing::kind_name(inst.kind)) +
                      std::to_string(inst.customer_count()) + "-" + std::to_string(inst.seed);
    row.kind = inst.kind;
    row.n = inst.customer_count();
    row.pred_len = pred[i];
    row.ref_len = refs[i].solution.length;
    row.gap_pct = optimality_gap(row.pred_len, row.ref_len);
    row.decode_mode = rep.decode_mode;
    row.samples = rep.samples;
    len_sum += row.pred_len;
    gap_sum += row.gap_pct;
    if (i == 0) rep.reference_method = refs[i].method;
  }
  if (!instances.empty()) {
    rep.mean_len = len_sum / static_cast<double>(instances.size());
    rep.mean_gap = gap_sum / static_cast<double>(instances.size());
  }
  return rep;
}

void write_report_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "instance_id,kind,n,pred_len,ref_len,gap_pct,decode_mode,samples\n";
  for (const EvalRow& r : report.rows) {
    out << r.instance_id << ',' << routing::kind_name(r.kind) << ',' << r.n << ','
        << format_num(r.pred_len) << ',' << format_num(r.ref_len) << ','
        << format_num(r.gap_pct) << ',' << r.decode_mode << ',' << r.samples << '\n';
  }
  if (!out.flush()) throw std::runtime_error("write failed: " + path);
}

std::string summary_line(const EvalReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "instances=%zu mean_len=%.4f mean_gap=%.2f%% ref=%s decode=%s(%d) "
                "decode_seconds=%.3f",
                report.rows.size(), report.mean_len, report.mean_gap,
                report.reference_method.c_str(), report.decode_mode.c_str(), report.samples,
                report.decode_seconds);
  return buf;
}

}  // namespace epose::eval
