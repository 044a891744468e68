#pragma once

#include <memory>
#include <string>
#include <vector>

#include "epose/eval/reference.hpp"
#include "epose/nn/params.hpp"
#include "epose/routing/types.hpp"

namespace epose::eval {

struct EvalRow {
  std::string instance_id;
  routing::ProblemKind kind;
  int n = 0;
  double pred_len = 0.0;
  double ref_len = 0.0;
  double gap_pct = 0.0;
  std::string decode_mode;
  int samples = 1;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double mean_len = 0.0;
  double mean_gap = 0.0;
  double decode_seconds = 0.0;  // wall time of the decode phase only
  std::string decode_mode;      // "greedy" or "sample"
  int samples = 1;
  std::string reference_method;
};

struct EvalOptions {
  std::string decode_mode = "greedy";
  int samples = 1280;      // used when decode_mode == "sample"
  std::uint64_t seed = 0;  // per-instance sampling streams derive from this
};

// Decodes every instance (in parallel) and scores it against the standing
// reference: exact TSP for n <= 16, 2-opt for larger TSP, capacity-aware
// nearest-neighbor for VRP. Thread count never changes the report content.
EvalReport evaluate(const nn::ParameterSet& params,
                    const std::vector<std::shared_ptr<const routing::ProblemInstance>>& instances,
                    const EvalOptions& opts);

void write_report_csv(const std::string& path, const EvalReport& report);

// One line: mean length, mean gap, reference method, decode seconds.
std::string summary_line(const EvalReport& report);

}  // namespace epose::eval
