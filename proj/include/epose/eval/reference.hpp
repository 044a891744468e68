#pragma once

#include <memory>
#include <string>

#include "epose/routing/types.hpp"

namespace epose::eval {

// Optimal TSP tour by dynamic programming over node subsets. Limited to
// n <= 16 (the table is 2^n * n); larger inputs are rejected.
routing::Solution exact_tsp(const routing::ProblemInstance& inst);

// Feasibility-aware greedy construction: always moves to the nearest node
// the environment allows (VRP returns to the depot only when no customer
// fits). Works for all three problem kinds.
routing::Solution nearest_neighbor(const std::shared_ptr<const routing::ProblemInstance>& inst);

// 2-edge exchange descent from a starting tour; TSP only. Output length is
// never above the input's.
routing::Solution two_opt(const routing::ProblemInstance& inst, const routing::Solution& start);

// 100 * (pred / ref - 1). ref must be positive.
double optimality_gap(double pred_len, double ref_len);

struct Reference {
  routing::Solution solution;
  std::string method;  // "exact", "two_opt", or "nearest_neighbor"
};

// Reference used by reports: exact TSP up to 16 nodes, 2-opt from
// nearest-neighbor for larger TSP, nearest-neighbor for VRP (an upper bound,
// so learned policies can show negative gaps there).
Reference reference_solution(const std::shared_ptr<const routing::ProblemInstance>& inst);

}  // namespace epose::eval
