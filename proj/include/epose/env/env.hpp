#pragma once

#include <memory>
#include <vector>

#include "epose/routing/types.hpp"

namespace epose::env {

// Partial construction state: the instance plus the visit prefix. States are
// value-like; step() returns a fresh copy. Capacity and SDVRP demand are
// tracked in integer units of 1/capacity_raw so split arithmetic is exact.
struct ConstructionState {
  std::shared_ptr<const routing::ProblemInstance> instance;
  std::vector<std::uint8_t> visited;   // per node; SDVRP: demand fully served
  std::vector<int> sequence;           // chosen nodes, in order
  std::vector<int> delivered_units;    // SDVRP: aligned with sequence, 0 at depot
  std::vector<int> remaining_units;    // SDVRP: per node, 0 for depot
  int capacity_units = 0;              // VRP: remaining vehicle capacity
  int current = -1;                    // current node, -1 before the first TSP pick
  bool terminal = false;

  int step_count() const { return static_cast<int>(sequence.size()); }
};

ConstructionState reset(std::shared_ptr<const routing::ProblemInstance> instance);

// Feasible-action mask over node indices. Non-terminal states always have at
// least one feasible action. Throws std::logic_error on terminal states.
std::vector<std::uint8_t> feasible_mask(const ConstructionState& s);

struct StepResult {
  ConstructionState state;
  double reward;  // negative incremental distance
};

// Applies one action. Throws std::invalid_argument if it is infeasible.
// The closing TSP edge back to the first node is folded into the final step,
// so per-episode reward sums equal -tour_length exactly (up to fp rounding).
StepResult step(const ConstructionState& s, int action);

// VRP: remaining vehicle capacity as a fraction of full capacity.
double remaining_capacity_fraction(const ConstructionState& s);

// Converts a terminal state into a Solution (throws std::logic_error before
// that). TSP: the visit order; VRP: the depot-anchored walk.
routing::Solution final_solution(const ConstructionState& s);

}  // namespace epose::env
