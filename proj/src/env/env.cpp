#include "epose/env/env.hpp"

#include <algorithm>
#include <stdexcept>

#include "epose/routing/core.hpp"

namespace epose::env {

using routing::ProblemKind;

ConstructionState reset(std::shared_ptr<const routing::ProblemInstance> instance) {
  if (!instance) throw std::invalid_argument("reset: null instance");
  if (auto r = routing::validate_instance(*instance); !r)
    throw std::invalid_argument("reset: " + r.message);

  ConstructionState s;
  s.instance = std::move(instance);
  const auto& inst = *s.instance;
  s.visited.assign(static_cast<std::size_t>(inst.node_count()), 0);
  if (inst.is_vrp()) {
    s.current = 0;  // vehicle starts at the depot with full capacity
    s.capacity_units = inst.capacity_raw;
    if (inst.kind == ProblemKind::Sdvrp) {
      s.remaining_units.assign(static_cast<std::size_t>(inst.node_count()), 0);
      for (int v = 1; v < inst.node_count(); ++v)
        s.remaining_units[static_cast<std::size_t>(v)] = inst.demand_units_of(v);
    }
  }
  return s;
}

std::vector<std::uint8_t> feasible_mask(const ConstructionState& s) {
  if (s.terminal) throw std::logic_error("feasible_mask: terminal state");
  const auto& inst = *s.instance;
  const int m = inst.node_count();
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(m), 0);

  switch (inst.kind) {
    case ProblemKind::Tsp:
      for (int v = 0; v < m; ++v) mask[static_cast<std::size_t>(v)] = !s.visited[static_cast<std::size_t>(v)];
      break;
    case ProblemKind::Cvrp:
      for (int v = 1; v < m; ++v)
        mask[static_cast<std::size_t>(v)] =
            !s.visited[static_cast<std::size_t>(v)] && inst.demand_units_of(v) <= s.capacity_units;
      // Depot is infeasible as the very first move and right after a depot visit.
      mask[0] = s.current != 0;
      break;
    case ProblemKind::Sdvrp:
      for (int v = 1; v < m; ++v)
        mask[static_cast<std::size_t>(v)] =
            s.remaining_units[static_cast<std::size_t>(v)] > 0 && s.capacity_units > 0;
      mask[0] = s.current != 0;
      break;
  }
  return mask;
}

StepResult step(const ConstructionState& s, int action) {
  const auto mask = feasible_mask(s);
  if (action < 0 || action >= static_cast<int>(mask.size()) ||
      !mask[static_cast<std::size_t>(action)])
    throw std::invalid_argument("step: infeasible action " + std::to_string(action));

  const auto& inst = *s.instance;
  StepResult out{s, 0.0};
  ConstructionState& n = out.state;
  n.sequence.push_back(action);

  if (inst.kind == ProblemKind::Tsp) {
    if (s.current >= 0)
      out.reward -= routing::dist(inst.node_coord(s.current), inst.node_coord(action));
    n.visited[static_cast<std::size_t>(action)] = 1;
    n.current = action;
    if (n.step_count() == inst.node_count()) {
      // Fold the closing edge into the final step.
      out.reward -= routing::dist(inst.node_coord(action), inst.node_coord(n.sequence.front()));
      n.terminal = true;
    }
    return out;
  }

  out.reward -= routing::dist(inst.node_coord(s.current), inst.node_coord(action));
  n.current = action;
  if (action == 0) {
    n.capacity_units = inst.capacity_raw;
    if (inst.kind == ProblemKind::Sdvrp) n.delivered_units.push_back(0);
  } else if (inst.kind == ProblemKind::Cvrp) {
    n.visited[static_cast<std::size_t>(action)] = 1;
    n.capacity_units -= inst.demand_units_of(action);
  } else {
    const int units =
        std::min(n.remaining_units[static_cast<std::size_t>(action)], n.capacity_units);
    n.remaining_units[static_cast<std::size_t>(action)] -= units;
    n.capacity_units -= units;
    n.delivered_units.push_back(units);
    if (n.remaining_units[static_cast<std::size_t>(action)] == 0)
      n.visited[static_cast<std::size_t>(action)] = 1;
  }

  bool all_served = true;
  if (inst.kind == ProblemKind::Cvrp) {
    for (int v = 1; v < inst.node_count() && all_served; ++v)
      all_served = n.visited[static_cast<std::size_t>(v)] != 0;
  } else {
    for (int v = 1; v < inst.node_count() && all_served; ++v)
      all_served = n.remaining_units[static_cast<std::size_t>(v)] == 0;
  }
  n.terminal = all_served && n.current == 0;
  return out;
}

double remaining_capacity_fraction(const ConstructionState& s) {
  const auto& inst = *s.instance;
  if (!inst.is_vrp()) throw std::logic_error("remaining_capacity_fraction: tsp state");
  return static_cast<double>(s.capacity_units) / inst.capacity_raw;
}

routing::Solution final_solution(const ConstructionState& s) {
  if (!s.terminal) throw std::logic_error("final_solution: state is not terminal");
  const auto& inst = *s.instance;
  routing::Solution sol;
  if (inst.kind == ProblemKind::Tsp) {
    sol.visits = s.sequence;
  } else {
    sol.visits.reserve(s.sequence.size() + 1);
    sol.visits.push_back(0);
    sol.visits.insert(sol.visits.end(), s.sequence.begin(), s.sequence.end());
    if (inst.kind == ProblemKind::Sdvrp) {
      sol.deliveries.reserve(sol.visits.size());
      sol.deliveries.push_back(0.0);
      for (const int units : s.delivered_units)
        sol.deliveries.push_back(static_cast<double>(units) / inst.capacity_raw);
    }
  }
  sol.length = routing::tour_length(inst, sol);
  return sol;
}

}  // namespace epose::env
