#include <cmath>
#include <stdexcept>
#include <string>

#include "epose/routing/core.hpp"

namespace epose::routing {

namespace {

ValidationResult fail(std::string msg, int pos = -1) {
  return ValidationResult{false, std::move(msg), pos};
}

ValidationResult validate_tsp(const ProblemInstance& inst, const Solution& sol) {
  const int m = inst.node_count();
  if (static_cast<int>(sol.visits.size()) != m)
    return fail("tour visits " + std::to_string(sol.visits.size()) + " of " +
                std::to_string(m) + " nodes");
  if (!sol.deliveries.empty()) return fail("tsp solution carries deliveries");
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(m), 0);
  for (std::size_t i = 0; i < sol.visits.size(); ++i) {
    const int v = sol.visits[i];
    if (v < 0 || v >= m)
      return fail("node " + std::to_string(v) + " out of range", static_cast<int>(i));
    if (seen[static_cast<std::size_t>(v)])
      return fail("node " + std::to_string(v) + " repeated", static_cast<int>(i));
    seen[static_cast<std::size_t>(v)] = 1;
  }
  return {};
}

ValidationResult validate_walk_shape(const ProblemInstance& inst, const Solution& sol) {
  const int m = inst.node_count();
  if (sol.visits.size() < 3) return fail("walk too short");
  if (sol.visits.front() != 0) return fail("walk does not start at depot", 0);
  if (sol.visits.back() != 0)
    return fail("walk does not end at depot", static_cast<int>(sol.visits.size()) - 1);
  for (std::size_t i = 0; i < sol.visits.size(); ++i) {
    const int v = sol.visits[i];
    if (v < 0 || v >= m)
      return fail("node " + std::to_string(v) + " out of range", static_cast<int>(i));
    if (i > 0 && v == 0 && sol.visits[i - 1] == 0)
      return fail("two consecutive depot visits", static_cast<int>(i));
  }
  return {};
}

ValidationResult validate_cvrp(const ProblemInstance& inst, const Solution& sol) {
  if (auto r = validate_walk_shape(inst, sol); !r) return r;
  if (!sol.deliveries.empty()) return fail("cvrp solution carries split deliveries");

  const int m = inst.node_count();
  std::vector<int> visit_count(static_cast<std::size_t>(m), 0);
  int segment = 0;
  long load = 0;
  for (std::size_t i = 1; i < sol.visits.size(); ++i) {
    const int v = sol.visits[i];
    if (v == 0) {
      load = 0;
      ++segment;
      continue;
    }
    visit_count[static_cast<std::size_t>(v)]++;
    load += inst.demand_units_of(v);
    if (load > inst.capacity_raw)
      return fail("capacity exceeded in segment " + std::to_string(segment),
                  static_cast<int>(i));
  }
  for (int v = 1; v < m; ++v) {
    if (visit_count[static_cast<std::size_t>(v)] == 0)
      return fail("customer " + std::to_string(v) + " not visited", v);
    if (visit_count[static_cast<std::size_t>(v)] > 1)
      return fail("node " + std::to_string(v) + " repeated", v);
  }
  return {};
}

ValidationResult validate_sdvrp(const ProblemInstance& inst, const Solution& sol) {
  if (auto r = validate_walk_shape(inst, sol); !r) return r;
  if (sol.deliveries.size() != sol.visits.size())
    return fail("deliveries not aligned with visits");

  const int m = inst.node_count();
  const double cap = inst.capacity_raw;
  // Deliveries must be exact multiples of 1/capacity; compare in units.
  std::vector<long> delivered(static_cast<std::size_t>(m), 0);
  int segment = 0;
  long load = 0;
  for (std::size_t i = 0; i < sol.visits.size(); ++i) {
    const int v = sol.visits[i];
    const double frac = sol.deliveries[i];
    if (v == 0) {
      if (frac != 0.0) return fail("delivery recorded at depot", static_cast<int>(i));
      load = 0;
      if (i > 0) ++segment;
      continue;
    }
    const long units = std::lround(frac * cap);
    if (units <= 0 || std::abs(frac * cap - static_cast<double>(units)) > 1e-9)
      return fail("delivery is not a positive unit amount", static_cast<int>(i));
    delivered[static_cast<std::size_t>(v)] += units;
    load += units;
    if (load > inst.capacity_raw)
      return fail("capacity exceeded in segment " + std::to_string(segment),
                  static_cast<int>(i));
  }
  for (int v = 1; v < m; ++v)
    if (delivered[static_cast<std::size_t>(v)] != inst.demand_units_of(v))
      return fail("customer " + std::to_string(v) + " delivery does not match demand", v);
  return {};
}

}  // namespace

ValidationResult validate_solution(const ProblemInstance& inst, const Solution& sol) {
  if (auto r = validate_instance(inst); !r) return r;
  switch (inst.kind) {
    case ProblemKind::Tsp: return validate_tsp(inst, sol);
    case ProblemKind::Cvrp: return validate_cvrp(inst, sol);
    case ProblemKind::Sdvrp: return validate_sdvrp(inst, sol);
  }
  return fail("unknown problem kind");
}

double tour_length(const ProblemInstance& inst, const Solution& sol) {
  if (auto r = validate_solution(inst, sol); !r)
    throw std::invalid_argument("tour_length: " + r.message);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < sol.visits.size(); ++i)
    total += dist(inst.node_coord(sol.visits[i]), inst.node_coord(sol.visits[i + 1]));
  if (inst.kind == ProblemKind::Tsp)
    total += dist(inst.node_coord(sol.visits.back()), inst.node_coord(sol.visits.front()));
  return total;
}

}  // namespace epose::routing
