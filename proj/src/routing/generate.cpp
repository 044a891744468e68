#include <stdexcept>

#include "epose/routing/core.hpp"
#include "epose/util/rng.hpp"

namespace epose::routing {

const char* kind_name(ProblemKind k) {
  switch (k) {
    case ProblemKind::Tsp: return "tsp";
    case ProblemKind::Cvrp: return "cvrp";
    case ProblemKind::Sdvrp: return "sdvrp";
  }
  return "?";
}

bool parse_kind(std::string_view s, ProblemKind& out) {
  if (s == "tsp") out = ProblemKind::Tsp;
  else if (s == "cvrp") out = ProblemKind::Cvrp;
  else if (s == "sdvrp") out = ProblemKind::Sdvrp;
  else return false;
  return true;
}

int capacity_for(int n) {
  if (n <= 20) return 30;
  if (n <= 50) return 40;
  return 50;
}

ProblemInstance generate_instance(ProblemKind kind, int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("generate_instance: n must be >= 2");

  util::Rng rng(util::derive_seed(seed, static_cast<std::uint64_t>(kind) + 1,
                                  static_cast<std::uint64_t>(n)));
  ProblemInstance inst;
  inst.kind = kind;
  inst.seed = seed;

  if (kind != ProblemKind::Tsp) {
    inst.depot = {rng.uniform(), rng.uniform()};
    inst.capacity_raw = capacity_for(n);
  }
  inst.coords.resize(static_cast<std::size_t>(n));
  for (auto& p : inst.coords) p = {rng.uniform(), rng.uniform()};
  if (kind != ProblemKind::Tsp) {
    inst.demand_units.resize(static_cast<std::size_t>(n));
    for (auto& d : inst.demand_units) d = rng.uniform_int(1, 9);
  }
  return inst;
}

ValidationResult validate_instance(const ProblemInstance& inst) {
  auto fail = [](std::string msg, int pos = -1) {
    return ValidationResult{false, std::move(msg), pos};
  };
  if (inst.coords.empty()) return fail("instance has no nodes");
  if (inst.kind == ProblemKind::Tsp && inst.coords.size() < 2)
    return fail("tsp instance needs at least 2 nodes");
  auto in_unit = [](const Point& p) {
    return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0;
  };
  for (std::size_t i = 0; i < inst.coords.size(); ++i)
    if (!in_unit(inst.coords[i]))
      return fail("coordinate outside unit square", static_cast<int>(i));
  if (inst.is_vrp()) {
    if (!in_unit(inst.depot)) return fail("depot outside unit square");
    if (inst.capacity_raw <= 0) return fail("capacity_raw must be positive");
    if (inst.demand_units.size() != inst.coords.size())
      return fail("demand count does not match customer count");
    for (std::size_t i = 0; i < inst.demand_units.size(); ++i)
      if (inst.demand_units[i] <= 0 || inst.demand_units[i] > inst.capacity_raw)
        return fail("demand outside (0, capacity]", static_cast<int>(i) + 1);
  } else {
    if (!inst.demand_units.empty() || inst.capacity_raw != 0)
      return fail("tsp instance carries vrp fields");
  }
  return {};
}

}  // namespace epose::routing
