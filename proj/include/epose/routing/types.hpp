#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace epose::routing {

enum class ProblemKind { Tsp, Cvrp, Sdvrp };

const char* kind_name(ProblemKind k);
bool parse_kind(std::string_view s, ProblemKind& out);

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

inline double dist(const Point& a, const Point& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

// One routing instance. TSP keeps every node in `coords`. VRP kinds keep
// customers in `coords` with the depot stored separately; node indexing is
// depot = 0, customer i = coords[i-1]. Demands are integer units out of
// capacity_raw, so capacity arithmetic stays exact; the normalised demand
// seen by models and files is units / capacity_raw.
struct ProblemInstance {
  ProblemKind kind = ProblemKind::Tsp;
  std::vector<Point> coords;
  Point depot{};
  std::vector<int> demand_units;
  int capacity_raw = 0;
  std::uint64_t seed = 0;

  bool is_vrp() const { return kind != ProblemKind::Tsp; }
  int customer_count() const { return static_cast<int>(coords.size()); }
  int node_count() const { return is_vrp() ? customer_count() + 1 : customer_count(); }

  Point node_coord(int node) const {
    if (is_vrp()) return node == 0 ? depot : coords[static_cast<std::size_t>(node) - 1];
    return coords[static_cast<std::size_t>(node)];
  }

  int demand_units_of(int node) const { return demand_units[static_cast<std::size_t>(node) - 1]; }

  double demand_fraction(int node) const {
    return static_cast<double>(demand_units_of(node)) / capacity_raw;
  }

  bool operator==(const ProblemInstance&) const = default;
};

// Visit sequence produced by construction. VRP walks start and end at the
// depot. SDVRP carries per-visit delivered fractions aligned with `visits`
// (zero on depot entries); other kinds leave `deliveries` empty.
struct Solution {
  std::vector<int> visits;
  std::vector<double> deliveries;
  double length = 0.0;
};

}  // namespace epose::routing
