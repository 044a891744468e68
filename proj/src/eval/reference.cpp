#include "epose/eval/reference.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

#include "epose/env/env.hpp"
#include "epose/routing/core.hpp"

namespace epose::eval {

using routing::ProblemInstance;
using routing::ProblemKind;
using routing::Solution;

Solution exact_tsp(const ProblemInstance& inst) {
  if (inst.kind != ProblemKind::Tsp) throw std::invalid_argument("exact_tsp: TSP only");
  const int n = inst.node_count();
  if (n > 16) throw std::invalid_argument("exact_tsp: unsupported size (n > 16)");

  std::vector<double> d(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      d[static_cast<std::size_t>(i) * n + j] = routing::dist(inst.node_coord(i),
                                                             inst.node_coord(j));

  // dp[mask][j]: shortest path from node 0 through {0} + mask ending at j+1,
  // where bit j of mask stands for node j+1.
  const int rest = n - 1;
  const std::size_t full = std::size_t{1} << rest;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dp(full * static_cast<std::size_t>(rest), inf);
  std::vector<std::int8_t> parent(full * static_cast<std::size_t>(rest), -1);

  for (int j = 0; j < rest; ++j)
    dp[(std::size_t{1} << j) * rest + static_cast<std::size_t>(j)] =
        d[static_cast<std::size_t>(j) + 1];

  for (std::size_t mask = 1; mask < full; ++mask) {
    for (int j = 0; j < rest; ++j) {
      if (!(mask >> j & 1)) continue;
      const double cur = dp[mask * rest + static_cast<std::size_t>(j)];
      if (cur == inf) continue;
      for (int k = 0; k < rest; ++k) {
        if (mask >> k & 1) continue;
        const std::size_t nm = mask | (std::size_t{1} << k);
        const double cand =
            cur + d[(static_cast<std::size_t>(j) + 1) * n + static_cast<std::size_t>(k) + 1];
        double& slot = dp[nm * rest + static_cast<std::size_t>(k)];
        if (cand < slot) {
          slot = cand;
          parent[nm * rest + static_cast<std::size_t>(k)] = static_cast<std::int8_t>(j);
        }
      }
    }
  }

  int best_j = 0;
  double best = inf;
  const std::size_t all = full - 1;
  for (int j = 0; j < rest; ++j) {
    const double len = dp[all * rest + static_cast<std::size_t>(j)] +
                       d[(static_cast<std::size_t>(j) + 1) * n];
    if (len < best) {
      best = len;
      best_j = j;
    }
  }

  Solution sol;
  sol.visits.resize(static_cast<std::size_t>(n));
  std::size_t mask = all;
  int j = best_j;
  for (int pos = n - 1; pos >= 1; --pos) {
    sol.visits[static_cast<std::size_t>(pos)] = j + 1;
    const int pj = parent[mask * rest + static_cast<std::size_t>(j)];
    mask ^= std::size_t{1} << j;
    j = pj;
  }
  sol.visits[0] = 0;
  sol.length = routing::tour_length(inst, sol);
  return sol;
}

Solution nearest_neighbor(const std::shared_ptr<const ProblemInstance>& inst) {
  env::ConstructionState s = env::reset(inst);
  while (!s.terminal) {
    const std::vector<std::uint8_t> mask = env::feasible_mask(s);
    int pick = -1;
    if (s.current < 0) {
      // TSP before the first move: no position yet, start at the lowest node.
      for (std::size_t j = 0; j < mask.size(); ++j)
        if (mask[j]) {
          pick = static_cast<int>(j);
          break;
        }
    } else {
      const routing::Point pos = inst->node_coord(s.current);
      const bool vrp = inst->is_vrp();
      double best = 0.0;
      for (std::size_t j = 0; j < mask.size(); ++j) {
        if (!mask[j]) continue;
        // VRP: the depot is a fallback, taken only when no customer fits.
        if (vrp && j == 0 && pick >= 0) continue;
        const double dj = routing::dist(pos, inst->node_coord(static_cast<int>(j)));
        if (pick < 0 || (vrp && pick == 0) || dj < best) {
          pick = static_cast<int>(j);
          best = dj;
        }
      }
    }
    s = env::step(s, pick).state;
  }
  return env::final_solution(s);
}

Solution two_opt(const ProblemInstance& inst, const Solution& start) {
  if (inst.kind != ProblemKind::Tsp) throw std::invalid_argument("two_opt: TSP only");
  const int n = inst.node_count();
  std::vector<int> tour = start.visits;
  if (static_cast<int>(tour.size()) != n) throw std::invalid_argument("two_opt: bad tour");

  const auto d = [&](int a, int b) {
    return routing::dist(inst.node_coord(tour[static_cast<std::size_t>(a)]),
                         inst.node_coord(tour[static_cast<std::size_t>(b)]));
  };

  bool improved = true;
  while (improved) {
    improved = false;
    for (int i = 0; i < n - 1 && !improved; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;  // reversing everything is a no-op
        const int a = (i + n - 1) % n;
        const int b = (j + 1) % n;
        const double delta = d(a, j) + d(i, b) - d(a, i) - d(j, b);
        if (delta < -1e-12) {
          std::reverse(tour.begin() + i, tour.begin() + j + 1);
          improved = true;
          break;
        }
      }
    }
  }

  Solution sol;
  sol.visits = std::move(tour);
  sol.length = routing::tour_length(inst, sol);
  return sol;
}

double optimality_gap(double pred_len, double ref_len) {
  if (ref_len <= 0.0) throw std::invalid_argument("optimality_gap: reference must be positive");
  return 100.0 * (pred_len / ref_len - 1.0);
}

Reference reference_solution(const std::shared_ptr<const ProblemInstance>& inst) {
  if (inst->kind == ProblemKind::Tsp) {
    if (inst->node_count() <= 16) return Reference{exact_tsp(*inst), "exact"};
    return Reference{two_opt(*inst, nearest_neighbor(inst)), "two_opt"};
  }
  return Reference{nearest_neighbor(inst), "nearest_neighbor"};
}

}  // namespace epose::eval
