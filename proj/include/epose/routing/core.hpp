#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epose/routing/types.hpp"

namespace epose::routing {

// --- generation ------------------------------------------------------------

// Vehicle capacity by customer count: 30 up to 20, 40 up to 50, else 50.
int capacity_for(int n);

// Coordinates i.i.d. uniform on the unit square; VRP demands are integers
// uniform in {1..9} over capacity_for(n). Identical (kind, n, seed) triples
// produce bit-identical instances. Throws std::invalid_argument for n < 2.
ProblemInstance generate_instance(ProblemKind kind, int n, std::uint64_t seed);

// --- validation ------------------------------------------------------------

struct ValidationResult {
  bool ok = true;
  std::string message;  // first violated constraint when !ok
  int position = -1;    // index into visits (or customer node) when known

  explicit operator bool() const { return ok; }
};

ValidationResult validate_instance(const ProblemInstance& inst);
ValidationResult validate_solution(const ProblemInstance& inst, const Solution& sol);

// --- length ----------------------------------------------------------------

// Total Euclidean length of a valid solution: closed tour for TSP, full
// depot-anchored walk for VRP kinds. Throws std::invalid_argument naming the
// first violated constraint if the solution does not validate.
double tour_length(const ProblemInstance& inst, const Solution& sol);

// --- serialization ---------------------------------------------------------

// Line-delimited JSON, one instance per line; numbers carry 17 significant
// digits so round-trips are exact. Readers throw std::runtime_error with a
// 1-based line number on malformed input.
std::string to_json_line(const ProblemInstance& inst);
ProblemInstance from_json_line(const std::string& line, std::size_t line_no);

void write_instances(const std::string& path, const std::vector<ProblemInstance>& instances);
std::vector<ProblemInstance> read_instances(const std::string& path);

}  // namespace epose::routing
