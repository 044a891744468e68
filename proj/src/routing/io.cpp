#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "epose/routing/core.hpp"

namespace epose::routing {

namespace {

void append_num(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

[[noreturn]] void bad_line(std::size_t line_no, const std::string& why) {
  throw std::runtime_error("instance file line " + std::to_string(line_no) + ": " + why);
}

}  // namespace

std::string to_json_line(const ProblemInstance& inst) {
  std::string s = "{\"kind\":\"";
  s += kind_name(inst.kind);
  s += "\",\"n\":" + std::to_string(inst.customer_count());
  s += ",\"seed\":" + std::to_string(inst.seed);
  s += ",\"coords\":[";
  for (std::size_t i = 0; i < inst.coords.size(); ++i) {
    if (i) s += ',';
    append_num(s, inst.coords[i].x);
    s += ',';
    append_num(s, inst.coords[i].y);
  }
  s += ']';
  if (inst.is_vrp()) {
    s += ",\"depot_coord\":[";
    append_num(s, inst.depot.x);
    s += ',';
    append_num(s, inst.depot.y);
    s += "],\"demands\":[";
    for (std::size_t i = 0; i < inst.demand_units.size(); ++i) {
      if (i) s += ',';
      append_num(s, static_cast<double>(inst.demand_units[i]) / inst.capacity_raw);
    }
    s += "],\"capacity_raw\":" + std::to_string(inst.capacity_raw);
  }
  s += '}';
  return s;
}

ProblemInstance from_json_line(const std::string& line, std::size_t line_no) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) bad_line(line_no, "not a JSON object");

  ProblemInstance inst;
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (!parse_kind(kind, inst.kind)) bad_line(line_no, "unknown kind '" + kind + "'");
    const int n = j.at("n").get<int>();
    inst.seed = j.at("seed").get<std::uint64_t>();
    const auto& coords = j.at("coords");
    if (!coords.is_array() || static_cast<int>(coords.size()) != 2 * n)
      bad_line(line_no, "coords must hold 2*n numbers");
    inst.coords.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      inst.coords[static_cast<std::size_t>(i)] = {coords[2 * i].get<double>(),
                                                  coords[2 * i + 1].get<double>()};
    }
    if (inst.is_vrp()) {
      const auto& dc = j.at("depot_coord");
      if (!dc.is_array() || dc.size() != 2) bad_line(line_no, "depot_coord must hold 2 numbers");
      inst.depot = {dc[0].get<double>(), dc[1].get<double>()};
      inst.capacity_raw = j.at("capacity_raw").get<int>();
      if (inst.capacity_raw <= 0) bad_line(line_no, "capacity_raw must be positive");
      const auto& demands = j.at("demands");
      if (!demands.is_array() || static_cast<int>(demands.size()) != n)
        bad_line(line_no, "demands must hold n numbers");
      inst.demand_units.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const double frac = demands[static_cast<std::size_t>(i)].get<double>();
        const double units = frac * inst.capacity_raw;
        const long rounded = std::lround(units);
        if (rounded <= 0 || std::abs(units - static_cast<double>(rounded)) > 1e-9)
          bad_line(line_no, "demand is not a positive unit fraction of capacity");
        inst.demand_units[static_cast<std::size_t>(i)] = static_cast<int>(rounded);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    bad_line(line_no, e.what());
  }
  if (auto r = validate_instance(inst); !r) bad_line(line_no, r.message);
  return inst;
}

void write_instances(const std::string& path, const std::vector<ProblemInstance>& instances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  for (const auto& inst : instances) {
    out << to_json_line(inst) << '\n';
  }
  if (!out.flush()) throw std::runtime_error("write failed: " + path);
}

std::vector<ProblemInstance> read_instances(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::vector<ProblemInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    out.push_back(from_json_line(line, line_no));
  }
  return out;
}

}  // namespace epose::routing
