#pragma once

// Network case model, JSON case parsing/validation and DC power-flow blocks.
//
// Units: power in MW, susceptance in per-unit on base_mva, angles in radians.
// Line flow f = susceptance * (theta_from - theta_to) * base_mva.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "loadattack/error.hpp"
#include "loadattack/milp.hpp"

namespace loadattack::grid {

inline constexpr int kCaseFormatVersion = 1;

struct Bus {
  int id = 0;
  bool is_reference = false;
};

struct Line {
  int from = 0;
  int to = 0;
  double susceptance = 0.0;
  double f_min = 0.0;
  double f_max = 0.0;
};

struct InitialState {
  bool on = false;
  int hours_in_state = 1;
  double output = 0.0;
};

struct Generator {
  std::string id;
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double marginal_cost = 0.0;
  double no_load_cost = 0.0;
  double startup_cost = 0.0;
  double shutdown_cost = 0.0;
  int min_up = 1;
  int min_down = 1;
  double ramp_up = 0.0;
  double ramp_down = 0.0;
  InitialState initial;
};

struct LoadShare {
  int bus = 0;
  double share = 0.0;
};

struct GridCase {
  std::string name;
  double base_mva = 100.0;
  double reserve_fraction = 0.03;
  double voll = 10000.0;
  double nominal_peak_mw = 0.0;  // 0 = unspecified
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> generators;
  std::vector<LoadShare> loads;
  std::vector<std::string> warnings;

  std::size_t num_buses() const { return buses.size(); }

  std::size_t bus_index(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].id == id) return i;
    fail(Errc::SchemaError, "unknown bus id " + std::to_string(id));
  }

  std::size_t reference_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].is_reference) return i;
    fail(Errc::NoReferenceBus, "case has no reference bus");
  }

  double total_capacity() const {
    double s = 0.0;
    for (const auto& g : generators) s += g.p_max;
    return s;
  }

  // Load share per bus (ordered like `buses`).
  Eigen::VectorXd share_vector() const {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(buses.size()));
    for (const auto& l : loads) s(static_cast<Eigen::Index>(bus_index(l.bus))) += l.share;
    return s;
  }

  // Buses carrying a positive load share, in case order.
  std::vector<int> load_buses() const {
    std::vector<int> out;
    for (const auto& l : loads)
      if (l.share > 0.0) out.push_back(l.bus);
    return out;
  }
};

// Split an aggregate load across buses by share.
inline Eigen::VectorXd nodal_loads(const GridCase& gc, double aggregate_mw) {
  return gc.share_vector() * aggregate_mw;
}

namespace detail {

template <class T>
T field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) fail(Errc::SchemaError, where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(Errc::SchemaError, where + ": field '" + key + "' has the wrong type");
  }
}

template <class T>
T field_or(const nlohmann::json& j, const char* key, T def, const std::string& where) {
  if (!j.contains(key)) return def;
  return field<T>(j, key, where);
}

}  // namespace detail

// Check every structural invariant; fills `warnings` with soft findings.
inline void validate(GridCase& gc) {
  require(!gc.buses.empty(), Errc::SchemaError, "case has no buses");
  require(gc.base_mva > 0.0, Errc::SchemaError, "base_mva must be positive");
  require(gc.reserve_fraction >= 0.0, Errc::SchemaError, "reserve_fraction must be non-negative");
  require(gc.voll > 0.0, Errc::SchemaError, "voll must be positive");
  std::set<int> ids;
  int refs = 0;
  for (const auto& b : gc.buses) {
    require(ids.insert(b.id).second, Errc::SchemaError, "duplicate bus id " + std::to_string(b.id));
    refs += b.is_reference ? 1 : 0;
  }
  require(refs > 0, Errc::NoReferenceBus, "case has no reference bus");
  require(refs == 1, Errc::SchemaError, "case has more than one reference bus");

  for (std::size_t k = 0; k < gc.lines.size(); ++k) {
    const auto& l = gc.lines[k];
    const std::string where = "line " + std::to_string(k);
    require(ids.count(l.from) && ids.count(l.to), Errc::SchemaError, where + ": unknown endpoint");
    require(l.from != l.to, Errc::SchemaError, where + ": endpoints must differ");
    require(l.susceptance > 0.0 && std::isfinite(l.susceptance), Errc::SchemaError,
            where + ": susceptance must be positive");
    require(l.f_min <= 0.0 && l.f_max >= 0.0, Errc::SchemaError, where + ": need f_min <= 0 <= f_max");
  }

  std::set<std::string> gen_ids;
  for (const auto& g : gc.generators) {
    const std::string where = "generator " + g.id;
    require(gen_ids.insert(g.id).second, Errc::SchemaError, "duplicate generator id " + g.id);
    require(ids.count(g.bus) > 0, Errc::SchemaError, where + ": unknown bus");
    require(g.p_min >= 0.0 && g.p_min <= g.p_max, Errc::SchemaError, where + ": need 0 <= p_min <= p_max");
    require(g.ramp_up > 0.0 && g.ramp_down > 0.0, Errc::SchemaError, where + ": ramps must be positive");
    require(g.min_up >= 1 && g.min_down >= 1, Errc::SchemaError, where + ": min up/down must be >= 1");
    require(g.marginal_cost >= 0.0 && g.no_load_cost >= 0.0 && g.startup_cost >= 0.0 && g.shutdown_cost >= 0.0,
            Errc::SchemaError, where + ": costs must be non-negative");
    require(g.initial.hours_in_state >= 1, Errc::SchemaError, where + ": initial hours_in_state must be >= 1");
    if (g.initial.on) {
      require(g.initial.output >= g.p_min - 1e-9 && g.initial.output <= g.p_max + 1e-9, Errc::SchemaError,
              where + ": initial output outside [p_min, p_max]");
    } else {
      require(g.initial.output == 0.0, Errc::SchemaError, where + ": offline unit with non-zero output");
    }
  }
  require(gc.voll > [&] {
    double m = 0.0;
    for (const auto& g : gc.generators) m = std::max(m, g.marginal_cost);
    return m;
  }(), Errc::SchemaError, "voll must exceed every marginal cost");

  double total = 0.0;
  std::set<int> load_ids;
  for (const auto& l : gc.loads) {
    require(ids.count(l.bus) > 0, Errc::SchemaError, "load on unknown bus " + std::to_string(l.bus));
    require(load_ids.insert(l.bus).second, Errc::SchemaError, "duplicate load bus " + std::to_string(l.bus));
    require(l.share >= 0.0 && std::isfinite(l.share), Errc::BadShares, "negative load share");
    total += l.share;
  }
  require(std::abs(total - 1.0) <= 1e-6, Errc::BadShares, "load shares sum to " + std::to_string(total));

  // Connectivity by breadth-first search.
  std::map<int, std::vector<int>> adj;
  for (const auto& l : gc.lines) {
    adj[l.from].push_back(l.to);
    adj[l.to].push_back(l.from);
  }
  std::set<int> seen{gc.buses.front().id};
  std::queue<int> q;
  q.push(gc.buses.front().id);
  while (!q.empty()) {
    const int b = q.front();
    q.pop();
    for (int nb : adj[b])
      if (seen.insert(nb).second) q.push(nb);
  }
  require(seen.size() == ids.size(), Errc::DisconnectedGraph,
          std::to_string(ids.size() - seen.size()) + " bus(es) unreachable");

  gc.warnings.clear();
  if (gc.nominal_peak_mw > 0.0) {
    require(gc.total_capacity() >= gc.nominal_peak_mw, Errc::SchemaError,
            "total capacity below nominal peak load");
    if (gc.total_capacity() < 1.5 * gc.nominal_peak_mw) {
      gc.warnings.push_back("total capacity is below 1.5x the nominal peak load");
    }
  }
}

inline GridCase parse_case_json(const nlohmann::json& j) {
  using detail::field;
  using detail::field_or;
  require(j.is_object(), Errc::SchemaError, "case document must be a JSON object");
  const auto version = field<int>(j, "version", "case");
  require(version == kCaseFormatVersion, Errc::SchemaError, "unsupported case version " + std::to_string(version));
  GridCase gc;
  gc.name = field_or<std::string>(j, "name", "unnamed", "case");
  gc.base_mva = field_or<double>(j, "base_mva", 100.0, "case");
  gc.reserve_fraction = field_or<double>(j, "reserve_fraction", 0.03, "case");
  gc.voll = field_or<double>(j, "voll", 10000.0, "case");
  gc.nominal_peak_mw = field_or<double>(j, "nominal_peak_mw", 0.0, "case");

  auto arr = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key) || !j.at(key).is_array()) fail(Errc::SchemaError, std::string("case: '") + key + "' must be an array");
    return j.at(key);
  };
  for (const auto& b : arr("buses")) {
    gc.buses.push_back({field<int>(b, "id", "bus"), field_or<bool>(b, "reference", false, "bus")});
  }
  for (const auto& l : arr("lines")) {
    Line line;
    line.from = field<int>(l, "from", "line");
    line.to = field<int>(l, "to", "line");
    line.susceptance = field<double>(l, "susceptance", "line");
    line.f_max = field<double>(l, "f_max", "line");
    line.f_min = field_or<double>(l, "f_min", -line.f_max, "line");
    gc.lines.push_back(line);
  }
  for (const auto& g : arr("generators")) {
    Generator gen;
    gen.id = field<std::string>(g, "id", "generator");
    const std::string where = "generator " + gen.id;
    gen.bus = field<int>(g, "bus", where);
    gen.p_min = field<double>(g, "p_min", where);
    gen.p_max = field<double>(g, "p_max", where);
    gen.marginal_cost = field<double>(g, "marginal_cost", where);
    gen.no_load_cost = field_or<double>(g, "no_load_cost", 0.0, where);
    gen.startup_cost = field_or<double>(g, "startup_cost", 0.0, where);
    gen.shutdown_cost = field_or<double>(g, "shutdown_cost", 0.0, where);
    gen.min_up = field_or<int>(g, "min_up", 1, where);
    gen.min_down = field_or<int>(g, "min_down", 1, where);
    gen.ramp_up = field<double>(g, "ramp_up", where);
    gen.ramp_down = field_or<double>(g, "ramp_down", gen.ramp_up, where);
    if (g.contains("initial")) {
      const auto& in = g.at("initial");
      gen.initial.on = field<bool>(in, "on", where + " initial");
      gen.initial.hours_in_state = field_or<int>(in, "hours_in_state", 1, where + " initial");
      gen.initial.output = field_or<double>(in, "output", gen.initial.on ? gen.p_min : 0.0, where + " initial");
    }
    gc.generators.push_back(gen);
  }
  for (const auto& l : arr("loads")) {
    gc.loads.push_back({field<int>(l, "bus", "load"), field<double>(l, "share", "load")});
  }
  validate(gc);
  return gc;
}

inline GridCase parse_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open case file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::SchemaError, path + ": " + e.what());
  }
  return parse_case_json(j);
}

inline nlohmann::json to_json(const GridCase& gc) {
  nlohmann::json j;
  j["version"] = kCaseFormatVersion;
  j["name"] = gc.name;
  j["base_mva"] = gc.base_mva;
  j["reserve_fraction"] = gc.reserve_fraction;
  j["voll"] = gc.voll;
  if (gc.nominal_peak_mw > 0.0) j["nominal_peak_mw"] = gc.nominal_peak_mw;
  j["buses"] = nlohmann::json::array();
  for (const auto& b : gc.buses) j["buses"].push_back({{"id", b.id}, {"reference", b.is_reference}});
  j["lines"] = nlohmann::json::array();
  for (const auto& l : gc.lines)
    j["lines"].push_back({{"from", l.from}, {"to", l.to}, {"susceptance", l.susceptance}, {"f_min", l.f_min}, {"f_max", l.f_max}});
  j["generators"] = nlohmann::json::array();
  for (const auto& g : gc.generators) {
    j["generators"].push_back({{"id", g.id},
                               {"bus", g.bus},
                               {"p_min", g.p_min},
                               {"p_max", g.p_max},
                               {"marginal_cost", g.marginal_cost},
                               {"no_load_cost", g.no_load_cost},
                               {"startup_cost", g.startup_cost},
                               {"shutdown_cost", g.shutdown_cost},
                               {"min_up", g.min_up},
                               {"min_down", g.min_down},
                               {"ramp_up", g.ramp_up},
                               {"ramp_down", g.ramp_down},
                               {"initial", {{"on", g.initial.on}, {"hours_in_state", g.initial.hours_in_state}, {"output", g.initial.output}}}});
  }
  j["loads"] = nlohmann::json::array();
  for (const auto& l : gc.loads) j["loads"].push_back({{"bus", l.bus}, {"share", l.share}});
  return j;
}

// Location of a bundled case shipped under data/cases.
inline std::string bundled_case(const std::string& name) {
#ifdef LOADATTACK_DATA_DIR
  return std::string(LOADATTACK_DATA_DIR) + "/cases/" + name + ".json";
#else
  return "data/cases/" + name + ".json";
#endif
}

// Power transfer distribution factors: line flows (MW) per unit net injection
// (MW) at each bus, with the reference bus absorbing the balance.
inline Eigen::MatrixXd ptdf(const GridCase& gc) {
  const auto nb = static_cast<Eigen::Index>(gc.buses.size());
  const auto nl = static_cast<Eigen::Index>(gc.lines.size());
  const auto ref = static_cast<Eigen::Index>(gc.reference_index());
  Eigen::MatrixXd bbus = Eigen::MatrixXd::Zero(nb, nb);
  Eigen::MatrixXd bf = Eigen::MatrixXd::Zero(nl, nb);
  for (Eigen::Index k = 0; k < nl; ++k) {
    const auto& l = gc.lines[static_cast<std::size_t>(k)];
    const auto f = static_cast<Eigen::Index>(gc.bus_index(l.from));
    const auto t = static_cast<Eigen::Index>(gc.bus_index(l.to));
    bbus(f, f) += l.susceptance;
    bbus(t, t) += l.susceptance;
    bbus(f, t) -= l.susceptance;
    bbus(t, f) -= l.susceptance;
    bf(k, f) = l.susceptance;
    bf(k, t) = -l.susceptance;
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < nb; ++i)
    if (i != ref) keep.push_back(i);
  const auto nr = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd br(nr, nr), bfr(nl, nr);
  for (Eigen::Index a = 0; a < nr; ++a) {
    bfr.col(a) = bf.col(keep[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < nr; ++b) br(a, b) = bbus(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]);
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nl, nb);
  if (nr > 0) {
    const Eigen::MatrixXd sens = bfr * br.ldlt().solve(Eigen::MatrixXd::Identity(nr, nr));
    for (Eigen::Index a = 0; a < nr; ++a) out.col(keep[static_cast<std::size_t>(a)]) = sens.col(a);
  }
  return out;
}

struct DcOptions {
  // false drops the angle coupling, leaving a transportation model on the same lines.
  bool angle_coupling = true;
  bool enforce_limits = true;
};

struct DcBlock {
  std::vector<std::size_t> theta;  // per bus; reference bus fixed at 0
  std::vector<std::size_t> flow;   // per line
};

// Add angle and flow variables plus the nodal balance rows
//   sum(injection terms at bus) - load_bus = sum(outgoing f) - sum(incoming f)
// to a model. `injections[b]` lists the terms (generator outputs, shed) at bus b.
inline DcBlock add_dc_network(milp::ModelBuilder& mb, const GridCase& gc,
                              const std::vector<std::vector<milp::Term>>& injections,
                              const Eigen::VectorXd& bus_load, const DcOptions& opt = {}) {
  const std::size_t nb = gc.buses.size();
  require(injections.size() == nb && static_cast<std::size_t>(bus_load.size()) == nb, Errc::ShapeMismatch,
          "per-bus injections/loads");
  DcBlock blk;
  const std::size_t ref = gc.reference_index();
  for (std::size_t b = 0; b < nb; ++b) {
    if (!opt.angle_coupling) break;
    blk.theta.push_back(b == ref ? mb.add_var(0.0, 0.0, 0.0) : mb.add_var(-milp::kInf, milp::kInf, 0.0));
  }
  for (const auto& l : gc.lines) {
    const double lo = opt.enforce_limits ? l.f_min : -milp::kInf;
    const double hi = opt.enforce_limits ? l.f_max : milp::kInf;
    blk.flow.push_back(mb.add_var(lo, hi, 0.0));
  }
  if (opt.angle_coupling) {
    for (std::size_t k = 0; k < gc.lines.size(); ++k) {
      const auto& l = gc.lines[k];
      const double coef = l.susceptance * gc.base_mva;
      mb.add_eq({{blk.flow[k], 1.0},
                 {blk.theta[gc.bus_index(l.from)], -coef},
                 {blk.theta[gc.bus_index(l.to)], coef}},
                0.0);
    }
  }
  for (std::size_t b = 0; b < nb; ++b) {
    std::vector<milp::Term> row = injections[b];
    for (std::size_t k = 0; k < gc.lines.size(); ++k) {
      if (gc.bus_index(gc.lines[k].from) == b) row.push_back({blk.flow[k], -1.0});
      if (gc.bus_index(gc.lines[k].to) == b) row.push_back({blk.flow[k], 1.0});
    }
    mb.add_eq(std::move(row), bus_load(static_cast<Eigen::Index>(b)));
  }
  return blk;
}

}  // namespace loadattack::grid
