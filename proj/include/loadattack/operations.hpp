#pragma once

// Day-ahead unit commitment (MILP) and hour-by-hour economic dispatch with
// load shedding (LP), chained into a simulated operating day.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "loadattack/error.hpp"
#include "loadattack/grid.hpp"
#include "loadattack/milp.hpp"

namespace loadattack::ops {

inline constexpr int kHours = 24;

// Hours x buses matrix of MW (bus order follows GridCase::buses).
using LoadMatrix = Eigen::MatrixXd;

struct UCInstance {
  const grid::GridCase* grid = nullptr;
  LoadMatrix forecast;
  std::optional<double> reserve_fraction;  // defaults to the case value

  double reserve() const { return reserve_fraction.value_or(grid->reserve_fraction); }

  void validate() const {
    require(grid != nullptr, Errc::InstanceError, "UC instance without a case");
    require(forecast.rows() == kHours, Errc::InstanceError, "UC needs 24 hourly rows");
    require(forecast.cols() == static_cast<Eigen::Index>(grid->num_buses()), Errc::InstanceError,
            "forecast columns must match bus count");
    require(forecast.allFinite() && forecast.minCoeff() >= 0.0, Errc::InstanceError, "loads must be finite and >= 0");
    require(reserve() >= 0.0, Errc::InstanceError, "reserve fraction must be >= 0");
  }
};

struct UCOptions {
  // true: B-theta network inside the MILP; false: PTDF line rows added lazily.
  bool explicit_network = false;
  bool angle_coupling = true;
  int max_line_rounds = 25;
  // Lines within this fraction of their limit are added together with a violated one.
  double line_margin = 0.9;
  milp::BnBConfig bnb{};
};

// Variable indices of a built UC model.
struct UCLayout {
  std::size_t gens = 0;
  std::vector<std::vector<std::size_t>> u, z, y, p_above;  // [g][t]
};

struct CommitmentSchedule {
  Eigen::MatrixXi u, z, y;  // gens x hours
  Eigen::MatrixXd p;        // gens x hours, MW
  double dispatch_cost = 0.0;    // marginal + no-load
  double transition_cost = 0.0;  // startup + shutdown
  double planned_cost = 0.0;
  std::size_t nodes = 0;
  int line_rounds = 0;
  std::size_t monitored_rows = 0;
  bool node_limit_hit = false;

  std::vector<int> committed(int t) const {
    std::vector<int> out;
    for (Eigen::Index g = 0; g < u.rows(); ++g)
      if (u(g, t) == 1) out.push_back(static_cast<int>(g));
    return out;
  }
};

struct LineHour {
  std::size_t line;
  int hour;
  bool operator<(const LineHour& o) const { return hour != o.hour ? hour < o.hour : line < o.line; }
};

namespace detail {

inline double startup_ramp(const grid::Generator& g) { return std::max(g.ramp_up, g.p_min); }
inline double shutdown_ramp(const grid::Generator& g) { return std::max(g.ramp_down, g.p_min); }

// Hours at the start of the day whose status is forced by the initial state.
inline int forced_hours(const grid::Generator& g) {
  const int window = g.initial.on ? g.min_up : g.min_down;
  return std::clamp(window - g.initial.hours_in_state, 0, kHours);
}

inline std::vector<milp::Term> output_terms(const UCLayout& lay, const grid::GridCase& gc, std::size_t g, int t,
                                            double scale = 1.0) {
  return {{lay.u[g][static_cast<std::size_t>(t)], scale * gc.generators[g].p_min},
          {lay.p_above[g][static_cast<std::size_t>(t)], scale}};
}

}  // namespace detail

// Build the commitment MILP. `monitored` lists the (line, hour) pairs whose
// PTDF limits are included when the network is not explicit.
inline milp::MixedIntegerProgram build_uc(const UCInstance& inst, const UCOptions& opt = {},
                                          const std::set<LineHour>& monitored = {}, UCLayout* layout = nullptr) {
  inst.validate();
  const auto& gc = *inst.grid;
  const std::size_t ng = gc.generators.size();
  require(ng > 0, Errc::InstanceError, "case has no generators");
  milp::ModelBuilder mb;
  UCLayout lay;
  lay.gens = ng;
  lay.u.assign(ng, {});
  lay.z.assign(ng, {});
  lay.y.assign(ng, {});
  lay.p_above.assign(ng, {});

  for (std::size_t g = 0; g < ng; ++g) {
    const auto& gen = gc.generators[g];
    const int forced = detail::forced_hours(gen);
    for (int t = 0; t < kHours; ++t) {
      double lo = 0.0, hi = 1.0;
      if (t < forced) lo = hi = gen.initial.on ? 1.0 : 0.0;
      lay.u[g].push_back(mb.add_var(lo, hi, gen.marginal_cost * gen.p_min + gen.no_load_cost, true));
      lay.z[g].push_back(mb.add_var(0.0, 1.0, gen.startup_cost, true));
      lay.y[g].push_back(mb.add_var(0.0, 1.0, gen.shutdown_cost, true));
      lay.p_above[g].push_back(mb.add_var(0.0, gen.p_max - gen.p_min, gen.marginal_cost));
    }
  }

  for (int t = 0; t < kHours; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    const double demand = inst.forecast.row(t).sum();
    // system balance
    if (!opt.explicit_network) {
      std::vector<milp::Term> row;
      for (std::size_t g = 0; g < ng; ++g) {
        auto terms = detail::output_terms(lay, gc, g, t);
        row.insert(row.end(), terms.begin(), terms.end());
      }
      mb.add_eq(std::move(row), demand);
    }
    // spinning reserve on committed capacity
    std::vector<milp::Term> res;
    for (std::size_t g = 0; g < ng; ++g) res.push_back({lay.u[g][ts], gc.generators[g].p_max});
    mb.add_ge(std::move(res), (1.0 + inst.reserve()) * demand);

    for (std::size_t g = 0; g < ng; ++g) {
      const auto& gen = gc.generators[g];
      // output above minimum only while committed
      if (gen.p_max > gen.p_min) mb.add_le({{lay.p_above[g][ts], 1.0}, {lay.u[g][ts], -(gen.p_max - gen.p_min)}}, 0.0);
      // u_t - u_{t-1} = z_t - y_t
      if (t == 0) {
        mb.add_eq({{lay.u[g][0], 1.0}, {lay.z[g][0], -1.0}, {lay.y[g][0], 1.0}}, gen.initial.on ? 1.0 : 0.0);
      } else {
        mb.add_eq({{lay.u[g][ts], 1.0}, {lay.u[g][ts - 1], -1.0}, {lay.z[g][ts], -1.0}, {lay.y[g][ts], 1.0}}, 0.0);
      }
      // minimum up / down windows
      {
        std::vector<milp::Term> up{{lay.u[g][ts], -1.0}};
        for (int k = std::max(0, t - gen.min_up + 1); k <= t; ++k) up.push_back({lay.z[g][static_cast<std::size_t>(k)], 1.0});
        mb.add_le(std::move(up), 0.0);
        std::vector<milp::Term> dn{{lay.u[g][ts], 1.0}};
        for (int k = std::max(0, t - gen.min_down + 1); k <= t; ++k) dn.push_back({lay.y[g][static_cast<std::size_t>(k)], 1.0});
        mb.add_le(std::move(dn), 1.0);
      }
      // ramping: p_t - p_{t-1} <= R_up u_{t-1} + SU z_t ; p_{t-1} - p_t <= R_dn u_t + SD y_t
      // with p_t - p_{t-1} = p_min (z_t - y_t) + pa_t - pa_{t-1}
      const double su = detail::startup_ramp(gen), sd = detail::shutdown_ramp(gen);
      const double pmin = gen.p_min;
      const double prev_const = t == 0 ? (gen.initial.on ? pmin : 0.0) - gen.initial.output : 0.0;
      if (!(gen.ramp_up >= gen.p_max)) {
        std::vector<milp::Term> row{{lay.p_above[g][ts], 1.0}, {lay.z[g][ts], pmin - su}, {lay.y[g][ts], -pmin}};
        double rhs = -prev_const;
        if (t == 0) {
          rhs += gen.initial.on ? gen.ramp_up : 0.0;
        } else {
          row.push_back({lay.p_above[g][ts - 1], -1.0});
          row.push_back({lay.u[g][ts - 1], -gen.ramp_up});
        }
        mb.add_le(std::move(row), rhs);
      }
      if (!(gen.ramp_down >= gen.p_max)) {
        // u_t = u_{t-1} + z_t - y_t folds R_dn u_t into the same variables
        std::vector<milp::Term> row{{lay.p_above[g][ts], -1.0},
                                    {lay.z[g][ts], -pmin - gen.ramp_down},
                                    {lay.y[g][ts], pmin + gen.ramp_down - sd}};
        double rhs = prev_const;
        if (t == 0) {
          rhs += gen.initial.on ? gen.ramp_down : 0.0;
        } else {
          row.push_back({lay.p_above[g][ts - 1], 1.0});
          row.push_back({lay.u[g][ts - 1], -gen.ramp_down});
        }
        mb.add_le(std::move(row), rhs);
      }
    }

    if (opt.explicit_network) {
      std::vector<std::vector<milp::Term>> inj(gc.num_buses());
      for (std::size_t g = 0; g < ng; ++g) {
        auto terms = detail::output_terms(lay, gc, g, t);
        auto& dst = inj[gc.bus_index(gc.generators[g].bus)];
        dst.insert(dst.end(), terms.begin(), terms.end());
      }
      grid::add_dc_network(mb, gc, inj, inst.forecast.row(t).transpose(),
                           {.angle_coupling = opt.angle_coupling, .enforce_limits = true});
    }
  }

  if (!opt.explicit_network && !monitored.empty()) {
    const Eigen::MatrixXd h = grid::ptdf(gc);
    for (const auto& [line, t] : monitored) {
      const auto l = static_cast<Eigen::Index>(line);
      std::vector<milp::Term> row;
      for (std::size_t g = 0; g < ng; ++g) {
        const double f = h(l, static_cast<Eigen::Index>(gc.bus_index(gc.generators[g].bus)));
        if (f == 0.0) continue;
        auto terms = detail::output_terms(lay, gc, g, t, f);
        row.insert(row.end(), terms.begin(), terms.end());
      }
      const double load_flow = h.row(l).dot(inst.forecast.row(t));
      mb.add_le(row, gc.lines[line].f_max + load_flow);
      mb.add_ge(std::move(row), gc.lines[line].f_min + load_flow);
    }
  }

  if (layout) *layout = std::move(lay);
  return mb.build();
}

namespace detail {

inline CommitmentSchedule extract_schedule(const grid::GridCase& gc, const UCLayout& lay, const milp::LPSolution& sol) {
  const auto ng = static_cast<Eigen::Index>(lay.gens);
  CommitmentSchedule s;
  s.u.resize(ng, kHours);
  s.z.resize(ng, kHours);
  s.y.resize(ng, kHours);
  s.p.resize(ng, kHours);
  for (Eigen::Index g = 0; g < ng; ++g) {
    const auto& gen = gc.generators[static_cast<std::size_t>(g)];
    const auto gs = static_cast<std::size_t>(g);
    for (int t = 0; t < kHours; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      s.u(g, t) = static_cast<int>(std::lround(sol.x(static_cast<Eigen::Index>(lay.u[gs][ts]))));
      s.z(g, t) = static_cast<int>(std::lround(sol.x(static_cast<Eigen::Index>(lay.z[gs][ts]))));
      s.y(g, t) = static_cast<int>(std::lround(sol.x(static_cast<Eigen::Index>(lay.y[gs][ts]))));
      s.p(g, t) = gen.p_min * s.u(g, t) + sol.x(static_cast<Eigen::Index>(lay.p_above[gs][ts]));
      s.dispatch_cost += gen.marginal_cost * s.p(g, t) + gen.no_load_cost * s.u(g, t);
      s.transition_cost += gen.startup_cost * s.z(g, t) + gen.shutdown_cost * s.y(g, t);
    }
  }
  s.planned_cost = s.dispatch_cost + s.transition_cost;
  return s;
}

}  // namespace detail

// Line flows (lines x hours) implied by a dispatch and bus loads, via PTDF.
inline Eigen::MatrixXd schedule_flows(const grid::GridCase& gc, const Eigen::MatrixXd& p, const LoadMatrix& loads) {
  const Eigen::MatrixXd h = grid::ptdf(gc);
  Eigen::MatrixXd inj = -loads.transpose();  // buses x hours
  for (std::size_t g = 0; g < gc.generators.size(); ++g)
    inj.row(static_cast<Eigen::Index>(gc.bus_index(gc.generators[g].bus))) += p.row(static_cast<Eigen::Index>(g));
  return h * inj;
}

inline CommitmentSchedule solve_uc(const UCInstance& inst, const UCOptions& opt = {}) {
  inst.validate();
  const auto& gc = *inst.grid;
  std::set<LineHour> monitored;
  const double tol = 1e-6;
  for (int round = 1;; ++round) {
    UCLayout lay;
    const auto mip = build_uc(inst, opt, monitored, &lay);
    const auto sol = milp::solve_milp(mip, opt.bnb);
    if (sol.status == milp::Status::Infeasible) fail(Errc::UCInfeasible, "unit commitment is infeasible");
    if (sol.status == milp::Status::Unbounded) fail(Errc::NumericalBreakdown, "unit commitment reported unbounded");
    if (sol.status == milp::Status::NodeLimit && sol.x.size() == 0) fail(Errc::NodeLimit, "no incumbent within node limit");
    auto sched = detail::extract_schedule(gc, lay, sol);
    sched.nodes = sol.nodes;
    sched.node_limit_hit = sol.node_limit_hit;
    sched.line_rounds = round;
    sched.monitored_rows = monitored.size();
    if (opt.explicit_network || gc.lines.empty()) return sched;

    const Eigen::MatrixXd flows = schedule_flows(gc, sched.p, inst.forecast);
    bool violated = false;
    std::set<std::size_t> hot;
    for (std::size_t l = 0; l < gc.lines.size(); ++l) {
      for (int t = 0; t < kHours; ++t) {
        const double f = flows(static_cast<Eigen::Index>(l), t);
        if (f > gc.lines[l].f_max + tol || f < gc.lines[l].f_min - tol) {
          if (monitored.insert({l, t}).second) violated = true;
          hot.insert(l);
        }
      }
    }
    if (!violated) return sched;
    // Watch near-limit hours of the offending lines too, to save rounds.
    for (auto l : hot) {
      for (int t = 0; t < kHours; ++t) {
        const double f = flows(static_cast<Eigen::Index>(l), t);
        if (f > opt.line_margin * gc.lines[l].f_max || f < opt.line_margin * gc.lines[l].f_min) monitored.insert({l, t});
      }
    }
    if (round >= opt.max_line_rounds) fail(Errc::NumericalBreakdown, "line-limit separation did not converge");
  }
}

// Commitment schedule implied by a fixed on/off pattern (gens x hours).
inline CommitmentSchedule schedule_from_status(const grid::GridCase& gc, const Eigen::MatrixXi& u) {
  const auto ng = static_cast<Eigen::Index>(gc.generators.size());
  require(u.rows() == ng && u.cols() == kHours, Errc::InstanceError, "status override must be gens x 24");
  CommitmentSchedule s;
  s.u = u;
  s.z = Eigen::MatrixXi::Zero(ng, kHours);
  s.y = Eigen::MatrixXi::Zero(ng, kHours);
  s.p = Eigen::MatrixXd::Zero(ng, kHours);
  for (Eigen::Index g = 0; g < ng; ++g) {
    const auto& gen = gc.generators[static_cast<std::size_t>(g)];
    int prev = gen.initial.on ? 1 : 0;
    for (int t = 0; t < kHours; ++t) {
      require(u(g, t) == 0 || u(g, t) == 1, Errc::InstanceError, "status entries must be 0/1");
      s.z(g, t) = u(g, t) > prev ? 1 : 0;
      s.y(g, t) = u(g, t) < prev ? 1 : 0;
      s.transition_cost += gen.startup_cost * s.z(g, t) + gen.shutdown_cost * s.y(g, t);
      prev = u(g, t);
    }
  }
  s.planned_cost = s.transition_cost;
  return s;
}

// Check logic and min up/down windows of a schedule; returns a description of
// the first violation, or an empty string.
inline std::string check_schedule(const grid::GridCase& gc, const CommitmentSchedule& s) {
  for (Eigen::Index g = 0; g < s.u.rows(); ++g) {
    const auto& gen = gc.generators[static_cast<std::size_t>(g)];
    int prev = gen.initial.on ? 1 : 0;
    // run length of the current state, including history before the day
    int run = gen.initial.hours_in_state;
    for (int t = 0; t < kHours; ++t) {
      const int cur = s.u(g, t);
      if (cur - prev != s.z(g, t) - s.y(g, t)) return gen.id + ": logic violated at hour " + std::to_string(t);
      if (s.z(g, t) + s.y(g, t) > 1) return gen.id + ": start and stop in the same hour " + std::to_string(t);
      if (cur != prev) {
        const int need = prev == 1 ? gen.min_up : gen.min_down;
        if (run < need) return gen.id + ": min " + (prev == 1 ? "up" : "down") + " violated at hour " + std::to_string(t);
        run = 1;
      } else {
        ++run;
      }
      prev = cur;
    }
  }
  return {};
}

struct EDInstance {
  const grid::GridCase* grid = nullptr;
  int hour = 0;
  Eigen::VectorXd load;             // per bus, MW
  std::vector<bool> committed;      // per generator at this hour
  std::vector<bool> previously_on;  // per generator at the previous hour
  Eigen::VectorXd p_prev;           // per generator, MW
  bool allow_shedding = true;
  grid::DcOptions network{};
};

struct DispatchResult {
  int hour = 0;
  Eigen::VectorXd p;      // per generator (0 when off)
  Eigen::VectorXd shed;   // per bus
  Eigen::VectorXd flows;  // per line
  double dispatch_cost = 0.0;
  double shed_cost = 0.0;
  bool feasible = true;  // false only when shedding is forbidden and load cannot be met
  bool ramp_down_relaxed = false;
  bool p_min_relaxed = false;
  std::vector<std::size_t> lines_at_limit;
  std::vector<std::size_t> gens_at_capacity;
  std::vector<std::size_t> gens_at_ramp_limit;

  double total_shed() const { return shed.size() ? shed.sum() : 0.0; }
};

inline DispatchResult solve_ed(const EDInstance& inst) {
  require(inst.grid != nullptr, Errc::InstanceError, "ED instance without a case");
  const auto& gc = *inst.grid;
  const std::size_t ng = gc.generators.size(), nb = gc.num_buses();
  require(static_cast<std::size_t>(inst.load.size()) == nb, Errc::InstanceError, "ED load must be per bus");
  require(inst.committed.size() == ng && inst.previously_on.size() == ng &&
              static_cast<std::size_t>(inst.p_prev.size()) == ng,
          Errc::InstanceError, "ED generator vectors must match the fleet");
  require(inst.load.allFinite() && inst.load.minCoeff() >= 0.0, Errc::InstanceError, "ED loads must be >= 0");

  struct Attempt {
    bool relax_ramp_down, relax_pmin;
  };
  const Attempt attempts[] = {{false, false}, {true, false}, {true, true}};
  for (const auto& at : attempts) {
    milp::ModelBuilder mb;
    std::vector<std::vector<milp::Term>> inj(nb);
    std::vector<std::ptrdiff_t> pvar(ng, -1);
    std::vector<double> up_ramp_bound(ng, milp::kInf);
    for (std::size_t g = 0; g < ng; ++g) {
      if (!inst.committed[g]) continue;
      const auto& gen = gc.generators[g];
      double lo = at.relax_pmin ? 0.0 : gen.p_min;
      double hi = gen.p_max;
      if (inst.previously_on[g]) {
        up_ramp_bound[g] = inst.p_prev(static_cast<Eigen::Index>(g)) + gen.ramp_up;
        if (!at.relax_ramp_down) lo = std::max(lo, inst.p_prev(static_cast<Eigen::Index>(g)) - gen.ramp_down);
      } else {
        up_ramp_bound[g] = detail::startup_ramp(gen);
      }
      hi = std::min(hi, up_ramp_bound[g]);
      lo = std::min(lo, hi);
      pvar[g] = static_cast<std::ptrdiff_t>(mb.add_var(lo, hi, gen.marginal_cost));
      inj[gc.bus_index(gen.bus)].push_back({static_cast<std::size_t>(pvar[g]), 1.0});
    }
    std::vector<std::ptrdiff_t> svar(nb, -1);
    for (std::size_t b = 0; b < nb; ++b) {
      const double l = inst.load(static_cast<Eigen::Index>(b));
      if (l <= 0.0 || !inst.allow_shedding) continue;
      svar[b] = static_cast<std::ptrdiff_t>(mb.add_var(0.0, l, gc.voll));
      inj[b].push_back({static_cast<std::size_t>(svar[b]), 1.0});
    }
    const auto blk = grid::add_dc_network(mb, gc, inj, inst.load, inst.network);
    const auto mip = mb.build();
    const auto sol = milp::solve_lp(mip.lp);
    if (sol.status == milp::Status::Unbounded) fail(Errc::NumericalBreakdown, "dispatch LP unbounded");
    if (sol.status != milp::Status::Optimal) {
      if (!inst.allow_shedding && !at.relax_ramp_down) {
        DispatchResult r;
        r.hour = inst.hour;
        r.feasible = false;
        return r;
      }
      continue;
    }

    DispatchResult r;
    r.hour = inst.hour;
    r.ramp_down_relaxed = at.relax_ramp_down;
    r.p_min_relaxed = at.relax_pmin;
    r.p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ng));
    r.shed = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nb));
    r.flows = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(gc.lines.size()));
    for (std::size_t g = 0; g < ng; ++g) {
      if (pvar[g] < 0) continue;
      const auto& gen = gc.generators[g];
      const double v = sol.x(pvar[g]);
      r.p(static_cast<Eigen::Index>(g)) = v;
      r.dispatch_cost += gen.marginal_cost * v + gen.no_load_cost;
      if (v >= gen.p_max - 1e-6) r.gens_at_capacity.push_back(g);
      else if (v >= up_ramp_bound[g] - 1e-6) r.gens_at_ramp_limit.push_back(g);
    }
    for (std::size_t b = 0; b < nb; ++b)
      if (svar[b] >= 0) r.shed(static_cast<Eigen::Index>(b)) = sol.x(svar[b]);
    r.shed_cost = gc.voll * r.shed.sum();
    for (std::size_t k = 0; k < gc.lines.size(); ++k) {
      const double f = sol.x(static_cast<Eigen::Index>(blk.flow[k]));
      r.flows(static_cast<Eigen::Index>(k)) = f;
      if (f >= gc.lines[k].f_max - 1e-6 || f <= gc.lines[k].f_min + 1e-6) r.lines_at_limit.push_back(k);
    }
    return r;
  }
  if (!inst.allow_shedding) {
    DispatchResult r;
    r.hour = inst.hour;
    r.feasible = false;
    return r;
  }
  fail(Errc::NumericalBreakdown, "dispatch LP infeasible even with shedding and relaxed limits");
}

struct HourReport {
  bool shed = false;
  bool generation_limit = false;  // some committed unit ran at capacity
  bool ramp_limit = false;        // some unit was held by its ramp rate
  bool line_limit = false;        // some line ran at its limit
};

struct DayResult {
  CommitmentSchedule schedule;
  std::vector<DispatchResult> hours;
  std::vector<HourReport> reports;
  double dispatch_cost = 0.0;  // sum of C(p_t)
  double shed_cost = 0.0;      // sum of C2(LS_t)
  double transition_cost = 0.0;
  double total_cost = 0.0;
  double shed_mwh = 0.0;
  int relaxed_hours = 0;

  bool has_shedding(double tol = 1e-6) const { return shed_mwh > tol; }
};

struct DayOptions {
  UCOptions uc{};
  grid::DcOptions network{};
};

// Real-time stage: 24 chained dispatches against actual loads under a given schedule.
inline DayResult dispatch_day(const grid::GridCase& gc, const CommitmentSchedule& sched, const LoadMatrix& actual,
                              const DayOptions& opt = {}) {
  require(actual.rows() == kHours && actual.cols() == static_cast<Eigen::Index>(gc.num_buses()), Errc::InstanceError,
          "actual loads must be 24 x buses");
  const std::size_t ng = gc.generators.size();
  DayResult day;
  day.schedule = sched;
  Eigen::VectorXd p_prev(static_cast<Eigen::Index>(ng));
  std::vector<bool> prev_on(ng);
  for (std::size_t g = 0; g < ng; ++g) {
    p_prev(static_cast<Eigen::Index>(g)) = gc.generators[g].initial.output;
    prev_on[g] = gc.generators[g].initial.on;
  }
  for (int t = 0; t < kHours; ++t) {
    EDInstance ed;
    ed.grid = &gc;
    ed.hour = t;
    ed.load = actual.row(t).transpose();
    ed.committed.resize(ng);
    for (std::size_t g = 0; g < ng; ++g) ed.committed[g] = sched.u(static_cast<Eigen::Index>(g), t) == 1;
    ed.previously_on = prev_on;
    ed.p_prev = p_prev;
    ed.network = opt.network;
    auto r = solve_ed(ed);
    HourReport rep;
    rep.shed = r.total_shed() > 1e-6;
    rep.generation_limit = !r.gens_at_capacity.empty();
    rep.ramp_limit = !r.gens_at_ramp_limit.empty();
    rep.line_limit = !r.lines_at_limit.empty();
    day.dispatch_cost += r.dispatch_cost;
    day.shed_cost += r.shed_cost;
    day.shed_mwh += r.total_shed();
    day.relaxed_hours += (r.ramp_down_relaxed || r.p_min_relaxed) ? 1 : 0;
    p_prev = r.p;
    prev_on = ed.committed;
    day.hours.push_back(std::move(r));
    day.reports.push_back(rep);
  }
  day.transition_cost = sched.transition_cost;
  day.total_cost = day.dispatch_cost + day.shed_cost + day.transition_cost;
  return day;
}

// Full two-stage day: UC on forecasts (unless overridden), then ED on actuals.
inline DayResult run_day(const grid::GridCase& gc, const LoadMatrix& forecast, const LoadMatrix& actual,
                         const std::optional<Eigen::MatrixXi>& status_override = std::nullopt,
                         const DayOptions& opt = {}) {
  CommitmentSchedule sched;
  if (status_override) {
    sched = schedule_from_status(gc, *status_override);
  } else {
    UCInstance inst{&gc, forecast, std::nullopt};
    sched = solve_uc(inst, opt.uc);
  }
  return dispatch_day(gc, sched, actual, opt);
}

inline nlohmann::json to_json(const grid::GridCase& gc, const DayResult& d) {
  nlohmann::json j;
  j["total_cost"] = d.total_cost;
  j["dispatch_cost"] = d.dispatch_cost;
  j["shed_cost"] = d.shed_cost;
  j["transition_cost"] = d.transition_cost;
  j["planned_cost"] = d.schedule.planned_cost;
  j["shed_mwh"] = d.shed_mwh;
  j["relaxed_hours"] = d.relaxed_hours;
  j["hours"] = nlohmann::json::array();
  for (std::size_t t = 0; t < d.hours.size(); ++t) {
    const auto& h = d.hours[t];
    const auto& rep = d.reports[t];
    nlohmann::json hj;
    hj["hour"] = h.hour;
    std::vector<double> p(h.p.data(), h.p.data() + h.p.size());
    hj["dispatch_mw"] = p;
    nlohmann::json shed = nlohmann::json::object();
    for (std::size_t b = 0; b < gc.num_buses(); ++b)
      if (h.shed(static_cast<Eigen::Index>(b)) > 1e-9) shed[std::to_string(gc.buses[b].id)] = h.shed(static_cast<Eigen::Index>(b));
    hj["shed_mw"] = shed;
    hj["flows_mw"] = std::vector<double>(h.flows.data(), h.flows.data() + h.flows.size());
    hj["dispatch_cost"] = h.dispatch_cost;
    hj["shed_cost"] = h.shed_cost;
    std::vector<std::string> at_cap, at_ramp;
    for (auto g : h.gens_at_capacity) at_cap.push_back(gc.generators[g].id);
    for (auto g : h.gens_at_ramp_limit) at_ramp.push_back(gc.generators[g].id);
    hj["binding"] = {{"lines_at_limit", h.lines_at_limit}, {"generators_at_capacity", at_cap}, {"generators_at_ramp_limit", at_ramp}};
    hj["violation"] = {{"shed", rep.shed}, {"generation_limit", rep.generation_limit && rep.shed},
                       {"ramp", rep.ramp_limit && rep.shed}, {"line_flow", rep.line_limit && rep.shed}};
    if (h.ramp_down_relaxed || h.p_min_relaxed) hj["relaxed"] = {{"ramp_down", h.ramp_down_relaxed}, {"p_min", h.p_min_relaxed}};
    j["hours"].push_back(std::move(hj));
  }
  nlohmann::json u = nlohmann::json::array();
  for (Eigen::Index g = 0; g < d.schedule.u.rows(); ++g) {
    std::vector<int> row(kHours);
    for (int t = 0; t < kHours; ++t) row[static_cast<std::size_t>(t)] = d.schedule.u(g, t);
    u.push_back({{"id", gc.generators[static_cast<std::size_t>(g)].id}, {"status", row}});
  }
  j["commitment"] = u;
  return j;
}

}  // namespace loadattack::ops
