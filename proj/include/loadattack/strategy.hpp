#pragma once

// Choosing which nodal forecasts to compromise: a best-first search guided by
// how close lines and units run to their limits, and a blind random baseline.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "loadattack/attacks.hpp"
#include "loadattack/dataio.hpp"
#include "loadattack/error.hpp"
#include "loadattack/grid.hpp"
#include "loadattack/operations.hpp"

namespace loadattack::strategy {

enum class Knowledge { Topology, Blind };
enum class Direction { Lower, Raise };

inline int gamma_of(Direction d) { return d == Direction::Lower ? 1 : -1; }
inline const char* direction_name(Direction d) { return d == Direction::Lower ? "lower" : "raise"; }

struct StrategyConfig {
  int n_adv = 3;
  attacks::AttackConfig attack{};
  Knowledge knowledge = Knowledge::Topology;
  std::uint64_t seed = 1;
  bool blackbox = true;  // craft with query-only gradient estimates
  ops::UCOptions uc{};

  void validate() const {
    require(n_adv >= 0, Errc::InvalidConfig, "N_adv must be >= 0");
    attack.validate();
  }
};

// One compromised-able forecast: node MW = share * unscaled output of `model`.
struct NodeForecaster {
  int bus = 0;
  double share = 1.0;
  std::size_t model = 0;
};

// Everything the attacker can reach for one operating day.
struct AttackSurface {
  const grid::GridCase* grid = nullptr;
  std::vector<const attacks::Forecaster*> models;
  std::vector<data::ScalingParams> scaling;                  // per model
  std::vector<std::vector<data::FeatureWindow>> day_windows;  // per model, 24 chronological windows
  std::vector<NodeForecaster> nodes;

  void validate() const {
    require(grid != nullptr, Errc::InstanceError, "attack surface without a case");
    require(models.size() == scaling.size() && models.size() == day_windows.size(), Errc::InstanceError,
            "models, scaling and windows must align");
    for (const auto& w : day_windows)
      require(w.size() == static_cast<std::size_t>(ops::kHours), Errc::InstanceError, "need 24 windows per model");
    for (const auto& n : nodes) {
      require(n.model < models.size(), Errc::InstanceError, "node refers to a missing model");
      grid->bus_index(n.bus);
    }
  }

  const NodeForecaster* node_at(int bus) const {
    for (const auto& n : nodes)
      if (n.bus == bus) return &n;
    return nullptr;
  }
};

// Clean nodal forecasts (24 x buses) from every node's forecaster.
inline ops::LoadMatrix clean_forecast(const AttackSurface& s) {
  s.validate();
  ops::LoadMatrix f = ops::LoadMatrix::Zero(ops::kHours, static_cast<Eigen::Index>(s.grid->num_buses()));
  std::vector<std::vector<double>> per_model(s.models.size());
  for (std::size_t m = 0; m < s.models.size(); ++m) {
    std::vector<const Eigen::MatrixXd*> xs;
    for (const auto& w : s.day_windows[m]) xs.push_back(&w.x);
    const Eigen::VectorXd y = s.models[m]->forward_batch(xs);
    for (Eigen::Index t = 0; t < y.size(); ++t) per_model[m].push_back(s.scaling[m].load_to_mw(y(t)));
  }
  for (const auto& n : s.nodes) {
    const auto b = static_cast<Eigen::Index>(s.grid->bus_index(n.bus));
    for (int t = 0; t < ops::kHours; ++t) f(t, b) += n.share * per_model[n.model][static_cast<std::size_t>(t)];
  }
  return f;
}

// ---- vulnerability ----

struct LineSlack {
  std::size_t line = 0;
  double slack_mw = 0.0;     // min over hours of limit - |flow|
  double loading = 0.0;      // max over hours of |flow| / limit
};

struct GeneratorMargin {
  std::size_t gen = 0;
  double headroom_mw = 0.0;  // min over committed hours of p_max - p
  double min_output = 0.0;   // min over committed hours of p
  double loading = 0.0;      // max over hours of p / p_max
};

struct NodeScore {
  int bus = 0;
  double line_term = 0.0;
  double gen_term = 0.0;
  double score() const { return line_term + gen_term; }
};

struct VulnerabilityReport {
  std::vector<LineSlack> lines;
  std::vector<GeneratorMargin> generators;
  std::vector<NodeScore> ranking;  // most vulnerable first
};

// score(bus) = max over incident lines and hours of |f| / f_max
//            + max over local units and hours of p / p_max.
// Only buses with a forecaster and not yet compromised are ranked; ties go to
// the lowest bus id.
inline VulnerabilityReport vulnerability_rank(const grid::GridCase& gc, const ops::CommitmentSchedule& sched,
                                              const ops::LoadMatrix& loads, const std::vector<int>& candidates,
                                              const std::vector<int>& exclude = {}) {
  VulnerabilityReport rep;
  const Eigen::MatrixXd flows = gc.lines.empty() ? Eigen::MatrixXd() : ops::schedule_flows(gc, sched.p, loads);
  std::vector<double> line_load(gc.lines.size(), 0.0);
  for (std::size_t l = 0; l < gc.lines.size(); ++l) {
    const auto& ln = gc.lines[l];
    LineSlack s;
    s.line = l;
    s.slack_mw = INFINITY;
    for (int t = 0; t < ops::kHours; ++t) {
      const double f = flows(static_cast<Eigen::Index>(l), t);
      const double lim = f >= 0.0 ? ln.f_max : -ln.f_min;
      s.slack_mw = std::min(s.slack_mw, std::max(0.0, lim - std::abs(f)));
      if (lim > 0.0) s.loading = std::max(s.loading, std::abs(f) / lim);
    }
    line_load[l] = s.loading;
    rep.lines.push_back(s);
  }
  std::vector<double> gen_load(gc.generators.size(), 0.0);
  for (std::size_t g = 0; g < gc.generators.size(); ++g) {
    const auto& gen = gc.generators[g];
    GeneratorMargin m;
    m.gen = g;
    m.headroom_mw = INFINITY;
    m.min_output = INFINITY;
    bool any = false;
    for (int t = 0; t < ops::kHours; ++t) {
      if (sched.u(static_cast<Eigen::Index>(g), t) != 1) continue;
      const double p = sched.p(static_cast<Eigen::Index>(g), t);
      any = true;
      m.headroom_mw = std::min(m.headroom_mw, gen.p_max - p);
      m.min_output = std::min(m.min_output, p);
      m.loading = std::max(m.loading, p / gen.p_max);
    }
    if (!any) m.headroom_mw = m.min_output = 0.0;
    gen_load[g] = m.loading;
    rep.generators.push_back(m);
  }
  for (int bus : candidates) {
    if (std::find(exclude.begin(), exclude.end(), bus) != exclude.end()) continue;
    NodeScore ns;
    ns.bus = bus;
    for (std::size_t l = 0; l < gc.lines.size(); ++l)
      if (gc.lines[l].from == bus || gc.lines[l].to == bus) ns.line_term = std::max(ns.line_term, line_load[l]);
    for (std::size_t g = 0; g < gc.generators.size(); ++g)
      if (gc.generators[g].bus == bus) ns.gen_term = std::max(ns.gen_term, gen_load[g]);
    rep.ranking.push_back(ns);
  }
  std::stable_sort(rep.ranking.begin(), rep.ranking.end(), [](const NodeScore& a, const NodeScore& b) {
    if (std::abs(a.score() - b.score()) > 1e-12) return a.score() > b.score();
    return a.bus < b.bus;
  });
  return rep;
}

// ---- crafting ----

// Memoizes per-(model, direction) attack series so nodes sharing a forecaster
// and windows are crafted once.
class Crafter {
 public:
  Crafter(const AttackSurface& s, const StrategyConfig& cfg) : s_(&s), cfg_(cfg) {}

  const attacks::SeriesResult& series(std::size_t model, Direction d) {
    const auto key = std::make_pair(model, d);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    attacks::AttackConfig ac = cfg_.attack;
    ac.gamma = gamma_of(d);
    attacks::SeriesResult r;
    if (cfg_.blackbox) {
      attacks::QueryHandle q(*s_->models[model]);
      r = attacks::attack_series(q, s_->day_windows[model], s_->scaling[model], ac);
    } else {
      r = attacks::attack_series(*s_->models[model], s_->day_windows[model], s_->scaling[model], ac);
    }
    queries_ += r.queries_used;
    return cache_.emplace(key, std::move(r)).first->second;
  }

  // Adversarial MW series for one node.
  std::vector<double> node_series(const NodeForecaster& n, Direction d) {
    const auto& r = series(n.model, d);
    std::vector<double> out;
    for (double y : r.attacked_forecast) out.push_back(n.share * s_->scaling[n.model].load_to_mw(y));
    return out;
  }

  long queries() const { return queries_; }

 private:
  const AttackSurface* s_;
  StrategyConfig cfg_;
  std::map<std::pair<std::size_t, Direction>, attacks::SeriesResult> cache_;
  long queries_ = 0;
};

inline std::vector<double> craft_node_attack(const AttackSurface& s, int bus, Direction d, const StrategyConfig& cfg) {
  const auto* n = s.node_at(bus);
  require(n != nullptr, Errc::InstanceError, "bus " + std::to_string(bus) + " has no forecaster");
  Crafter c(s, cfg);
  return c.node_series(*n, d);
}

// ---- plans ----

struct AttackPlan {
  std::vector<int> compromised;         // bus ids in selection order
  std::vector<Direction> directions;
  std::map<int, std::vector<double>> adversarial_mw;  // bus -> 24 MW
  ops::LoadMatrix clean_forecast;
  ops::LoadMatrix forecast;             // after the attack
  ops::CommitmentSchedule clean_schedule;
  ops::CommitmentSchedule schedule;     // adversarial schedule
  bool schedule_changed = false;
  int changed_unit_hours = 0;
  int iterations = 0;
  int uc_solves = 0;
  long queries = 0;
};

inline int unit_hour_difference(const Eigen::MatrixXi& a, const Eigen::MatrixXi& b) {
  return static_cast<int>((a.array() != b.array()).count());
}

inline double total_deviation(const std::vector<double>& adv, const ops::LoadMatrix& clean, Eigen::Index col) {
  double s = 0.0;
  for (int t = 0; t < ops::kHours; ++t) s += std::abs(adv[static_cast<std::size_t>(t)] - clean(t, col));
  return s;
}

namespace detail {

inline ops::CommitmentSchedule uc(const grid::GridCase& gc, const ops::LoadMatrix& f, const StrategyConfig& cfg) {
  return ops::solve_uc({&gc, f, std::nullopt}, cfg.uc);
}

inline std::vector<int> candidate_buses(const AttackSurface& s) {
  std::vector<int> out;
  for (const auto& n : s.nodes) out.push_back(n.bus);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace detail

// Best-first search: each round attacks the most vulnerable unattacked node in
// both directions and keeps the candidate that changes the clean commitment
// (the larger unit-hour change if both do, the larger forecast deviation if
// neither does). Stops once the commitment changed or N_adv nodes are used.
inline AttackPlan best_first_attack(const AttackSurface& s, const StrategyConfig& cfg,
                                    const ops::CommitmentSchedule* clean = nullptr) {
  cfg.validate();
  s.validate();
  const auto& gc = *s.grid;
  AttackPlan plan;
  plan.clean_forecast = clean_forecast(s);
  plan.forecast = plan.clean_forecast;
  if (clean) {
    plan.clean_schedule = *clean;
  } else {
    plan.clean_schedule = detail::uc(gc, plan.forecast, cfg);
    ++plan.uc_solves;
  }
  plan.schedule = plan.clean_schedule;
  Crafter crafter(s, cfg);
  const auto candidates = detail::candidate_buses(s);
  for (int k = 0; k < cfg.n_adv; ++k) {
    const auto rep = vulnerability_rank(gc, plan.schedule, plan.forecast, candidates, plan.compromised);
    if (rep.ranking.empty()) break;
    const int bus = rep.ranking.front().bus;
    const auto col = static_cast<Eigen::Index>(gc.bus_index(bus));
    struct Candidate {
      Direction dir;
      std::vector<double> series;
      ops::LoadMatrix forecast;
      ops::CommitmentSchedule sched;
      int diff = 0;
      double deviation = 0.0;
    };
    std::vector<Candidate> cands;
    for (Direction d : {Direction::Lower, Direction::Raise}) {
      Candidate c;
      c.dir = d;
      c.series = crafter.node_series(*s.node_at(bus), d);
      c.forecast = plan.forecast;
      for (int t = 0; t < ops::kHours; ++t) c.forecast(t, col) = c.series[static_cast<std::size_t>(t)];
      c.sched = detail::uc(gc, c.forecast, cfg);
      ++plan.uc_solves;
      c.diff = unit_hour_difference(c.sched.u, plan.clean_schedule.u);
      c.deviation = total_deviation(c.series, plan.clean_forecast, col);
      cands.push_back(std::move(c));
    }
    // Lower wins exact ties.
    const Candidate* pick = &cands[0];
    const bool any_change = cands[0].diff > 0 || cands[1].diff > 0;
    if (any_change) {
      if (cands[1].diff > cands[0].diff) pick = &cands[1];
    } else if (cands[1].deviation > cands[0].deviation) {
      pick = &cands[1];
    }
    plan.compromised.push_back(bus);
    plan.directions.push_back(pick->dir);
    plan.adversarial_mw[bus] = pick->series;
    plan.forecast = pick->forecast;
    plan.schedule = pick->sched;
    plan.changed_unit_hours = pick->diff;
    plan.iterations = k + 1;
    if (any_change) {
      plan.schedule_changed = true;
      break;
    }
  }
  plan.queries = crafter.queries();
  return plan;
}

// Blind baseline: N_adv distinct nodes and one direction each, drawn uniformly
// from a seeded generator, then a single UC solve.
inline AttackPlan random_attack(const AttackSurface& s, const StrategyConfig& cfg,
                                const ops::CommitmentSchedule* clean = nullptr) {
  cfg.validate();
  s.validate();
  const auto& gc = *s.grid;
  AttackPlan plan;
  plan.clean_forecast = clean_forecast(s);
  plan.forecast = plan.clean_forecast;
  if (clean) {
    plan.clean_schedule = *clean;
  } else {
    plan.clean_schedule = detail::uc(gc, plan.forecast, cfg);
    ++plan.uc_solves;
  }
  auto buses = detail::candidate_buses(s);
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(buses.begin(), buses.end(), rng);
  const auto n = std::min<std::size_t>(buses.size(), static_cast<std::size_t>(cfg.n_adv));
  std::bernoulli_distribution coin(0.5);
  Crafter crafter(s, cfg);
  for (std::size_t i = 0; i < n; ++i) {
    const int bus = buses[i];
    const Direction d = coin(rng) ? Direction::Lower : Direction::Raise;
    const auto series = crafter.node_series(*s.node_at(bus), d);
    const auto col = static_cast<Eigen::Index>(gc.bus_index(bus));
    for (int t = 0; t < ops::kHours; ++t) plan.forecast(t, col) = series[static_cast<std::size_t>(t)];
    plan.compromised.push_back(bus);
    plan.directions.push_back(d);
    plan.adversarial_mw[bus] = series;
  }
  plan.iterations = static_cast<int>(n);
  if (n == 0) {
    plan.schedule = plan.clean_schedule;
  } else {
    plan.schedule = detail::uc(gc, plan.forecast, cfg);
    ++plan.uc_solves;
  }
  plan.changed_unit_hours = unit_hour_difference(plan.schedule.u, plan.clean_schedule.u);
  plan.schedule_changed = plan.changed_unit_hours > 0;
  plan.queries = crafter.queries();
  return plan;
}

inline AttackPlan make_plan(const AttackSurface& s, const StrategyConfig& cfg,
                            const ops::CommitmentSchedule* clean = nullptr) {
  return cfg.knowledge == Knowledge::Topology ? best_first_attack(s, cfg, clean) : random_attack(s, cfg, clean);
}

// ---- evaluation ----

struct PlanOutcome {
  ops::DayResult day;
  double cost_delta = 0.0;  // vs the clean day, when given
  int shed_hours = 0;
  int generation_limit_hours = 0;
  int ramp_hours = 0;
  int line_hours = 0;
};

// Real-time operation of the adversarial schedule against actual loads.
inline PlanOutcome evaluate_plan(const grid::GridCase& gc, const AttackPlan& plan, const ops::LoadMatrix& actual,
                                 const ops::DayResult* clean_day = nullptr, const ops::DayOptions& opt = {}) {
  PlanOutcome out;
  out.day = ops::dispatch_day(gc, plan.schedule, actual, opt);
  if (clean_day) out.cost_delta = out.day.total_cost - clean_day->total_cost;
  for (const auto& r : out.day.reports) {
    if (!r.shed) continue;
    ++out.shed_hours;
    out.generation_limit_hours += r.generation_limit;
    out.ramp_hours += r.ramp_limit;
    out.line_hours += r.line_limit;
  }
  return out;
}

inline nlohmann::json to_json(const grid::GridCase& gc, const AttackPlan& p) {
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < p.compromised.size(); ++i) {
    const int bus = p.compromised[i];
    const auto col = static_cast<Eigen::Index>(gc.bus_index(bus));
    std::vector<double> clean(ops::kHours);
    for (int t = 0; t < ops::kHours; ++t) clean[static_cast<std::size_t>(t)] = p.clean_forecast(t, col);
    nodes.push_back({{"bus", bus},
                     {"direction", direction_name(p.directions[i])},
                     {"clean_forecast_mw", clean},
                     {"adversarial_forecast_mw", p.adversarial_mw.at(bus)}});
  }
  nlohmann::json diff = nlohmann::json::array();
  for (Eigen::Index g = 0; g < p.schedule.u.rows(); ++g)
    for (int t = 0; t < ops::kHours; ++t)
      if (p.schedule.u(g, t) != p.clean_schedule.u(g, t))
        diff.push_back({{"generator", gc.generators[static_cast<std::size_t>(g)].id}, {"hour", t}, {"clean", p.clean_schedule.u(g, t)},
                        {"attacked", p.schedule.u(g, t)}});
  return {{"nodes", nodes},
          {"schedule_changed", p.schedule_changed},
          {"changed_unit_hours", p.changed_unit_hours},
          {"schedule_diff", diff},
          {"iterations", p.iterations},
          {"uc_solves", p.uc_solves},
          {"queries", p.queries}};
}

}  // namespace loadattack::strategy
