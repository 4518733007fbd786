#include <gtest/gtest.h>

#include <functional>
#include <limits>
#include <map>
#include <random>

#include "loadattack/operations.hpp"

using namespace loadattack;
using namespace loadattack::ops;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::IoError;
}

struct Unit {
  std::string id;
  double p_min, p_max, mc, nl = 0.0, su = 0.0, sd = 0.0;
  int min_up = 1, min_down = 1;
  double ramp = -1.0;  // < 0: p_max
  bool on = false;
  double output = 0.0;
  int hours = 8;
};

nlohmann::json unit_json(const Unit& u) {
  const double r = u.ramp < 0 ? u.p_max : u.ramp;
  return {{"id", u.id}, {"bus", 1}, {"p_min", u.p_min}, {"p_max", u.p_max}, {"marginal_cost", u.mc},
          {"no_load_cost", u.nl}, {"startup_cost", u.su}, {"shutdown_cost", u.sd}, {"min_up", u.min_up},
          {"min_down", u.min_down}, {"ramp_up", r}, {"ramp_down", r},
          {"initial", {{"on", u.on}, {"hours_in_state", u.hours}, {"output", u.on ? u.output : 0.0}}}};
}

grid::GridCase single_bus(const std::vector<Unit>& units, double reserve = 0.0) {
  nlohmann::json j = {{"version", 1}, {"name", "one"}, {"reserve_fraction", reserve}, {"voll", 1000.0},
                      {"buses", {{{"id", 1}, {"reference", true}}}}, {"lines", nlohmann::json::array()},
                      {"generators", nlohmann::json::array()}, {"loads", {{{"bus", 1}, {"share", 1.0}}}}};
  for (const auto& u : units) j["generators"].push_back(unit_json(u));
  return grid::parse_case_json(j);
}

LoadMatrix column(const std::vector<double>& hourly) {
  LoadMatrix m(kHours, 1);
  for (int t = 0; t < kHours; ++t) m(t, 0) = hourly[static_cast<std::size_t>(t)];
  return m;
}

LoadMatrix flat(double mw, Eigen::Index buses = 1) { return LoadMatrix::Constant(kHours, buses, mw); }

// Merit-order dispatch cost of a committed set, or +inf when infeasible.
double hour_cost(const grid::GridCase& gc, unsigned mask, double load, double reserve) {
  double lo = 0.0, hi = 0.0, cost = 0.0;
  std::vector<std::size_t> on;
  for (std::size_t g = 0; g < gc.generators.size(); ++g) {
    if (!(mask >> g & 1u)) continue;
    const auto& u = gc.generators[g];
    lo += u.p_min;
    hi += u.p_max;
    cost += u.no_load_cost + u.marginal_cost * u.p_min;
    on.push_back(g);
  }
  if (load < lo - 1e-9 || load > hi + 1e-9 || hi < (1.0 + reserve) * load - 1e-9) return std::numeric_limits<double>::infinity();
  std::sort(on.begin(), on.end(), [&](auto a, auto b) { return gc.generators[a].marginal_cost < gc.generators[b].marginal_cost; });
  double rest = load - lo;
  for (auto g : on) {
    const auto& u = gc.generators[g];
    const double take = std::min(rest, u.p_max - u.p_min);
    cost += take * u.marginal_cost;
    rest -= take;
  }
  return cost;
}

// Exhaustive dynamic program over on/off states with run lengths, for fleets
// whose ramps never bind.
double brute_force_uc(const grid::GridCase& gc, const LoadMatrix& load) {
  const std::size_t ng = gc.generators.size();
  const unsigned states = 1u << ng;
  int cap = 1;
  for (const auto& g : gc.generators) cap = std::max({cap, g.min_up, g.min_down});
  // key: mask and per-unit run length (capped)
  std::map<std::pair<unsigned, std::vector<int>>, double> cur;
  {
    unsigned m = 0;
    std::vector<int> run;
    for (std::size_t g = 0; g < ng; ++g) {
      if (gc.generators[g].initial.on) m |= 1u << g;
      run.push_back(std::min(cap, gc.generators[g].initial.hours_in_state));
    }
    cur[{m, run}] = 0.0;
  }
  for (int t = 0; t < kHours; ++t) {
    std::map<std::pair<unsigned, std::vector<int>>, double> next;
    for (const auto& [key, c0] : cur) {
      const auto& [prev, run] = key;
      for (unsigned m = 0; m < states; ++m) {
        double c = c0;
        std::vector<int> nrun(ng);
        bool ok = true;
        for (std::size_t g = 0; g < ng && ok; ++g) {
          const auto& u = gc.generators[g];
          const bool was = prev >> g & 1u, is = m >> g & 1u;
          if (was == is) {
            nrun[g] = std::min(cap, run[g] + 1);
            continue;
          }
          if (run[g] < (was ? u.min_up : u.min_down)) ok = false;
          c += is ? u.startup_cost : u.shutdown_cost;
          nrun[g] = 1;
        }
        if (!ok) continue;
        c += hour_cost(gc, m, load.row(t).sum(), gc.reserve_fraction);
        if (!std::isfinite(c)) continue;
        auto [it, fresh] = next.try_emplace({m, nrun}, c);
        if (!fresh) it->second = std::min(it->second, c);
      }
    }
    cur = std::move(next);
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [k, c] : cur) best = std::min(best, c);
  return best;
}

EDInstance ed_for(const grid::GridCase& gc, double load, double p_prev) {
  EDInstance ed;
  ed.grid = &gc;
  ed.load = Eigen::VectorXd::Constant(1, load);
  ed.committed.assign(gc.generators.size(), true);
  ed.previously_on.assign(gc.generators.size(), true);
  ed.p_prev = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(gc.generators.size()), p_prev);
  return ed;
}

}  // namespace

TEST(UnitCommitment, SingleUnitFollowsLoad) {
  const auto gc = single_bus({{"g", 10.0, 200.0, 20.0, 5.0, 100.0, 0.0, 1, 1, -1.0, true, 50.0}});
  std::vector<double> load(kHours);
  for (int t = 0; t < kHours; ++t) load[static_cast<std::size_t>(t)] = 50.0 + 4.0 * t;
  const auto s = solve_uc({&gc, column(load), std::nullopt});
  EXPECT_EQ(s.u.sum(), kHours);
  for (int t = 0; t < kHours; ++t) EXPECT_NEAR(s.p(0, t), load[static_cast<std::size_t>(t)], 1e-6);
  double expect = 0.0;
  for (double l : load) expect += 20.0 * l + 5.0;
  EXPECT_NEAR(s.planned_cost, expect, 1e-6);
  EXPECT_EQ(check_schedule(gc, s), "");
}

TEST(UnitCommitment, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 6; ++trial) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Unit a{"a", 40.0 + 40 * u(rng), 250.0, 10.0 + 5 * u(rng), 50.0 * u(rng), 300.0 * u(rng), 20.0 * u(rng),
                 1 + static_cast<int>(3 * u(rng)), 1 + static_cast<int>(3 * u(rng)), -1.0, trial % 2 == 0, 90.0};
    const Unit b{"b", 10.0 + 20 * u(rng), 150.0, 25.0 + 20 * u(rng), 30.0 * u(rng), 200.0 * u(rng), 10.0 * u(rng),
                 1 + static_cast<int>(3 * u(rng)), 1 + static_cast<int>(3 * u(rng)), -1.0, false, 0.0};
    const Unit c{"c", 5.0, 80.0, 60.0, 5.0, 50.0, 0.0, 1, 2, -1.0, false, 0.0};
    const auto gc = single_bus({a, b, c}, 0.02);
    std::vector<double> load(kHours);
    for (int t = 0; t < kHours; ++t) load[static_cast<std::size_t>(t)] = 120.0 + 180.0 * (0.5 - 0.5 * std::cos(2 * M_PI * t / 24)) + 30 * u(rng);
    const auto s = solve_uc({&gc, column(load), std::nullopt});
    EXPECT_NEAR(s.planned_cost, brute_force_uc(gc, column(load)), 1e-5 * s.planned_cost) << "trial " << trial;
    EXPECT_EQ(check_schedule(gc, s), "");
  }
}

TEST(UnitCommitment, ReserveForcesSecondUnit) {
  const Unit cheap{"cheap", 0.0, 100.0, 10.0};
  const Unit dear{"dear", 0.0, 100.0, 50.0, 1.0};
  const auto loose = single_bus({cheap, dear}, 0.0);
  EXPECT_EQ(solve_uc({&loose, flat(99.0), std::nullopt}).u.row(1).sum(), 0);
  const auto tight = single_bus({cheap, dear}, 0.03);
  const auto s = solve_uc({&tight, flat(99.0), std::nullopt});
  EXPECT_EQ(s.u.row(1).sum(), kHours);
  EXPECT_NEAR(s.p.row(0).sum(), 99.0 * kHours, 1e-6);
}

TEST(UnitCommitment, InfeasibleAndBadInputs) {
  const auto gc = single_bus({{"g", 0.0, 100.0, 10.0}});
  EXPECT_EQ(code_of([&] { solve_uc({&gc, flat(150.0), std::nullopt}); }), Errc::UCInfeasible);
  EXPECT_EQ(code_of([&] { solve_uc({&gc, LoadMatrix::Constant(23, 1, 10.0), std::nullopt}); }), Errc::InstanceError);
  EXPECT_EQ(code_of([&] { solve_uc({&gc, flat(-1.0), std::nullopt}); }), Errc::InstanceError);
}

TEST(UnitCommitment, LazyLinesMatchExplicitNetwork) {
  const auto gc = grid::parse_case(grid::bundled_case("two_bus"));
  std::vector<double> load(kHours);
  for (int t = 0; t < kHours; ++t) load[static_cast<std::size_t>(t)] = 250.0 + 200.0 * std::sin(M_PI * t / 24);
  LoadMatrix l = LoadMatrix::Zero(kHours, 2);
  l.col(1) = column(load);
  const auto lazy = solve_uc({&gc, l, std::nullopt});
  UCOptions opt;
  opt.explicit_network = true;
  const auto full = solve_uc({&gc, l, std::nullopt}, opt);
  EXPECT_NEAR(lazy.planned_cost, full.planned_cost, 1e-6 * full.planned_cost);
}

TEST(EconomicDispatch, ShedsExactDeficit) {
  const auto gc = single_bus({{"g", 0.0, 100.0, 10.0}});
  const auto r = solve_ed(ed_for(gc, 120.0, 100.0));
  EXPECT_NEAR(r.total_shed(), 20.0, 1e-9);
  EXPECT_NEAR(r.p(0), 100.0, 1e-9);
  EXPECT_NEAR(r.shed_cost, 20.0 * gc.voll, 1e-6);
  EXPECT_EQ(r.gens_at_capacity, std::vector<std::size_t>{0});
}

TEST(EconomicDispatch, RampLimitCausesShedding) {
  const auto gc = single_bus({{"g", 0.0, 200.0, 10.0, 0.0, 0.0, 0.0, 1, 1, 20.0}});
  const auto r = solve_ed(ed_for(gc, 100.0, 50.0));
  EXPECT_NEAR(r.p(0), 70.0, 1e-9);
  EXPECT_NEAR(r.total_shed(), 30.0, 1e-9);
  EXPECT_EQ(r.gens_at_ramp_limit, std::vector<std::size_t>{0});
}

TEST(EconomicDispatch, NoSheddingWhenCapacitySuffices) {
  const auto gc = single_bus({{"a", 0.0, 60.0, 10.0}, {"b", 0.0, 60.0, 30.0}});
  const auto r = solve_ed(ed_for(gc, 100.0, 50.0));
  EXPECT_EQ(r.total_shed(), 0.0);
  EXPECT_NEAR(r.p(0), 60.0, 1e-9);
  EXPECT_NEAR(r.p(1), 40.0, 1e-9);
  EXPECT_NEAR(r.dispatch_cost, 60.0 * 10 + 40.0 * 30, 1e-6);
}

TEST(EconomicDispatch, LineLimitShedsBehindTheLine) {
  const auto gc = grid::parse_case(grid::bundled_case("two_bus"));
  EDInstance ed;
  ed.grid = &gc;
  ed.load = (Eigen::VectorXd(2) << 0.0, 700.0).finished();
  ed.committed = {true, true};
  ed.previously_on = {true, true};
  ed.p_prev = (Eigen::VectorXd(2) << 400.0, 150.0).finished();
  const auto r = solve_ed(ed);
  EXPECT_NEAR(r.total_shed(), 150.0, 1e-6);
  EXPECT_NEAR(r.flows(0), 400.0, 1e-6);
}

TEST(Day, PerfectForecastNeverSheds) {
  const auto gc = grid::parse_case(grid::bundled_case("two_bus"));
  LoadMatrix l = LoadMatrix::Zero(kHours, 2);
  for (int t = 0; t < kHours; ++t) l(t, 1) = 200.0 + 150.0 * std::sin(M_PI * t / 24);
  const auto d = run_day(gc, l, l);
  EXPECT_FALSE(d.has_shedding());
  EXPECT_NEAR(d.dispatch_cost + d.transition_cost, d.schedule.planned_cost, 1e-6 * d.total_cost);
  // Forcing the peaker off during the peak sheds what the base unit cannot reach.
  Eigen::MatrixXi off = Eigen::MatrixXi::Zero(2, kHours);
  off.row(0).setOnes();
  LoadMatrix high = l;
  high.col(1).array() += 150.0;
  const auto forced = run_day(gc, high, high, off);
  EXPECT_TRUE(forced.has_shedding());
  EXPECT_NEAR(forced.shed_mwh, (high.col(1).array() - 400.0).max(0.0).sum(), 1e-5);
}
