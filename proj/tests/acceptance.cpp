// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <cstdlib>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "loadattack/experiment.hpp"
#include "oracles.hpp"

using namespace loadattack;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const Outcome& o, double seconds, double limit) {
  const bool in_time = limit <= 0.0 || seconds < limit;
  const bool ok = o.pass && in_time;
  failures += ok ? 0 : 1;
  std::printf("%s %2d %-26s %s | %.1f s", ok ? "PASS" : "FAIL", id, name, o.detail.c_str(), seconds);
  if (limit > 0.0) std::printf(" (limit %.0f s)", limit);
  std::printf("\n");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// ---- 1: gradients ----

Outcome gradients() {
  const auto r = oracle::gradient_probes(20260101, 200);
  return {r.probes == 200 && r.worst_input < 1e-4 && r.worst_param < 1e-4,
          fmt("probes %.0f, worst rel err input %.2e param %.2e", r.probes, r.worst_input, r.worst_param)};
}

// ---- 2: solver oracles ----

Outcome solver_oracles() {
  std::mt19937_64 rng(20260102);
  int lp_ok = 0, lps = 0;
  double lp_worst = 0.0;
  while (lps < 100) {
    std::uniform_int_distribution<int> nd(2, 8), md(0, 3), ud(1, 6);
    const int n = nd(rng);
    const int meq = std::min(md(rng), n - 1);
    auto lp = oracle::random_feasible_lp(rng, n, meq, ud(rng));
    if (meq > 0 && Eigen::FullPivLU<Eigen::MatrixXd>(lp.a_eq).rank() < meq) continue;
    const auto ref = oracle::vertex_enumeration(lp);
    if (!ref.feasible) continue;
    const auto s = milp::solve_lp(lp);
    ++lps;
    const double err = s.status == milp::Status::Optimal ? std::abs(s.objective - ref.objective) : INFINITY;
    lp_worst = std::max(lp_worst, err);
    lp_ok += err <= 1e-7 ? 1 : 0;
  }
  int mip_ok = 0, mips = 0;
  double mip_worst = 0.0;
  while (mips < 50) {
    std::uniform_int_distribution<int> bd(2, 10), cd(0, 3), md(1, 6);
    const auto mip = oracle::random_feasible_mip(rng, bd(rng), cd(rng), md(rng));
    const auto ref = oracle::binary_enumeration(mip);
    if (!ref.feasible) continue;
    const auto s = milp::solve_milp(mip);
    ++mips;
    const double err = s.status == milp::Status::Optimal ? std::abs(s.objective - ref.objective) : INFINITY;
    mip_worst = std::max(mip_worst, err);
    mip_ok += err <= 1e-6 ? 1 : 0;
  }
  return {lp_ok == 100 && mip_ok == 50,
          fmt("LP %.0f/100 (worst %.1e), MILP %.0f/50 (worst %.1e)", lp_ok, lp_worst, mip_ok, mip_worst)};
}

// ---- 3: UC/ED feasibility ----

struct Feasibility {
  double worst_balance = 0.0;
  double worst_shed_bound = 0.0;  // violation of 0 <= LS <= L
  int schedules = 0, dispatches = 0, relaxed = 0;
  std::vector<std::string> errors;
  std::string label;
};

// Independent schedule check: transition logic and run lengths, with the
// pre-horizon state history included.
void check_schedule(const grid::GridCase& gc, const ops::CommitmentSchedule& s, const ops::LoadMatrix& forecast,
                    Feasibility& f) {
  ++f.schedules;
  double gen_total_err = 0.0;
  for (std::size_t g = 0; g < gc.generators.size(); ++g) {
    const auto& u = gc.generators[g];
    const auto gi = static_cast<Eigen::Index>(g);
    std::vector<int> seq(static_cast<std::size_t>(u.initial.hours_in_state), u.initial.on ? 1 : 0);
    const std::size_t offset = seq.size();
    for (int t = 0; t < ops::kHours; ++t) {
      const int prev = t == 0 ? (u.initial.on ? 1 : 0) : s.u(gi, t - 1);
      const int cur = s.u(gi, t);
      if (cur < 0 || cur > 1 || s.z(gi, t) < 0 || s.z(gi, t) > 1 || s.y(gi, t) < 0 || s.y(gi, t) > 1)
        f.errors.push_back(u.id + " non-binary at hour " + std::to_string(t));
      if (cur - prev != s.z(gi, t) - s.y(gi, t)) f.errors.push_back(u.id + " logic at hour " + std::to_string(t));
      const double p = s.p(gi, t);
      if (p < u.p_min * cur - 1e-6 || p > u.p_max * cur + 1e-6) f.errors.push_back(u.id + " output bounds");
      seq.push_back(cur);
    }
    for (std::size_t k = offset; k < seq.size(); ++k) {
      if (seq[k] == seq[k - 1]) continue;
      int run = 0;
      for (std::size_t j = k; j-- > 0 && seq[j] == seq[k - 1];) ++run;
      const int need = seq[k - 1] == 1 ? u.min_up : u.min_down;
      // the history prefix only records hours_in_state, so a run reaching it is exactly that long
      if (run < need) f.errors.push_back(u.id + " min up/down at hour " + std::to_string(k - offset));
    }
  }
  for (int t = 0; t < ops::kHours; ++t) gen_total_err = std::max(gen_total_err, std::abs(s.p.col(t).sum() - forecast.row(t).sum()));
  f.worst_balance = std::max(f.worst_balance, gen_total_err);
}

// Nodal balance: generation - (load - shed) at each bus equals its net line outflow.
void check_dispatch(const grid::GridCase& gc, const ops::DayResult& d, const ops::LoadMatrix& actual, Feasibility& f) {
  const auto nb = static_cast<Eigen::Index>(gc.num_buses());
  for (int t = 0; t < ops::kHours; ++t) {
    const auto& h = d.hours[static_cast<std::size_t>(t)];
    ++f.dispatches;
    Eigen::VectorXd net = Eigen::VectorXd::Zero(nb);
    for (std::size_t g = 0; g < gc.generators.size(); ++g)
      net(static_cast<Eigen::Index>(gc.bus_index(gc.generators[g].bus))) += h.p(static_cast<Eigen::Index>(g));
    for (Eigen::Index b = 0; b < nb; ++b) {
      const double load = actual(t, b), shed = h.shed(b);
      f.worst_shed_bound = std::max({f.worst_shed_bound, -shed, shed - load});
      net(b) -= load - shed;
    }
    for (std::size_t l = 0; l < gc.lines.size(); ++l) {
      const double flow = h.flows(static_cast<Eigen::Index>(l));
      net(static_cast<Eigen::Index>(gc.bus_index(gc.lines[l].from))) -= flow;
      net(static_cast<Eigen::Index>(gc.bus_index(gc.lines[l].to))) += flow;
    }
    f.worst_balance = std::max(f.worst_balance, net.cwiseAbs().maxCoeff());
    // over-generation fallback: the hour is flagged and balance must still hold
    if (h.ramp_down_relaxed || h.p_min_relaxed) {
      ++f.relaxed;
      continue;
    }
    for (std::size_t g = 0; g < gc.generators.size(); ++g) {
      const auto& u = gc.generators[g];
      const int on = d.schedule.u(static_cast<Eigen::Index>(g), t);
      const double pg = h.p(static_cast<Eigen::Index>(g));
      if (pg < u.p_min * on - 1e-6 || pg > u.p_max * on + 1e-6)
        f.errors.push_back(f.label + " " + u.id + " dispatch outside commitment at hour " + std::to_string(t));
    }
  }
}

void check_day(const grid::GridCase& gc, const ops::LoadMatrix& forecast, const ops::LoadMatrix& actual, Feasibility& f) {
  const auto sched = ops::solve_uc({&gc, forecast, std::nullopt});
  check_schedule(gc, sched, forecast, f);
  check_dispatch(gc, ops::dispatch_day(gc, sched, actual), actual, f);
}

Outcome uc_ed_feasibility(const experiment::ExperimentConfig& cfg, const experiment::Prepared& p,
                          const attacks::Forecaster& model) {
  Feasibility f;
  const auto gc = grid::parse_case(cfg.case_path);
  std::mt19937_64 rng(20260103);
  std::uniform_real_distribution<double> noise(0.95, 1.05);
  for (auto start : experiment::test_day_starts(p, cfg.test_days)) {
    const auto actual = experiment::actual_loads(gc, p, start);
    const auto clean =
        strategy::clean_forecast(experiment::surface_for(gc, model, p.scaling, experiment::day_windows(cfg, p, start)));
    f.label = "clean " + std::to_string(start);
    check_day(gc, clean, actual, f);
    ops::LoadMatrix skewed = clean;
    for (int t = 0; t < ops::kHours; ++t) skewed.row(t) *= noise(rng);
    f.label = "skewed " + std::to_string(start);
    check_day(gc, skewed, actual, f);
  }
  const int relaxed_on_case = f.relaxed;
  // Small case with a binding line and hourly loads drawn independently.
  const auto two = grid::parse_case(grid::bundled_case("two_bus"));
  std::uniform_real_distribution<double> mw(120.0, 420.0);
  for (int k = 0; k < 20; ++k) {
    ops::LoadMatrix fc = ops::LoadMatrix::Zero(ops::kHours, 2), act = fc;
    for (int t = 0; t < ops::kHours; ++t) {
      fc(t, 1) = mw(rng);
      act(t, 1) = fc(t, 1) * noise(rng) * noise(rng);
    }
    f.label = "two_bus " + std::to_string(k);
    check_day(two, fc, act, f);
  }
  const bool ok = f.errors.empty() && f.worst_balance <= 1e-6 && f.worst_shed_bound <= 1e-9;
  const int stressed_relaxed = relaxed_on_case;
  std::string detail = fmt("%.0f schedules, %.0f dispatches, balance %.1e MW, LS bound %.1e", f.schedules, f.dispatches,
                           f.worst_balance, f.worst_shed_bound) +
                       fmt(", relaxed hours %.0f (stressed case %.0f)", f.relaxed, stressed_relaxed);
  if (!f.errors.empty()) detail += ", first error: " + f.errors.front();
  return {ok, detail};
}

// ---- 4: clean baseline ----

Outcome clean_baseline(const experiment::ExperimentConfig& cfg, const experiment::Prepared& p,
                       const attacks::Forecaster& model) {
  const auto gc = grid::parse_case(cfg.case_path);
  int days = 0, shed = 0;
  double mape = 0.0;
  for (auto start : experiment::test_day_starts(p, cfg.test_days)) {
    const auto actual = experiment::actual_loads(gc, p, start);
    const auto fc =
        strategy::clean_forecast(experiment::surface_for(gc, model, p.scaling, experiment::day_windows(cfg, p, start)));
    const auto d = ops::run_day(gc, fc, actual);
    shed += d.has_shedding() ? 1 : 0;
    mape += experiment::mape_of(experiment::row_sums(fc), experiment::row_sums(actual));
    ++days;
  }
  mape /= std::max(days, 1);
  return {days == 30 && shed == 0 && mape <= 3.0, fmt("%.0f days, %.0f shed days, clean MAPE %.3f %%", days, shed, mape)};
}

// ---- 5, 6, 10: attacks on the test windows ----

struct AttackRun {
  std::vector<double> clean, attacked;
};

AttackRun blackbox_run(const nn::ForecastModel& m, const std::vector<data::FeatureWindow>& ws, double eps, int gamma) {
  const attacks::ModelForecaster f(m);
  attacks::QueryHandle q(f);
  attacks::AttackConfig ac;
  ac.epsilon = eps;
  ac.gamma = gamma;
  AttackRun r;
  for (const auto& w : ws) {
    const auto a = attacks::blackbox_attack(q, w, m.scaling, ac);
    r.clean.push_back(a.clean_forecast);
    r.attacked.push_back(a.attacked_forecast);
  }
  return r;
}

Outcome attack_effectiveness(const nn::ForecastModel& m, const std::vector<data::FeatureWindow>& ws) {
  const auto truth = experiment::targets_of(ws);
  const auto r = blackbox_run(m, ws, 5.0, 1);
  const double clean = nn::metrics_from(m.scaling, r.clean, truth).mape;
  const double attacked = nn::metrics_from(m.scaling, r.attacked, truth).mape;
  return {attacked >= 3.0 * clean,
          fmt("%.0f windows, clean %.3f %% -> black-box %.3f %% (%.2fx)", ws.size(), clean, attacked, attacked / clean)};
}

Outcome blackbox_vs_whitebox(const experiment::ExperimentConfig& base, const nn::ForecastModel& m,
                             const std::vector<data::FeatureWindow>& ws) {
  auto cfg = base;
  cfg.sweep_epsilons = {1, 2, 3, 4, 5};
  double worst = 0.0;
  std::string detail;
  for (const auto& r : experiment::attack_sweep(cfg, m, ws)) {
    const double rel = std::abs(r.blackbox_mape - r.whitebox_mape) / r.whitebox_mape;
    worst = std::max(worst, rel);
    detail += fmt("e%.0f wb %.2f bb %.2f; ", r.epsilon, r.whitebox_mape, r.blackbox_mape);
  }
  return {worst <= 0.35, detail + fmt("worst relative gap %.3f", worst)};
}

Outcome direction(const nn::ForecastModel& m, const std::vector<data::FeatureWindow>& ws) {
  const auto down = blackbox_run(m, ws, 5.0, 1);
  const auto up = blackbox_run(m, ws, 5.0, -1);
  int lowered = 0, raised = 0;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    lowered += down.attacked[i] < down.clean[i] ? 1 : 0;
    raised += up.attacked[i] > up.clean[i] ? 1 : 0;
  }
  const double n = static_cast<double>(ws.size());
  return {lowered >= 0.95 * n && raised >= 0.95 * n,
          fmt("gamma=+1 lowered %.4f, gamma=-1 raised %.4f of %.0f windows", lowered / n, raised / n, n)};
}

// ---- 7: strategic shedding ----

Outcome strategic_shedding(const experiment::ExperimentConfig& base, const experiment::Prepared& p,
                           const attacks::Forecaster& model) {
  auto cfg = base;
  cfg.attack.epsilon = 5.0;
  cfg.n_adv = 3;
  const auto gc = grid::parse_case(cfg.case_path);
  const auto s = experiment::summarize(experiment::simulate_days(cfg, gc, p, model));
  return {s.days == 30 && 2 * s.topology_shed_days >= s.days && s.blind_shed_days < s.topology_shed_days,
          fmt("%.0f days: topology-aware shed on %.0f, blind on %.0f; schedule changed on %.0f", s.days,
              s.topology_shed_days, s.blind_shed_days, s.topology_changed_days)};
}

// ---- 8: nested warm starts ----

Outcome nested_monotone(const nn::ForecastModel& m, const std::vector<data::FeatureWindow>& ws) {
  const attacks::ModelForecaster f(m);
  attacks::QueryHandle q(f);
  long checks = 0, violations = 0;
  double worst = 0.0;
  for (int gamma : {1, -1}) {
    for (bool black : {false, true}) {
      for (const auto& w : ws) {
        attacks::AttackConfig ac;
        ac.gamma = gamma;
        ac.epsilon = 1.0;
        auto prev = black ? attacks::blackbox_attack(q, w, m.scaling, ac) : attacks::whitebox_attack(f, w, m.scaling, ac);
        for (double eps = 2.0; eps <= 5.0; eps += 1.0) {
          ac.epsilon = eps;
          const auto cur = black ? attacks::blackbox_attack(q, w, m.scaling, ac, &prev.adversarial)
                                 : attacks::whitebox_attack(f, w, m.scaling, ac, &prev.adversarial);
          const double loss = gamma * (cur.attacked_forecast - prev.attacked_forecast);
          worst = std::max(worst, loss);
          violations += loss > 0.0 ? 1 : 0;
          ++checks;
          prev = cur;
        }
      }
    }
  }
  return {violations == 0, fmt("%.0f nested pairs (white/black-box, both directions), %.0f worse, worst %.2e", checks,
                               violations, worst)};
}

// ---- 9: transfer ----

Outcome transfer(const experiment::ExperimentConfig& base, const experiment::Prepared& p, const nn::ForecastModel& m,
                 const std::vector<data::FeatureWindow>& ws) {
  auto cfg = base;
  cfg.sweep_epsilons = {5.0};
  const auto sub = experiment::train_substitute(cfg, p.scaling);
  const auto r = experiment::attack_sweep(cfg, m, ws, &sub).front();
  return {r.transfer_mape >= 2.0 * r.clean_mape && r.transfer_crafting_queries == 0,
          fmt("clean %.3f %% -> transfer %.3f %% (%.2fx), crafting queries %.0f", r.clean_mape, r.transfer_mape,
              r.transfer_mape / r.clean_mape, static_cast<double>(r.transfer_crafting_queries))};
}

}  // namespace

// Optional arguments select criteria by number; none runs all.
int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto selected = [&](int id) { return only.empty() || only.count(id) > 0; };
  auto timed = [&](int id, const char* name, double limit, double extra, const std::function<Outcome()>& fn) {
    if (!selected(id)) return;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    report(id, name, o, since(t0) + extra, limit);
  };

  timed(1, "gradient check", 30, 0, gradients);
  timed(2, "LP/MILP oracles", 120, 0, solver_oracles);

  // Shared pipeline: default synthetic suite and recurrent forecaster.
  const auto t_setup = Clock::now();
  const experiment::ExperimentConfig cfg;
  const auto p = experiment::prepare(cfg, experiment::load_dataset(cfg));
  const auto model = experiment::train_model(cfg, p);
  const attacks::ModelForecaster f(model);
  const double setup = since(t_setup);
  std::printf("     setup: %zu train / %zu test windows, model trained in %.1f s (added to criteria that use it)\n",
              p.train_windows.size(), p.test_windows.size(), setup);
  const auto& ws = p.test_windows;

  timed(3, "UC/ED feasibility", 120, setup, [&] { return uc_ed_feasibility(cfg, p, f); });
  timed(4, "clean baseline", 300, setup, [&] { return clean_baseline(cfg, p, f); });
  timed(5, "black-box effectiveness", 300, setup, [&] { return attack_effectiveness(model, ws); });
  timed(6, "black-box vs white-box", 0, 0, [&] { return blackbox_vs_whitebox(cfg, model, ws); });
  timed(7, "strategic shedding", 900, setup, [&] { return strategic_shedding(cfg, p, f); });
  timed(8, "nested epsilon monotone", 0, 0, [&] { return nested_monotone(model, ws); });
  timed(9, "transferability", 0, 0, [&] { return transfer(cfg, p, model, ws); });
  timed(10, "attack direction", 0, 0, [&] { return direction(model, ws); });

  std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
