#pragma once

// End-to-end pipeline: synthetic data -> trained forecaster -> per-day clean and
// attacked operation on a grid case, plus the attack-only MAPE sweep.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loadattack/attacks.hpp"
#include "loadattack/dataio.hpp"
#include "loadattack/error.hpp"
#include "loadattack/grid.hpp"
#include "loadattack/neuralnet.hpp"
#include "loadattack/operations.hpp"
#include "loadattack/strategy.hpp"

namespace loadattack::experiment {

inline constexpr const char* kVersion = "1.0.0";

// Sub-seed for one named stage, derived from the master seed.
inline std::uint64_t sub_seed(std::uint64_t master, std::uint32_t stage) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32), stage};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

enum Stage : std::uint32_t { kData = 1, kModel = 2, kTrain = 3, kBlind = 4, kSubstituteData = 5, kSubstituteModel = 6 };

// A winter test period with calm weather, so day-to-day peaks stay close together.
inline data::SynthConfig default_synth() {
  data::SynthConfig s;
  s.days = 450;
  s.start = data::timestamp_of(2019, 1, 1);
  s.noise = 0.003;
  s.seasonal_amplitude = 3.0;
  s.front_sd = 0.15;
  return s;
}

struct ExperimentConfig {
  std::string case_path = grid::bundled_case("stressed14");
  std::string dataset_path;  // empty: generate synthetic data
  std::string model_path;    // empty: train in process
  data::SynthConfig synth = default_synth();
  nn::Family family = nn::Family::Recurrent;
  int history = 5;  // H
  int lead = 1;     // k
  double train_fraction = 0.8;
  int epochs = 0;   // 0: family default
  double learning_rate = 0.05;
  int batch_size = 32;
  attacks::AttackConfig attack{};
  bool blackbox = true;
  int n_adv = 3;
  std::vector<double> sweep_epsilons{0, 1, 2, 3, 4, 5};
  int sweep_stride = 1;  // use every n-th test window in the sweep
  int test_days = 30;
  std::uint64_t seed = 1;

  void validate() const {
    synth.validate();
    attack.validate();
    require(history >= 0 && lead >= 1, Errc::InvalidConfig, "need H >= 0 and lead >= 1");
    require(train_fraction > 0.0 && train_fraction < 1.0, Errc::InvalidConfig, "train fraction must lie in (0, 1)");
    require(epochs >= 0 && batch_size >= 1 && learning_rate >= 0.0, Errc::InvalidConfig, "bad training settings");
    require(n_adv >= 0, Errc::InvalidConfig, "N_adv must be >= 0");
    require(test_days >= 1, Errc::InvalidConfig, "need at least one test day");
    require(sweep_stride >= 1, Errc::InvalidConfig, "sweep stride must be >= 1");
    for (double e : sweep_epsilons) require(e >= 0.0, Errc::InvalidConfig, "sweep epsilons must be >= 0");
  }

  nn::TrainConfig train_config() const {
    auto t = nn::TrainConfig::for_family(family, sub_seed(seed, kTrain));
    if (epochs > 0) t.epochs = epochs;
    t.learning_rate = learning_rate;
    t.batch_size = batch_size;
    return t;
  }

  nn::ModelConfig model_config(int d) const {
    return family == nn::Family::Feedforward ? nn::ModelConfig::feedforward(history, d, sub_seed(seed, kModel))
                                             : nn::ModelConfig::recurrent(history, d, sub_seed(seed, kModel));
  }

  data::SynthConfig synth_config() const {
    auto s = synth;
    s.seed = sub_seed(seed, kData);
    return s;
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"case", c.case_path},
          {"dataset", c.dataset_path},
          {"model", c.model_path},
          {"synth",
           {{"days", c.synth.days},
            {"stations", c.synth.stations},
            {"noise", c.synth.noise},
            {"start", data::format_timestamp(c.synth.start)},
            {"load_low", c.synth.load_low},
            {"load_high", c.synth.load_high},
            {"seasonal_amplitude", c.synth.seasonal_amplitude},
            {"diurnal_amplitude", c.synth.diurnal_amplitude},
            {"front_persistence", c.synth.front_persistence},
            {"front_sd", c.synth.front_sd},
            {"heating_slope", c.synth.heating_slope}}},
          {"family", nn::family_name(c.family)},
          {"history", c.history},
          {"lead", c.lead},
          {"train_fraction", c.train_fraction},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"attack",
           {{"epsilon", c.attack.epsilon},
            {"norm", attacks::norm_name(c.attack.norm)},
            {"alpha", c.attack.alpha},
            {"delta", c.attack.delta},
            {"iterations", c.attack.iterations},
            {"query_budget", c.attack.query_budget}}},
          {"blackbox", c.blackbox},
          {"n_adv", c.n_adv},
          {"sweep_epsilons", c.sweep_epsilons},
          {"sweep_stride", c.sweep_stride},
          {"test_days", c.test_days},
          {"seed", c.seed}};
}

// Keys absent from `j` keep their current values.
inline void apply_json(ExperimentConfig& c, const nlohmann::json& j) {
  require(j.is_object(), Errc::InvalidConfig, "config must be a JSON object");
  static const std::set<std::string> known{"case", "dataset", "model", "synth", "family", "history", "lead", "train_fraction",
                                           "epochs", "learning_rate", "batch_size", "attack", "blackbox", "n_adv",
                                           "sweep_epsilons", "sweep_stride", "test_days", "seed"};
  for (const auto& [k, v] : j.items()) require(known.count(k) > 0, Errc::InvalidConfig, "unknown config key '" + k + "'");
  try {
    if (j.contains("case")) c.case_path = j["case"].get<std::string>();
    if (j.contains("dataset")) c.dataset_path = j["dataset"].get<std::string>();
    if (j.contains("model")) c.model_path = j["model"].get<std::string>();
    if (j.contains("synth")) {
      const auto& s = j["synth"];
      if (s.contains("days")) c.synth.days = s["days"].get<int>();
      if (s.contains("stations")) c.synth.stations = s["stations"].get<int>();
      if (s.contains("noise")) c.synth.noise = s["noise"].get<double>();
      if (s.contains("start")) {
        std::int64_t ts = 0;
        require(data::parse_timestamp(s["start"].get<std::string>(), ts), Errc::InvalidConfig, "bad synth start");
        c.synth.start = ts;
      }
      if (s.contains("load_low")) c.synth.load_low = s["load_low"].get<double>();
      if (s.contains("load_high")) c.synth.load_high = s["load_high"].get<double>();
      if (s.contains("seasonal_amplitude")) c.synth.seasonal_amplitude = s["seasonal_amplitude"].get<double>();
      if (s.contains("diurnal_amplitude")) c.synth.diurnal_amplitude = s["diurnal_amplitude"].get<double>();
      if (s.contains("front_persistence")) c.synth.front_persistence = s["front_persistence"].get<double>();
      if (s.contains("front_sd")) c.synth.front_sd = s["front_sd"].get<double>();
      if (s.contains("heating_slope")) c.synth.heating_slope = s["heating_slope"].get<double>();
    }
    if (j.contains("family")) c.family = nn::parse_family(j["family"].get<std::string>());
    if (j.contains("history")) c.history = j["history"].get<int>();
    if (j.contains("lead")) c.lead = j["lead"].get<int>();
    if (j.contains("train_fraction")) c.train_fraction = j["train_fraction"].get<double>();
    if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
    if (j.contains("attack")) {
      const auto& a = j["attack"];
      if (a.contains("epsilon")) c.attack.epsilon = a["epsilon"].get<double>();
      if (a.contains("norm")) c.attack.norm = attacks::parse_norm(a["norm"].get<std::string>());
      if (a.contains("alpha")) c.attack.alpha = a["alpha"].get<double>();
      if (a.contains("delta")) c.attack.delta = a["delta"].get<double>();
      if (a.contains("iterations")) c.attack.iterations = a["iterations"].get<int>();
      if (a.contains("query_budget")) c.attack.query_budget = a["query_budget"].get<long>();
    }
    if (j.contains("blackbox")) c.blackbox = j["blackbox"].get<bool>();
    if (j.contains("n_adv")) c.n_adv = j["n_adv"].get<int>();
    if (j.contains("sweep_epsilons")) c.sweep_epsilons = j["sweep_epsilons"].get<std::vector<double>>();
    if (j.contains("sweep_stride")) c.sweep_stride = j["sweep_stride"].get<int>();
    if (j.contains("test_days")) c.test_days = j["test_days"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidConfig, std::string("config: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidConfig, path + ": " + e.what());
  }
  ExperimentConfig c;
  apply_json(c, j);
  return c;
}

// ---- data and model ----

struct Prepared {
  data::Dataset data;
  std::size_t split_index = 0;  // first test record
  data::ScalingParams scaling;
  std::vector<data::FeatureWindow> train_windows, test_windows;
};

inline data::Dataset load_dataset(const ExperimentConfig& cfg) {
  if (!cfg.dataset_path.empty()) return data::load_csv(cfg.dataset_path);
  return data::synth_generate(cfg.synth_config()).aggregate;
}

inline Prepared prepare(const ExperimentConfig& cfg, data::Dataset ds) {
  cfg.validate();
  Prepared p;
  const auto [tr, te] = data::split(ds, cfg.train_fraction);
  p.split_index = tr.size();
  p.scaling = data::fit_scaling(tr);
  p.train_windows = data::make_windows(tr, cfg.history, cfg.lead, p.scaling);
  p.test_windows = data::make_windows_for_targets(ds, cfg.history, cfg.lead, p.scaling, p.split_index, ds.size());
  p.data = std::move(ds);
  return p;
}

inline nn::ForecastModel train_model(const ExperimentConfig& cfg, const Prepared& p, nn::TrainReport* report = nullptr) {
  const auto m0 = nn::init_model(cfg.model_config(static_cast<int>(p.data.feature_dim())), p.scaling);
  return nn::train(m0, p.train_windows, cfg.train_config(), report);
}

inline nn::ForecastModel obtain_model(const ExperimentConfig& cfg, const Prepared& p) {
  return cfg.model_path.empty() ? train_model(cfg, p) : nn::load_model(cfg.model_path);
}

// Record indices of the first hour of each whole test day.
inline std::vector<std::size_t> test_day_starts(const Prepared& p, int max_days) {
  std::vector<std::size_t> out;
  std::size_t i = p.split_index;
  while (i < p.data.size() && data::hour_of_day(p.data.records[i].timestamp) != 0) ++i;
  for (; i + ops::kHours <= p.data.size() && static_cast<int>(out.size()) < max_days; i += ops::kHours) out.push_back(i);
  return out;
}

inline std::vector<data::FeatureWindow> day_windows(const ExperimentConfig& cfg, const Prepared& p, std::size_t start) {
  return data::make_windows_for_targets(p.data, cfg.history, cfg.lead, p.scaling, start, start + ops::kHours);
}

// Actual nodal loads for one day (24 x buses).
inline ops::LoadMatrix actual_loads(const grid::GridCase& gc, const Prepared& p, std::size_t start) {
  const Eigen::VectorXd share = gc.share_vector();
  ops::LoadMatrix m(ops::kHours, static_cast<Eigen::Index>(gc.num_buses()));
  for (int t = 0; t < ops::kHours; ++t) m.row(t) = share.transpose() * p.data.records[start + static_cast<std::size_t>(t)].load;
  return m;
}

inline strategy::AttackSurface surface_for(const grid::GridCase& gc, const attacks::Forecaster& f,
                                           const data::ScalingParams& sp, std::vector<data::FeatureWindow> windows) {
  strategy::AttackSurface s;
  s.grid = &gc;
  s.models = {&f};
  s.scaling = {sp};
  s.day_windows = {std::move(windows)};
  for (const auto& l : gc.loads)
    if (l.share > 0.0) s.nodes.push_back({l.bus, l.share, 0});
  return s;
}

// ---- simulation ----

struct PlanRow {
  bool shed = false;
  double shed_mwh = 0.0;
  double cost = 0.0;
  bool schedule_changed = false;
  std::vector<int> nodes;
  std::vector<std::string> directions;
  long queries = 0;
  int shed_hours = 0, generation_limit_hours = 0, ramp_hours = 0, line_hours = 0;
  nlohmann::json plan;
};

struct DayRow {
  std::string date;
  double clean_mape = 0.0;
  double attacked_mape = 0.0;  // aggregate forecast after the topology plan
  bool clean_shed = false;
  double clean_shed_mwh = 0.0;
  double clean_cost = 0.0;
  PlanRow topology, blind;
  std::vector<double> actual_mw, clean_forecast_mw, attacked_forecast_mw;  // system totals per hour
  double seconds = 0.0;
};

inline double mape_of(const std::vector<double>& f, const std::vector<double>& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(f[i] - a[i]) / std::abs(a[i]);
  return a.empty() ? 0.0 : 100.0 * s / static_cast<double>(a.size());
}

inline std::vector<double> row_sums(const ops::LoadMatrix& m) {
  std::vector<double> out;
  for (Eigen::Index t = 0; t < m.rows(); ++t) out.push_back(m.row(t).sum());
  return out;
}

inline PlanRow plan_row(const grid::GridCase& gc, const strategy::AttackPlan& plan, const ops::LoadMatrix& actual,
                        const ops::DayResult& clean_day) {
  const auto out = strategy::evaluate_plan(gc, plan, actual, &clean_day);
  PlanRow r;
  r.shed = out.day.has_shedding();
  r.shed_mwh = out.day.shed_mwh;
  r.cost = out.day.total_cost;
  r.schedule_changed = plan.schedule_changed;
  r.nodes = plan.compromised;
  for (auto d : plan.directions) r.directions.emplace_back(strategy::direction_name(d));
  r.queries = plan.queries;
  r.shed_hours = out.shed_hours;
  r.generation_limit_hours = out.generation_limit_hours;
  r.ramp_hours = out.ramp_hours;
  r.line_hours = out.line_hours;
  r.plan = strategy::to_json(gc, plan);
  return r;
}

inline DayRow simulate_day(const ExperimentConfig& cfg, const grid::GridCase& gc, const Prepared& p,
                           const attacks::Forecaster& model, std::size_t start, std::uint64_t blind_seed) {
  const auto t0 = std::chrono::steady_clock::now();
  DayRow row;
  row.date = data::format_timestamp(p.data.records[start].timestamp).substr(0, 10);
  const auto surface = surface_for(gc, model, p.scaling, day_windows(cfg, p, start));
  const auto actual = actual_loads(gc, p, start);

  strategy::StrategyConfig sc;
  sc.n_adv = cfg.n_adv;
  sc.attack = cfg.attack;
  sc.blackbox = cfg.blackbox;
  const auto clean_f = strategy::clean_forecast(surface);
  const auto clean_sched = ops::solve_uc({&gc, clean_f, std::nullopt}, sc.uc);
  const auto clean_day = ops::dispatch_day(gc, clean_sched, actual);
  row.clean_shed = clean_day.has_shedding();
  row.clean_shed_mwh = clean_day.shed_mwh;
  row.clean_cost = clean_day.total_cost;
  row.actual_mw = row_sums(actual);
  row.clean_forecast_mw = row_sums(clean_f);
  row.clean_mape = mape_of(row.clean_forecast_mw, row.actual_mw);

  sc.knowledge = strategy::Knowledge::Topology;
  const auto topo = strategy::best_first_attack(surface, sc, &clean_sched);
  row.topology = plan_row(gc, topo, actual, clean_day);
  row.attacked_forecast_mw = row_sums(topo.forecast);
  row.attacked_mape = mape_of(row.attacked_forecast_mw, row.actual_mw);

  sc.knowledge = strategy::Knowledge::Blind;
  sc.seed = blind_seed;
  const auto blind = strategy::random_attack(surface, sc, &clean_sched);
  row.blind = plan_row(gc, blind, actual, clean_day);
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

inline nlohmann::json to_json(const PlanRow& r) {
  return {{"shed", r.shed},
          {"shed_mwh", r.shed_mwh},
          {"cost", r.cost},
          {"schedule_changed", r.schedule_changed},
          {"nodes", r.nodes},
          {"directions", r.directions},
          {"queries", r.queries},
          {"shed_hours", r.shed_hours},
          {"generation_limit_hours", r.generation_limit_hours},
          {"ramp_hours", r.ramp_hours},
          {"line_hours", r.line_hours},
          {"plan", r.plan}};
}

inline nlohmann::json to_json(const DayRow& r) {
  return {{"date", r.date},
          {"clean_mape", r.clean_mape},
          {"attacked_mape", r.attacked_mape},
          {"clean_shed", r.clean_shed},
          {"clean_shed_mwh", r.clean_shed_mwh},
          {"clean_cost", r.clean_cost},
          {"topology", to_json(r.topology)},
          {"blind", to_json(r.blind)},
          {"actual_mw", r.actual_mw},
          {"clean_forecast_mw", r.clean_forecast_mw},
          {"attacked_forecast_mw", r.attacked_forecast_mw}};
}

struct RunSummary {
  int days = 0;
  int clean_shed_days = 0;
  int topology_shed_days = 0;
  int blind_shed_days = 0;
  int topology_changed_days = 0;
  double mean_clean_mape = 0.0;
  double mean_attacked_mape = 0.0;
  double topology_shed_mwh = 0.0;
  double blind_shed_mwh = 0.0;
  long queries = 0;
};

inline RunSummary summarize(const std::vector<DayRow>& rows) {
  RunSummary s;
  s.days = static_cast<int>(rows.size());
  for (const auto& r : rows) {
    s.clean_shed_days += r.clean_shed;
    s.topology_shed_days += r.topology.shed;
    s.blind_shed_days += r.blind.shed;
    s.topology_changed_days += r.topology.schedule_changed;
    s.mean_clean_mape += r.clean_mape;
    s.mean_attacked_mape += r.attacked_mape;
    s.topology_shed_mwh += r.topology.shed_mwh;
    s.blind_shed_mwh += r.blind.shed_mwh;
    s.queries += r.topology.queries + r.blind.queries;
  }
  if (s.days > 0) {
    s.mean_clean_mape /= s.days;
    s.mean_attacked_mape /= s.days;
  }
  return s;
}

inline nlohmann::json to_json(const RunSummary& s) {
  return {{"days", s.days},
          {"clean_shed_days", s.clean_shed_days},
          {"topology_shed_days", s.topology_shed_days},
          {"blind_shed_days", s.blind_shed_days},
          {"topology_changed_days", s.topology_changed_days},
          {"mean_clean_mape", s.mean_clean_mape},
          {"mean_attacked_mape", s.mean_attacked_mape},
          {"topology_shed_mwh", s.topology_shed_mwh},
          {"blind_shed_mwh", s.blind_shed_mwh},
          {"queries", s.queries}};
}

inline std::uint64_t blind_seed(const ExperimentConfig& cfg, std::size_t day) {
  return sub_seed(sub_seed(cfg.seed, kBlind), static_cast<std::uint32_t>(day));
}

// One row per test day at the configured epsilon.
inline std::vector<DayRow> simulate_days(const ExperimentConfig& cfg, const grid::GridCase& gc, const Prepared& p,
                                         const attacks::Forecaster& model) {
  std::vector<DayRow> rows;
  const auto starts = test_day_starts(p, cfg.test_days);
  require(!starts.empty(), Errc::InsufficientHistory, "no whole test day after the split");
  for (std::size_t i = 0; i < starts.size(); ++i) rows.push_back(simulate_day(cfg, gc, p, model, starts[i], blind_seed(cfg, i)));
  return rows;
}

struct ShedPoint {
  double epsilon = 0.0;
  int topology_shed_days = 0;
  int blind_shed_days = 0;
  int topology_changed_days = 0;
};

// Shed days against the attack budget, one full simulation per epsilon.
inline std::vector<ShedPoint> shed_curve(const ExperimentConfig& cfg, const grid::GridCase& gc, const Prepared& p,
                                         const attacks::Forecaster& model) {
  std::vector<ShedPoint> out;
  for (double eps : cfg.sweep_epsilons) {
    auto c = cfg;
    c.attack.epsilon = eps;
    const auto sum = summarize(simulate_days(c, gc, p, model));
    out.push_back({eps, sum.topology_shed_days, sum.blind_shed_days, sum.topology_changed_days});
  }
  return out;
}

inline nlohmann::json to_json(const ShedPoint& s) {
  return {{"epsilon", s.epsilon},
          {"topology_shed_days", s.topology_shed_days},
          {"blind_shed_days", s.blind_shed_days},
          {"topology_changed_days", s.topology_changed_days}};
}

// ---- transfer ----

// The attacker's own history: same generator, its own seed, in the target's scaling.
inline std::vector<data::FeatureWindow> substitute_windows(const ExperimentConfig& cfg, const data::ScalingParams& sp) {
  auto sc = cfg.synth_config();
  sc.seed = sub_seed(cfg.seed, kSubstituteData);
  const auto ds = data::synth_generate(sc).aggregate;
  const auto [tr, te] = data::split(ds, cfg.train_fraction);
  return data::make_windows(tr, cfg.history, cfg.lead, sp);
}

inline nn::ForecastModel train_substitute(const ExperimentConfig& cfg, const data::ScalingParams& sp) {
  const auto windows = substitute_windows(cfg, sp);
  const int d = static_cast<int>(windows.front().x.cols());
  const std::uint64_t seed = sub_seed(cfg.seed, kSubstituteModel);
  auto mc = cfg.family == nn::Family::Feedforward ? nn::ModelConfig::feedforward(cfg.history, d, seed)
                                                  : nn::ModelConfig::recurrent(cfg.history, d, seed);
  auto tc = cfg.train_config();
  tc.seed = seed;
  return attacks::train_substitute(windows, mc, sp, tc).model;
}

// ---- attack sweep ----

struct SweepRow {
  double epsilon = 0.0;
  double clean_mape = 0.0;
  double whitebox_mape = 0.0;
  double blackbox_mape = 0.0;
  double lowered_fraction = 0.0;  // windows whose black-box forecast went down
  long blackbox_queries = 0;
  double transfer_mape = NAN;     // NaN without a substitute
  long transfer_crafting_queries = 0;
  long transfer_queries = 0;      // one per window, to record the transferred forecast
};

inline std::vector<double> targets_of(const std::vector<data::FeatureWindow>& ws) {
  std::vector<double> t;
  for (const auto& w : ws) t.push_back(w.target);
  return t;
}

inline std::vector<data::FeatureWindow> strided(const std::vector<data::FeatureWindow>& ws, int stride) {
  std::vector<data::FeatureWindow> out;
  for (std::size_t i = 0; i < ws.size(); i += static_cast<std::size_t>(stride)) out.push_back(ws[i]);
  return out;
}

inline std::vector<SweepRow> attack_sweep(const ExperimentConfig& cfg, const nn::ForecastModel& model,
                                          const std::vector<data::FeatureWindow>& windows,
                                          const nn::ForecastModel* substitute = nullptr) {
  const attacks::ModelForecaster f(model);
  const auto truth = targets_of(windows);
  std::vector<double> clean;
  for (const auto& w : windows) clean.push_back(model.forward(w.x));
  const double clean_mape = nn::metrics_from(model.scaling, clean, truth).mape;
  std::vector<SweepRow> rows;
  for (double eps : cfg.sweep_epsilons) {
    attacks::AttackConfig ac = cfg.attack;
    ac.epsilon = eps;
    ac.gamma = 1;
    SweepRow r;
    r.epsilon = eps;
    r.clean_mape = clean_mape;
    std::vector<double> wb, bb;
    int lowered = 0;
    attacks::QueryHandle q(f);
    for (std::size_t i = 0; i < windows.size(); ++i) {
      wb.push_back(attacks::whitebox_attack(f, windows[i], model.scaling, ac).attacked_forecast);
      const auto b = attacks::blackbox_attack(q, windows[i], model.scaling, ac);
      bb.push_back(b.attacked_forecast);
      lowered += b.attacked_forecast < clean[i] ? 1 : 0;
    }
    r.whitebox_mape = nn::metrics_from(model.scaling, wb, truth).mape;
    r.blackbox_mape = nn::metrics_from(model.scaling, bb, truth).mape;
    r.lowered_fraction = windows.empty() ? 0.0 : static_cast<double>(lowered) / static_cast<double>(windows.size());
    r.blackbox_queries = q.used();
    if (substitute) {
      attacks::QueryHandle target(f);
      std::vector<double> tf;
      for (const auto& w : windows) {
        const long before = target.used();
        const auto adv = attacks::whitebox_attack(*substitute, w, ac);
        r.transfer_crafting_queries += target.used() - before;
        tf.push_back(target.query(adv.adversarial));
      }
      r.transfer_mape = nn::metrics_from(model.scaling, tf, truth).mape;
      r.transfer_queries = target.used();
    }
    rows.push_back(r);
  }
  return rows;
}

inline nlohmann::json to_json(const SweepRow& r) {
  return {{"epsilon", r.epsilon},
          {"clean_mape", r.clean_mape},
          {"whitebox_mape", r.whitebox_mape},
          {"blackbox_mape", r.blackbox_mape},
          {"lowered_fraction", r.lowered_fraction},
          {"blackbox_queries", r.blackbox_queries},
          {"transfer_mape", std::isfinite(r.transfer_mape) ? nlohmann::json(r.transfer_mape) : nlohmann::json()},
          {"transfer_crafting_queries", r.transfer_crafting_queries},
          {"transfer_queries", r.transfer_queries}};
}

// ---- provenance and files ----

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline nlohmann::json provenance(const ExperimentConfig& cfg) {
  return {{"version", kVersion},
          {"config_hash", hex64(fnv1a(to_json(cfg).dump()))},
          {"master_seed", cfg.seed},
          {"seeds",
           {{"data", sub_seed(cfg.seed, kData)},
            {"model", sub_seed(cfg.seed, kModel)},
            {"train", sub_seed(cfg.seed, kTrain)},
            {"blind", sub_seed(cfg.seed, kBlind)},
            {"substitute_data", sub_seed(cfg.seed, kSubstituteData)},
            {"substitute_model", sub_seed(cfg.seed, kSubstituteModel)}}},
          {"compiler", __VERSION__}};
}

// Write to a sibling temp file and rename over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::IoError, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) fail(Errc::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(Errc::IoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace loadattack::experiment
