#pragma once

// Subcommand bodies behind tools/loadattack. Each writes its artifacts into an
// output directory (atomically) and returns a short JSON summary for stdout.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loadattack/experiment.hpp"
#include "loadattack/report.hpp"

namespace loadattack::cli {

namespace fs = std::filesystem;
using experiment::ExperimentConfig;
using nlohmann::json;

inline constexpr const char* kDataCsv = "data.csv";
inline constexpr const char* kModelFile = "model.json";
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kSweepJson = "attack_sweep.json";
inline constexpr const char* kSweepCsv = "attack_sweep.csv";
inline constexpr const char* kSweepSvg = "attack_sweep.svg";
inline constexpr const char* kDaysFile = "days.jsonl";
inline constexpr const char* kRunReport = "run_report.json";
inline constexpr const char* kShedCurve = "shed_curve.json";
inline constexpr const char* kSummaryJson = "summary.json";
inline constexpr const char* kSummaryText = "summary.md";
inline constexpr const char* kOverlaySvg = "forecast_overlay.svg";
inline constexpr const char* kShedSvg = "shed_days.svg";

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), Errc::IoError, "cannot create output directory " + dir.string());
}

inline void write_json(const fs::path& path, const json& j) { experiment::write_atomic(path, j.dump(2) + "\n"); }

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(Errc::SchemaError, path.string() + ": " + e.what());
  }
}

inline std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::IoError, "cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      fail(Errc::SchemaError, path.string() + ": " + e.what());
    }
  }
  return out;
}

inline std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

// ---- gen-data ----

inline json cmd_gen_data(const ExperimentConfig& cfg, const fs::path& out) {
  cfg.validate();
  ensure_dir(out);
  const auto synth = data::synth_generate(cfg.synth_config());
  std::ostringstream agg;
  data::write_csv(agg, synth.aggregate);
  experiment::write_atomic(out / kDataCsv, agg.str());
  std::vector<std::string> node_files;
  if (synth.nodes.size() > 1) {
    for (std::size_t i = 0; i < synth.nodes.size(); ++i) {
      const std::string name = "node_" + std::to_string(i) + ".csv";
      std::ostringstream os;
      data::write_csv(os, synth.nodes[i]);
      experiment::write_atomic(out / name, os.str());
      node_files.push_back(name);
    }
  }
  json manifest{{"provenance", experiment::provenance(cfg)},
                {"records", synth.aggregate.size()},
                {"stations", cfg.synth.stations},
                {"aggregate", kDataCsv},
                {"nodes", node_files}};
  write_json(out / "gen_data.json", manifest);
  return {{"command", "gen-data"}, {"records", synth.aggregate.size()}, {"path", (out / kDataCsv).string()}};
}

// ---- train ----

inline json cmd_train(const ExperimentConfig& cfg, const fs::path& out) {
  ensure_dir(out);
  const auto p = experiment::prepare(cfg, experiment::load_dataset(cfg));
  nn::TrainReport rep;
  const auto model = experiment::train_model(cfg, p, &rep);
  nn::save_model((out / kModelFile).string(), model);
  const auto train_m = nn::evaluate(model, p.train_windows);
  const auto test_m = nn::evaluate(model, p.test_windows);
  json metrics{{"provenance", experiment::provenance(cfg)},
               {"family", nn::family_name(cfg.family)},
               {"train", {{"mae", train_m.mae}, {"mape", train_m.mape}, {"windows", p.train_windows.size()}}},
               {"test", {{"mae", test_m.mae}, {"mape", test_m.mape}, {"windows", p.test_windows.size()}}},
               {"epoch_loss", rep.epoch_loss}};
  write_json(out / kMetricsFile, metrics);
  return {{"command", "train"}, {"test_mape", test_m.mape}, {"model", (out / kModelFile).string()}};
}

// ---- attack ----

inline std::string sweep_csv(const std::vector<experiment::SweepRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "epsilon,clean_mape,whitebox_mape,blackbox_mape,transfer_mape,lowered_fraction,blackbox_queries,"
        "transfer_crafting_queries,transfer_queries\n";
  for (const auto& r : rows) {
    os << r.epsilon << ',' << r.clean_mape << ',' << r.whitebox_mape << ',' << r.blackbox_mape << ',';
    if (std::isfinite(r.transfer_mape)) os << r.transfer_mape;
    os << ',' << r.lowered_fraction << ',' << r.blackbox_queries << ',' << r.transfer_crafting_queries << ','
       << r.transfer_queries << '\n';
  }
  return os.str();
}

inline std::vector<double> column(const json& rows, const char* key) {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.at(key).is_number() ? r.at(key).get<double>() : NAN);
  return v;
}

inline std::string sweep_svg(const json& rows) {
  std::vector<report::Series> s{{"clean", column(rows, "clean_mape"), "#444444", true},
                                {"white-box", column(rows, "whitebox_mape"), "#1f77b4", false},
                                {"black-box", column(rows, "blackbox_mape"), "#d62728", false}};
  const auto transfer = column(rows, "transfer_mape");
  if (std::any_of(transfer.begin(), transfer.end(), [](double v) { return std::isfinite(v); }))
    s.push_back({"transfer", transfer, "#2ca02c", false});
  return report::line_chart("Forecast MAPE vs attack budget", "epsilon (degrees)", "MAPE (%)", s,
                            column(rows, "epsilon"));
}

inline json cmd_attack(const ExperimentConfig& cfg, const fs::path& out, bool transfer = true) {
  ensure_dir(out);
  const auto p = experiment::prepare(cfg, experiment::load_dataset(cfg));
  const auto model = experiment::obtain_model(cfg, p);
  const auto windows = experiment::strided(p.test_windows, cfg.sweep_stride);
  std::optional<nn::ForecastModel> sub;
  if (transfer) sub = experiment::train_substitute(cfg, p.scaling);
  const auto rows = experiment::attack_sweep(cfg, model, windows, sub ? &*sub : nullptr);
  json jr = json::array();
  for (const auto& r : rows) jr.push_back(experiment::to_json(r));
  write_json(out / kSweepJson, {{"provenance", experiment::provenance(cfg)},
                                {"windows", windows.size()},
                                {"norm", attacks::norm_name(cfg.attack.norm)},
                                {"rows", jr}});
  experiment::write_atomic(out / kSweepCsv, sweep_csv(rows));
  experiment::write_atomic(out / kSweepSvg, sweep_svg(jr));
  return {{"command", "attack"}, {"windows", windows.size()}, {"rows", jr}};
}

// ---- simulate ----

inline json compact(const experiment::PlanRow& r) {
  return {{"shed", r.shed},
          {"shed_mwh", r.shed_mwh},
          {"cost", r.cost},
          {"schedule_changed", r.schedule_changed},
          {"queries", r.queries}};
}

inline json compact(const experiment::DayRow& r) {
  return {{"date", r.date},
          {"clean_shed", r.clean_shed},
          {"clean_shed_mwh", r.clean_shed_mwh},
          {"clean_cost", r.clean_cost},
          {"clean_mape", r.clean_mape},
          {"attacked_mape", r.attacked_mape},
          {"topology", compact(r.topology)},
          {"blind", compact(r.blind)}};
}

inline std::string curve_csv(const std::vector<experiment::ShedPoint>& pts) {
  std::ostringstream os;
  os << "epsilon,topology_shed_days,blind_shed_days,topology_changed_days\n";
  for (const auto& s : pts)
    os << s.epsilon << ',' << s.topology_shed_days << ',' << s.blind_shed_days << ',' << s.topology_changed_days << '\n';
  return os.str();
}

// Runs the configured epsilon, then (if `curve`) every sweep epsilon for the
// shed-days summary, reusing the configured run where the budgets coincide.
inline json cmd_simulate(const ExperimentConfig& cfg, const fs::path& out, bool curve = true) {
  ensure_dir(out);
  const auto gc = grid::parse_case(cfg.case_path);
  const auto p = experiment::prepare(cfg, experiment::load_dataset(cfg));
  const auto model = experiment::obtain_model(cfg, p);
  const attacks::ModelForecaster f(model);
  const auto rows = experiment::simulate_days(cfg, gc, p, f);
  const auto sum = experiment::summarize(rows);

  std::string lines;
  json compact_rows = json::array();
  for (const auto& r : rows) {
    lines += experiment::to_json(r).dump() + "\n";
    compact_rows.push_back(compact(r));
  }
  experiment::write_atomic(out / kDaysFile, lines);
  write_json(out / kRunReport, {{"provenance", experiment::provenance(cfg)},
                                {"config", experiment::to_json(cfg)},
                                {"epsilon", cfg.attack.epsilon},
                                {"rows", compact_rows},
                                {"aggregates", experiment::to_json(sum)}});

  if (curve) {
    std::vector<experiment::ShedPoint> pts;
    for (double eps : cfg.sweep_epsilons) {
      if (eps == cfg.attack.epsilon) {
        pts.push_back({eps, sum.topology_shed_days, sum.blind_shed_days, sum.topology_changed_days});
        continue;
      }
      auto c = cfg;
      c.attack.epsilon = eps;
      const auto s = experiment::summarize(experiment::simulate_days(c, gc, p, f));
      pts.push_back({eps, s.topology_shed_days, s.blind_shed_days, s.topology_changed_days});
    }
    json jp = json::array();
    for (const auto& s : pts) jp.push_back(experiment::to_json(s));
    write_json(out / kShedCurve, {{"provenance", experiment::provenance(cfg)}, {"days", sum.days}, {"points", jp}});
    experiment::write_atomic(out / "shed_curve.csv", curve_csv(pts));
  }
  return {{"command", "simulate"}, {"aggregates", experiment::to_json(sum)}};
}

// ---- report ----

// Aggregates recomputed from per-day JSON records (same rules as summarize()).
inline json aggregates_from_days(const std::vector<json>& days) {
  experiment::RunSummary s;
  s.days = static_cast<int>(days.size());
  for (const auto& d : days) {
    s.clean_shed_days += d.at("clean_shed").get<bool>();
    s.topology_shed_days += d.at("topology").at("shed").get<bool>();
    s.blind_shed_days += d.at("blind").at("shed").get<bool>();
    s.topology_changed_days += d.at("topology").at("schedule_changed").get<bool>();
    s.mean_clean_mape += d.at("clean_mape").get<double>();
    s.mean_attacked_mape += d.at("attacked_mape").get<double>();
    s.topology_shed_mwh += d.at("topology").at("shed_mwh").get<double>();
    s.blind_shed_mwh += d.at("blind").at("shed_mwh").get<double>();
    s.queries += d.at("topology").at("queries").get<long>() + d.at("blind").at("queries").get<long>();
  }
  if (s.days > 0) {
    s.mean_clean_mape /= s.days;
    s.mean_attacked_mape /= s.days;
  }
  return experiment::to_json(s);
}

inline std::vector<double> doubles(const json& j) { return j.get<std::vector<double>>(); }

// Day with the most topology-attack shedding; the first day if none shed.
inline std::size_t overlay_day(const std::vector<json>& days) {
  std::size_t best = 0;
  double most = -1.0;
  for (std::size_t i = 0; i < days.size(); ++i) {
    const double mwh = days[i].at("topology").at("shed_mwh").get<double>();
    if (mwh > most) {
      most = mwh;
      best = i;
    }
  }
  return best;
}

inline std::string overlay_svg(const json& day) {
  std::vector<double> hours;
  for (int h = 0; h < ops::kHours; ++h) hours.push_back(h);
  return report::line_chart("Load forecasts on " + day.at("date").get<std::string>(), "hour", "system load (MW)",
                            {{"actual", doubles(day.at("actual_mw")), "#444444", true},
                             {"clean forecast", doubles(day.at("clean_forecast_mw")), "#1f77b4", false},
                             {"adversarial forecast", doubles(day.at("attacked_forecast_mw")), "#d62728", false}},
                            hours);
}

inline std::string shed_svg(const json& curve, const json& agg) {
  std::vector<std::string> cats;
  std::vector<double> topo, blind;
  if (!curve.is_null()) {
    for (const auto& pt : curve.at("points")) {
      cats.push_back(fmt(pt.at("epsilon").get<double>()));
      topo.push_back(pt.at("topology_shed_days").get<double>());
      blind.push_back(pt.at("blind_shed_days").get<double>());
    }
  } else {
    cats.push_back("configured");
    topo.push_back(agg.at("topology_shed_days").get<double>());
    blind.push_back(agg.at("blind_shed_days").get<double>());
  }
  return report::bar_chart("Days with load shedding", "epsilon (degrees)", "shed days", cats,
                           {{"topology-aware", topo, "#d62728", false}, {"blind", blind, "#7f7f7f", false}});
}

// Pure function of the stored artifacts in `dir`; writes summary and plots next to them.
inline json cmd_report(const fs::path& dir) {
  const bool has_days = fs::exists(dir / kDaysFile);
  const bool has_sweep = fs::exists(dir / kSweepJson);
  const bool has_metrics = fs::exists(dir / kMetricsFile);
  require(has_days || has_sweep || has_metrics, Errc::MissingArtifacts,
          "no " + std::string(kDaysFile) + ", " + kSweepJson + " or " + kMetricsFile + " in " + dir.string());

  json summary = json::object();
  std::string text = "# Run report\n\n";
  std::vector<std::string> written;

  if (has_metrics) {
    const auto m = read_json(dir / kMetricsFile);
    summary["model"] = {{"family", m.at("family")}, {"test_mape", m.at("test").at("mape")}};
    text += "## Forecaster\n\n- family: " + m.at("family").get<std::string>() +
            "\n- test MAPE: " + fmt(m.at("test").at("mape").get<double>()) + " %\n\n";
  }

  if (has_sweep) {
    const auto sw = read_json(dir / kSweepJson);
    const auto& rows = sw.at("rows");
    summary["attack_sweep"] = rows;
    text += "## Attack sweep (" + std::to_string(sw.at("windows").get<long>()) + " windows)\n\n";
    text += "| epsilon | clean | white-box | black-box | transfer |\n|---|---|---|---|---|\n";
    for (const auto& r : rows) {
      const auto& t = r.at("transfer_mape");
      text += "| " + fmt(r.at("epsilon").get<double>()) + " | " + fmt(r.at("clean_mape").get<double>()) + " | " +
              fmt(r.at("whitebox_mape").get<double>()) + " | " + fmt(r.at("blackbox_mape").get<double>()) + " | " +
              (t.is_number() ? fmt(t.get<double>()) : std::string("-")) + " |\n";
    }
    text += "\n";
    experiment::write_atomic(dir / kSweepSvg, sweep_svg(rows));
    written.push_back(kSweepSvg);
  }

  if (has_days) {
    const auto days = read_jsonl(dir / kDaysFile);
    require(!days.empty(), Errc::MissingArtifacts, std::string(kDaysFile) + " has no rows");
    const auto agg = aggregates_from_days(days);
    summary["aggregates"] = agg;
    json curve;
    if (fs::exists(dir / kShedCurve)) {
      curve = read_json(dir / kShedCurve);
      summary["shed_curve"] = curve.at("points");
    }
    text += "## Operations over " + std::to_string(agg.at("days").get<int>()) + " days\n\n";
    text += "- clean shed days: " + std::to_string(agg.at("clean_shed_days").get<int>()) + "\n";
    text += "- topology-aware shed days: " + std::to_string(agg.at("topology_shed_days").get<int>()) + " (" +
            fmt(agg.at("topology_shed_mwh").get<double>()) + " MWh)\n";
    text += "- blind shed days: " + std::to_string(agg.at("blind_shed_days").get<int>()) + " (" +
            fmt(agg.at("blind_shed_mwh").get<double>()) + " MWh)\n";
    text += "- schedule changed: " + std::to_string(agg.at("topology_changed_days").get<int>()) + " days\n";
    text += "- mean MAPE clean / attacked: " + fmt(agg.at("mean_clean_mape").get<double>()) + " % / " +
            fmt(agg.at("mean_attacked_mape").get<double>()) + " %\n\n";
    const auto& d = days[overlay_day(days)];
    experiment::write_atomic(dir / kOverlaySvg, overlay_svg(d));
    experiment::write_atomic(dir / kShedSvg, shed_svg(curve, agg));
    written.push_back(kOverlaySvg);
    written.push_back(kShedSvg);
  }

  summary["plots"] = written;
  write_json(dir / kSummaryJson, summary);
  experiment::write_atomic(dir / kSummaryText, text);
  return {{"command", "report"}, {"plots", written}};
}

}  // namespace loadattack::cli
