// loadattack: data generation, training, attack sweeps, grid simulation and reports.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "loadattack/cli.hpp"

namespace {

using loadattack::experiment::ExperimentConfig;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::string> case_path, dataset, model, family, norm;
  std::optional<int> days, n_adv, synth_days, epochs, stride;
  std::optional<double> epsilon;
  std::optional<bool> blackbox;
  bool no_transfer = false;
  bool no_curve = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file");
  sub->add_option("--seed", f.seed, "master seed");
  sub->add_option("--out", f.out, "output directory")->capture_default_str();
  sub->add_option("--case", f.case_path, "grid case JSON");
  sub->add_option("--dataset", f.dataset, "dataset CSV (default: synthetic)");
  sub->add_option("--model", f.model, "model checkpoint (default: train in process)");
  sub->add_option("--family", f.family, "feedforward or recurrent");
  sub->add_option("--days", f.days, "number of test days");
  sub->add_option("--synth-days", f.synth_days, "days of synthetic data");
  sub->add_option("--epochs", f.epochs, "training epochs");
  sub->add_option("--epsilon", f.epsilon, "attack budget in degrees");
  sub->add_option("--norm", f.norm, "linf, l2 or l1");
  sub->add_option("--n-adv", f.n_adv, "compromised forecasts per day");
  sub->add_option("--blackbox", f.blackbox, "query-only attacker (true/false)");
  sub->add_option("--stride", f.stride, "use every n-th test window in the sweep");
}

ExperimentConfig resolve(const Flags& f) {
  ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : loadattack::experiment::load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.case_path) c.case_path = *f.case_path;
  if (f.dataset) c.dataset_path = *f.dataset;
  if (f.model) c.model_path = *f.model;
  if (f.family) c.family = loadattack::nn::parse_family(*f.family);
  if (f.days) c.test_days = *f.days;
  if (f.synth_days) c.synth.days = *f.synth_days;
  if (f.epochs) c.epochs = *f.epochs;
  if (f.epsilon) c.attack.epsilon = *f.epsilon;
  if (f.norm) c.attack.norm = loadattack::attacks::parse_norm(*f.norm);
  if (f.n_adv) c.n_adv = *f.n_adv;
  if (f.blackbox) c.blackbox = *f.blackbox;
  if (f.stride) c.sweep_stride = *f.stride;
  c.validate();
  return c;
}

int emit_error(const std::string& code, const std::string& message, int status) {
  std::cerr << nlohmann::json{{"error", code}, {"message", message}}.dump() << std::endl;
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial load-forecast attacks and their grid impact"};
  app.require_subcommand(1);
  Flags f;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic weather/load dataset");
  auto* train = app.add_subcommand("train", "train the forecaster and write checkpoint + metrics");
  auto* attack = app.add_subcommand("attack", "MAPE sweep: clean, white-box, black-box, transfer");
  auto* sim = app.add_subcommand("simulate", "day-ahead UC and real-time ED under attack over test days");
  auto* rep = app.add_subcommand("report", "summary and SVG plots from a run directory");
  for (auto* s : {gen, train, attack, sim}) add_common(s, f);
  attack->add_flag("--no-transfer", f.no_transfer, "skip the substitute-model attack");
  sim->add_flag("--no-curve", f.no_curve, "skip the shed-days vs epsilon sweep");
  rep->add_option("--out", f.out, "run directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return emit_error("UsageError", e.what(), 2);
  }

  try {
    nlohmann::json result;
    if (*rep) {
      result = loadattack::cli::cmd_report(f.out);
    } else {
      const auto cfg = resolve(f);
      if (*gen) result = loadattack::cli::cmd_gen_data(cfg, f.out);
      else if (*train) result = loadattack::cli::cmd_train(cfg, f.out);
      else if (*attack) result = loadattack::cli::cmd_attack(cfg, f.out, !f.no_transfer);
      else result = loadattack::cli::cmd_simulate(cfg, f.out, !f.no_curve);
    }
    std::cout << result.dump() << std::endl;
    return 0;
  } catch (const loadattack::Error& e) {
    const std::string what = e.what();
    const std::string name(loadattack::errc_name(e.code()));
    return emit_error(name, what.substr(std::min(what.size(), name.size() + 2)), 1);
  } catch (const std::exception& e) {
    return emit_error("InternalError", e.what(), 1);
  }
}
