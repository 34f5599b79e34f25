#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using namespace sqkd;
using namespace sqkd::cli;

struct Overrides {
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> pulses;
  std::optional<std::size_t> pixels;
  std::optional<std::size_t> grid;
  std::optional<std::size_t> workers;
  std::vector<std::string> sweeps;
  std::optional<std::string> mode;
  bool event_log = false;
};

RunConfig resolve(const Overrides& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) cfg = load_config(o.config_path);
  if (o.out) cfg.output_directory = *o.out;
  if (o.seed) cfg.simulation.seed = *o.seed;
  if (o.pulses) cfg.simulation.pulses = *o.pulses;
  if (o.pixels) cfg.detector.pixels = *o.pixels;
  if (o.grid) cfg.numerics.grid = *o.grid;
  if (o.workers) cfg.simulation.workers = *o.workers;
  if (o.mode) cfg.numerics.mode = *o.mode;
  if (o.event_log) cfg.simulation.event_log = true;
  if (!o.sweeps.empty()) {
    cfg.sweeps.clear();
    for (const auto& s : o.sweeps) cfg.sweeps.push_back(parse_sweep(s));
  }
  cfg.validate();
  return cfg;
}

int run(const std::string& command, const Overrides& o) {
  const RunConfig cfg = resolve(o);
  const auto start = std::chrono::steady_clock::now();
  CommandOutput out;
  if (command == "source-info") out = cmd_source_info(cfg);
  else if (command == "witness") out = cmd_witness(cfg);
  else if (command == "keyrate") out = cmd_keyrate(cfg);
  else if (command == "schmidt") out = cmd_schmidt(cfg);
  else if (command == "negativity") out = cmd_negativity(cfg);
  else if (command == "simulate") {
    std::optional<std::ofstream> log;
    if (cfg.simulation.event_log) {
      std::filesystem::create_directories(cfg.output_directory);
      log.emplace(std::filesystem::path(cfg.output_directory) / "events.csv", std::ios::binary);
      if (!*log) throw ParameterError("cannot write event log in '" + cfg.output_directory + "'");
    }
    out = cmd_simulate(cfg, log ? &*log : nullptr);
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_outputs(cfg, out, wall);
  std::cout << out.summary.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial-entanglement QKD model: information, security and Monte Carlo tools", "sqkd-cli"};
  app.set_version_flag("--version", std::string("sqkd ") + SQKD_VERSION);
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config_path, "JSON configuration file (comments allowed)")->check(CLI::ExistingFile);
  app.add_option("--out", o.out, "output directory");
  app.add_option("--seed", o.seed, "Monte Carlo seed");
  app.add_option("--pulses", o.pulses, "Monte Carlo gate count");
  app.add_option("--pixels", o.pixels, "pixels per detector array");
  app.add_option("--grid", o.grid, "points per axis for sampled amplitudes");
  app.add_option("--workers", o.workers, "worker threads");
  app.add_option("--sweep", o.sweeps, "VAR=lo:hi:steps or VAR=v1,v2 (repeatable)");
  app.add_option("--mode", o.mode, "transverse model")->check(CLI::IsMember({"1d", "2d"}));
  app.add_flag("--event-log", o.event_log, "write per-gate records to events.csv (simulate)");

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"source-info", "mutual information of the pure source"},
      {"witness", "EPR witness scan over channel throughput"},
      {"keyrate", "security curve under intercept-resend"},
      {"simulate", "Monte Carlo of the prepare-and-measure protocol"},
      {"schmidt", "Schmidt spectrum of the biphoton state"},
      {"negativity", "log-negativity of the attacked state"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    return run(app.get_subcommands().front()->get_name(), o);
  } catch (const sqkd::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const sqkd::ParameterError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  }
}
