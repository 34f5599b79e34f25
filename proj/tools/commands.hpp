#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "csv.hpp"
#include "sqkd/adversary.hpp"
#include "sqkd/detection.hpp"
#include "sqkd/factorized.hpp"
#include "sqkd/montecarlo.hpp"
#include "sqkd/parallel.hpp"
#include "sqkd/schmidt.hpp"
#include "sqkd/transverse2d.hpp"

#ifndef SQKD_VERSION
#define SQKD_VERSION "0.0.0"
#endif

namespace sqkd::cli {

struct CommandOutput {
  std::string name;
  CsvTable table;
  json summary;
};

/// Sets a sweepable variable on a copy of the configuration.
inline void set_variable(RunConfig& c, const std::string& name, double v) {
  if (name == "pump_waist_mm") c.source.pump_waist_mm = v;
  else if (name == "pump_waist_fwhm_mm") c.source.pump_waist_mm = waist_from_fwhm(v);
  else if (name == "crystal_length_mm") c.source.crystal_length_mm = v;
  else if (name == "wavenumber_per_mm") c.source.wavenumber_per_mm = v;
  else if (name == "collinear_mismatch_per_mm") c.source.collinear_mismatch_per_mm = v;
  else if (name == "pair_probability") c.source.pair_probability = v;
  else if (name == "pixels") {
    require(v >= 1.0 && std::floor(v) == v, "pixels must be a positive integer");
    c.detector.pixels = static_cast<std::size_t>(v);
  } else if (name == "efficiency") c.detector.efficiency = v;
  else if (name == "dark_count") c.detector.dark_count = v;
  else if (name == "coverage") c.detector.coverage = v;
  else if (name == "alice_throughput") c.channel.alice_throughput = v;
  else if (name == "bob_throughput") c.channel.bob_throughput = v;
  else if (name == "loss_db") c.channel.bob_throughput = std::pow(10.0, -v / 10.0);
  else if (name == "lambda") c.attack.ratio = v;
  else throw ParameterError("unknown sweep variable '" + name + "'");
}

struct SweepPoint {
  RunConfig config;
  std::vector<double> values;  ///< one per sweep, in declaration order
};

/// Cartesian product of all sweeps (a single point when there are none).
inline std::vector<SweepPoint> expand_sweeps(const RunConfig& base) {
  std::vector<SweepPoint> points{{base, {}}};
  for (const auto& s : base.sweeps) {
    std::vector<SweepPoint> next;
    for (const auto& p : points)
      for (double v : s.range.values) {
        SweepPoint q = p;
        set_variable(q.config, s.variable, v);
        q.config.validate();
        q.values.push_back(v);
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }
  return points;
}

inline std::vector<std::string> sweep_columns(const RunConfig& c) {
  std::vector<std::string> cols;
  for (const auto& s : c.sweeps) cols.push_back(s.variable);
  return cols;
}

inline std::vector<Cell> sweep_cells(const SweepPoint& p) { return {p.values.begin(), p.values.end()}; }

inline CsvTable make_table(const RunConfig& cfg, const std::string& command, std::vector<std::string> columns) {
  auto cols = sweep_columns(cfg);
  cols.insert(cols.end(), columns.begin(), columns.end());
  CsvTable t(std::move(cols));
  t.add_meta("tool", std::string("sqkd ") + SQKD_VERSION);
  t.add_meta("command", command);
  t.add_meta("config", to_json(cfg).dump());
  t.add_meta("grid", "factorized model, 2^17 phase-matching samples; sampled amplitudes " +
                         std::to_string(cfg.numerics.grid) + " points per axis");
  std::string file = command;
  std::replace(file.begin(), file.end(), '-', '_');
  t.add_meta("wall_time", "recorded in " + file + ".timing.json");
  return t;
}

inline json sweep_json(const SweepPoint& p, const RunConfig& cfg) {
  json j = json::object();
  for (std::size_t i = 0; i < p.values.size(); ++i) j[cfg.sweeps[i].variable] = p.values[i];
  return j;
}

template <class Fn>
auto map_points(const std::vector<SweepPoint>& points, std::size_t workers, Fn&& fn) {
  using R = decltype(fn(points.front()));
  std::vector<std::optional<R>> out(points.size());
  parallel_for(points.size(), workers, [&](std::size_t i) { out[i].emplace(fn(points[i])); });
  std::vector<R> res;
  res.reserve(out.size());
  for (auto& o : out) res.push_back(std::move(*o));
  return res;
}

inline CommandOutput cmd_source_info(const RunConfig& cfg) {
  const bool two_d = cfg.numerics.mode == "2d";
  std::vector<std::string> cols = {"pump_waist_mm", "crystal_length_mm", "mi_momentum", "mi_position", "mi_symmetric",
                                   "mi_cross"};
  if (two_d) cols.insert(cols.end(), {"mi_momentum_2d", "mi_position_2d", "mi_symmetric_2d"});
  CommandOutput out{"source_info", make_table(cfg, "source-info", cols), json::object()};
  const auto points = expand_sweeps(cfg);
  struct Row {
    SourceInformation info;
    std::optional<FullTransverse> full;
  };
  const auto rows = map_points(points, cfg.simulation.workers, [&](const SweepPoint& p) {
    Row r{source_information(p.config.source), std::nullopt};
    if (two_d) r.full = entropies_full_transverse(p.config.source);
    return r;
  });
  json list = json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& s = points[i].config.source;
    const auto& info = rows[i].info;
    auto row = sweep_cells(points[i]);
    row.insert(row.end(), {s.pump_waist_mm, s.crystal_length_mm, info.momentum_mi, info.position_mi, info.symmetric_mi,
                           info.cross_mi});
    json j = {{"sweep", sweep_json(points[i], cfg)},
              {"pump_waist_mm", s.pump_waist_mm},
              {"crystal_length_mm", s.crystal_length_mm},
              {"mi_momentum", info.momentum_mi},
              {"mi_position", info.position_mi},
              {"mi_symmetric", info.symmetric_mi},
              {"mi_cross", info.cross_mi}};
    if (two_d) {
      const auto& f = *rows[i].full;
      const double sym = 0.5 * (f.momentum.mutual_information + f.position.mutual_information);
      row.insert(row.end(), {f.momentum.mutual_information, f.position.mutual_information, sym});
      j["mi_momentum_2d"] = f.momentum.mutual_information;
      j["mi_position_2d"] = f.position.mutual_information;
      j["mi_symmetric_2d"] = sym;
    }
    out.table.add_row(std::move(row));
    list.push_back(j);
  }
  out.summary = {{"command", "source-info"}, {"units", "bits"}, {"mode", cfg.numerics.mode}, {"points", list}};
  return out;
}

inline std::optional<double> reference_threshold(std::size_t pixels) {
  if (pixels == 128) return 0.36;
  if (pixels == 256) return 0.68;
  return std::nullopt;
}

inline CommandOutput cmd_witness(const RunConfig& cfg) {
  CommandOutput out{"witness",
                    make_table(cfg, "witness",
                               {"throughput", "loss_db", "distance_km", "background_fraction", "position_variance_mm2",
                                "momentum_variance_rad2_per_mm2", "product", "satisfied"}),
                    json::object()};
  out.table.add_meta("conditional_variance", "mean conditional variance at pixel centers");
  const auto points = expand_sweeps(cfg);
  const auto scans = map_points(points, cfg.simulation.workers, [&](const SweepPoint& p) {
    const auto src = bin_source(p.config.source, p.config.detector);
    const double pure = pixel_conditional_variance(src.momentum) * pixel_conditional_variance(src.position);
    return std::pair{witness_threshold_scan(src, p.config.source.pair_probability, p.config.detector,
                                            cfg.throughput.values, p.config.channel),
                     pure};
  });
  json list = json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& [scan, pure] = scans[i];
    for (const auto& pt : scan.curve) {
      auto row = sweep_cells(points[i]);
      row.insert(row.end(), {pt.throughput, pt.loss_db, pt.distance_km, pt.background_fraction,
                             pt.witness.position_variance, pt.witness.momentum_variance, pt.witness.product,
                             pt.witness.satisfied});
      out.table.add_row(std::move(row));
    }
    json j = {{"sweep", sweep_json(points[i], cfg)},
              {"pixels", points[i].config.detector.pixels},
              {"pure_state_product", pure}};
    if (scan.threshold) {
      ChannelParams c = points[i].config.channel;
      c.bob_throughput = *scan.threshold;
      j["status"] = "threshold";
      j["threshold"] = *scan.threshold;
      j["threshold_loss_db"] = c.loss_db();
      j["threshold_distance_km"] = c.distance_km();
    } else {
      j["status"] = scan.satisfied_everywhere ? "no threshold (satisfied over the whole range)"
                                              : "no threshold (not crossed in range)";
      j["threshold"] = nullptr;
    }
    if (const auto ref = reference_threshold(points[i].config.detector.pixels)) {
      j["reference_threshold"] = *ref;
      j["reference_tolerance"] = 0.08;
    }
    list.push_back(j);
  }
  out.summary = {{"command", "witness"}, {"points", list}};
  return out;
}

inline CommandOutput cmd_keyrate(const RunConfig& cfg) {
  CommandOutput out{"keyrate",
                    make_table(cfg, "keyrate",
                               {"loss_db", "loss", "lambda_max", "i_ab_min", "i_ae_max", "delta_i_min", "i_ab_momentum",
                                "i_ab_position", "i_ae_momentum", "i_ae_position"}),
                    json::object()};
  out.table.add_meta("units", "bits per accepted event, averaged over the two bases");
  const auto points = expand_sweeps(cfg);
  struct Result {
    SecurityCurve curve;
    KeyRateReport pure;
  };
  const auto results = map_points(points, cfg.simulation.workers, [&](const SweepPoint& p) {
    const auto src = bin_source(p.config.source, p.config.detector);
    const auto k = momentum_joint(p.config.source);
    const auto r = position_joint(p.config.source);
    const double i_ab = 0.5 * (k.mutual_information() + r.mutual_information());
    return Result{security_curve(cfg.loss_db.values, src, p.config.source.pair_probability, p.config.detector),
                  make_key_rate_report(i_ab, 0.0, keyrate_lower_bound(k, r))};
  });
  json list = json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& res = results[i];
    for (const auto& pt : res.curve.points) {
      auto row = sweep_cells(points[i]);
      row.insert(row.end(), {pt.loss_db, pt.loss, pt.lambda_max, pt.i_ab_min, pt.i_ae_max, pt.delta_i_min,
                             pt.i_ab_momentum, pt.i_ab_position, pt.i_ae_momentum, pt.i_ae_position});
      out.table.add_row(std::move(row));
    }
    json j = {{"sweep", sweep_json(points[i], cfg)},
              {"pixels", points[i].config.detector.pixels},
              {"pure_source",
               {{"i_ab", res.pure.i_ab},
                {"i_ae", res.pure.i_ae},
                {"delta_i", res.pure.delta_i},
                {"bound_entropic", res.pure.bound.entropic},
                {"bound_variance", res.pure.bound.variance_based}}}};
    j["crossing_db"] = res.curve.crossing_db ? json(*res.curve.crossing_db) : json(nullptr);
    j["crossing_lambda"] = res.curve.crossing_lambda ? json(*res.curve.crossing_lambda) : json(nullptr);
    if (points[i].config.detector.pixels == 128) {
      j["reference_crossing_db"] = 35.0;
      j["reference_crossing_lambda"] = 0.75;
    }
    list.push_back(j);
  }
  out.summary = {{"command", "keyrate"}, {"points", list}};
  return out;
}

inline SimConfig sim_config(const RunConfig& c) {
  SimConfig s;
  s.pulses = c.simulation.pulses;
  s.seed = c.simulation.seed;
  s.batch_size = c.simulation.batch_size;
  s.workers = c.simulation.workers;
  s.source = c.source;
  s.channel = c.channel;
  s.array = c.detector;
  s.attack = c.attack;
  return s;
}

inline CommandOutput cmd_simulate(const RunConfig& cfg, std::ostream* event_log = nullptr) {
  require(cfg.simulation.pulses >= 1, "simulate needs --pulses >= 1");
  require(cfg.sweeps.empty(), "simulate does not take sweeps");
  CommandOutput out{"simulate",
                    make_table(cfg, "simulate", {"quantity", "empirical", "standard_error", "analytic", "z_score", "pass"}),
                    json::object()};
  out.table.add_meta("rng", rng_algorithm);
  const SimConfig sc = sim_config(cfg);
  const auto src = bin_source(cfg.source, cfg.detector);
  std::vector<EventRecord> events;
  if (event_log) write_event_log_header(*event_log);
  simulate_pulses(sc, [&](const EventRecord& e) {
    events.push_back(e);
    if (event_log) write_event_record(*event_log, e);
  });
  const auto sifted = sift(events, sc.pulses);
  const auto st = estimate_statistics(sifted, src);
  const auto e = event_probabilities(cfg.source.pair_probability, cfg.channel, cfg.detector);
  const double n = static_cast<double>(sc.pulses);

  json rows = json::array();
  bool all_pass = true;
  auto add = [&](const std::string& q, double emp, double se, double ana, double z, bool pass) {
    out.table.add_row({q, emp, se, ana, z, pass});
    rows.push_back({{"quantity", q}, {"empirical", emp}, {"standard_error", se}, {"analytic", ana}, {"z_score", z},
                    {"pass", pass}});
    all_pass = all_pass && pass;
  };
  auto info = [&](const std::string& q, double emp, double ana) {
    out.table.add_row({q, emp, NAN, ana, NAN, std::string("n/a")});
    rows.push_back({{"quantity", q}, {"empirical", emp}, {"analytic", ana}, {"pass", nullptr}});
  };
  auto add_prob = [&](const std::string& q, const Estimate& est, double p) {
    const double se = std::sqrt(p * (1.0 - p) / n);
    const double z = se > 0.0 ? (est.value - p) / se : (est.value == p ? 0.0 : INFINITY);
    add(q, est.value, se, p, z, std::abs(z) <= 4.0);
  };
  add_prob("P1", st.p1, e.p1);
  add_prob("P2", st.p2, e.p2());
  add_prob("P3", st.p3, e.p3);
  {
    const double acc = static_cast<double>(sifted.accepted);
    const double se = acc > 0.0 ? std::sqrt(0.25 / acc) : 0.0;
    const double z = se > 0.0 ? (st.sifted_fraction.value - 0.5) / se : 0.0;
    add("sifted_fraction", st.sifted_fraction.value, se, 0.5, z, std::abs(z) <= 4.0);
  }
  for (const Basis b : {Basis::momentum, Basis::position}) {
    const auto& sig = b == Basis::momentum ? src.momentum : src.position;
    const auto ab = attacked_pixel_joint(sig, e, cfg.attack).alice_bob;
    const auto& bs = b == Basis::momentum ? st.momentum : st.position;
    const std::string name = to_string(b);
    const double mi = discrete_mutual_information(ab);
    info("mi_" + name + "_plugin", bs.mi_plugin, mi);
    add("mi_" + name + "_miller_madow", bs.mi_miller_madow, NAN, mi, NAN, std::abs(bs.mi_miller_madow - mi) <= 0.05);
    if (bs.pairs > 0) {
      const auto gof = chi_square_goodness_of_fit(bs.counts, ab.probabilities);
      add("gof_p_value_" + name, gof.p_value, NAN, 0.01, NAN, gof.passes(0.01));
    }
  }
  {
    const double emp = st.momentum.pair_conditional_variance * st.position.pair_conditional_variance;
    const double ana = pixel_conditional_variance(src.momentum) * pixel_conditional_variance(src.position);
    add("variance_product_pair_events", emp, NAN, ana, NAN, std::abs(emp - ana) <= 0.05 * ana);
  }
  json hiding = nullptr;
  if (cfg.attack.ratio == 0.0 && cfg.simulation.hiding_loss_db > 0.0) {
    const double loss = 1.0 - std::pow(10.0, -cfg.simulation.hiding_loss_db / 10.0);
    const auto h = hiding_test(sc, loss);
    if (h.conclusive) add("hiding_p_value", h.test.p_value, NAN, 0.01, NAN, h.test.passes(0.01));
    else info("hiding_p_value", NAN, 0.01);
    hiding = {{"loss_db", cfg.simulation.hiding_loss_db},
              {"lambda", h.lambda},
              {"background_without_eve", h.background_without_eve.value},
              {"background_with_eve", h.background_with_eve.value},
              {"sifted_without_eve", h.sifted_without_eve},
              {"sifted_with_eve", h.sifted_with_eve},
              {"chi_square", h.test.statistic},
              {"conclusive", h.conclusive},
              {"p_value", h.conclusive ? json(h.test.p_value) : json(nullptr)}};
  }
  out.summary = {{"command", "simulate"},
                 {"rng", rng_algorithm},
                 {"gates", sc.pulses},
                 {"emitted_records", events.size()},
                 {"accepted", sifted.accepted},
                 {"rejected_multi_click", sifted.class_counts[0]},
                 {"sifted", sifted.sifted()},
                 {"comparisons", rows},
                 {"hiding_test", hiding},
                 {"all_pass", all_pass}};
  return out;
}

struct ModeSource {
  std::string model;
  SchmidtDecomposition decomposition;
  std::vector<double> spectrum;  ///< full listing; decomposition keeps the leading modes only
  ModeSet modes;
  std::vector<double> momentum_edges;
  std::vector<double> position_edges;
};

/// Exact SVD on the sampled amplitude when the grid resolves it, otherwise
/// the entropy-matched double-Gaussian model.
inline ModeSource mode_source(const RunConfig& cfg) {
  const std::size_t dim = cfg.numerics.schmidt_dimension;
  DetectorArrayParams eve = cfg.detector;
  if (cfg.attack.eve_pixels > 0) eve.pixels = cfg.attack.eve_pixels;
  if (cfg.numerics.schmidt_model != "gaussian") {
    try {
      const auto amp = build_amplitude(cfg.source, auto_grid(cfg.source, cfg.numerics.grid));
      ModeSource m;
      m.model = "grid";
      m.decomposition = schmidt_decompose(amp, amp.signal_grid.size());
      m.spectrum = m.decomposition.coefficients;
      m.modes = mode_set(m.decomposition, std::min(dim, m.decomposition.coefficients.size()));
      m.momentum_edges = bin_distribution(to_distribution(amp), eve).alice_edges;
      m.position_edges = bin_distribution(to_distribution(to_position_basis(amp)), eve).alice_edges;
      return m;
    } catch (const NumericalError&) {
      if (cfg.numerics.schmidt_model == "grid") throw;
    }
  }
  const auto model = gaussian_schmidt_model(cfg.source);
  ModeSource m;
  m.model = "gaussian";
  m.modes = mode_set(model, dim);
  m.decomposition = schmidt_decompose(model, m.modes.momentum_grid, dim);
  m.spectrum = model.spectrum();
  const auto src = bin_source(cfg.source, eve);
  m.momentum_edges = src.momentum.alice_edges;
  m.position_edges = src.position.alice_edges;
  return m;
}

inline CommandOutput cmd_schmidt(const RunConfig& cfg) {
  require(cfg.sweeps.empty(), "schmidt does not take sweeps");
  CommandOutput out{"schmidt", make_table(cfg, "schmidt", {"mode", "coefficient", "weight", "cumulative_weight"}),
                    json::object()};
  const auto ms = mode_source(cfg);
  const auto& d = ms.decomposition;
  out.table.add_meta("model", ms.model);
  out.table.add_meta("mode_grid", std::to_string(d.signal_grid.size()) + " points");
  double cum = 0.0;
  for (std::size_t i = 0; i < ms.spectrum.size(); ++i) {
    const double w = ms.spectrum[i] * ms.spectrum[i];
    cum += w;
    out.table.add_row({static_cast<long long>(i), ms.spectrum[i], w, cum});
  }
  out.summary = {{"command", "schmidt"},
                 {"model", ms.model},
                 {"entropy_bits", d.entropy},
                 {"schmidt_number", d.schmidt_number},
                 {"concurrence", d.concurrence},
                 {"listed_modes", ms.spectrum.size()},
                 {"listed_weight", cum},
                 {"truncated", d.truncated}};
  if (!d.warning.empty()) out.summary["warning"] = d.warning;
  return out;
}

inline CommandOutput cmd_negativity(const RunConfig& cfg) {
  require(cfg.sweeps.empty(), "negativity does not take sweeps");
  CommandOutput out{"negativity", make_table(cfg, "negativity", {"lambda", "log_negativity", "discarded_weight"}),
                    json::object()};
  const auto ms = mode_source(cfg);
  out.table.add_meta("model", ms.model);
  out.table.add_meta("dimension", std::to_string(ms.modes.dimension()));
  const auto& lambdas = cfg.lambda.values;
  std::vector<NegativityResult> results(lambdas.size());
  parallel_for(lambdas.size(), cfg.simulation.workers, [&](std::size_t i) {
    results[i] = log_negativity(ms.modes, lambdas[i], ms.momentum_edges, ms.position_edges);
  });
  json rows = json::array();
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    out.table.add_row({lambdas[i], results[i].log_negativity, results[i].discarded_weight});
    rows.push_back({{"lambda", lambdas[i]}, {"log_negativity", results[i].log_negativity}});
  }
  out.summary = {{"command", "negativity"},
                 {"model", ms.model},
                 {"dimension", ms.modes.dimension()},
                 {"discarded_weight", ms.modes.discarded_weight},
                 {"pure_state_value", pure_state_log_negativity(ms.modes)},
                 {"points", rows}};
  return out;
}

inline void write_outputs(const RunConfig& cfg, const CommandOutput& out, double wall_seconds) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_directory);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ParameterError("cannot create output directory '" + dir.string() + "': " + ec.message());
  auto open = [&](const std::string& file) {
    std::ofstream os(dir / file, std::ios::binary);
    if (!os) throw ParameterError("cannot write '" + (dir / file).string() + "'");
    return os;
  };
  for (const auto& f : cfg.formats) {
    if (f == "csv") {
      auto os = open(out.name + ".csv");
      out.table.write(os);
    } else {
      json s = out.summary;
      s["tool"] = std::string("sqkd ") + SQKD_VERSION;
      s["config"] = to_json(cfg);
      auto os = open(out.name + ".json");
      os << s.dump(2) << '\n';
    }
  }
  auto os = open(out.name + ".timing.json");
  os << json{{"command", out.name}, {"wall_time_seconds", wall_seconds}}.dump(2) << '\n';
}

}  // namespace sqkd::cli
