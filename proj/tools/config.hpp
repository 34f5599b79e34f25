#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqkd/adversary.hpp"
#include "sqkd/detection.hpp"
#include "sqkd/error.hpp"
#include "sqkd/source.hpp"

namespace sqkd::cli {

using nlohmann::json;

/// Inclusive linear range with `steps` points, or an explicit list.
struct Range {
  std::vector<double> values;

  static Range linear(double lo, double hi, std::size_t steps) {
    require(steps >= 1, "range needs at least one step");
    require(steps == 1 || hi > lo, "range upper bound must exceed the lower bound");
    Range r;
    for (std::size_t i = 0; i < steps; ++i)
      r.values.push_back(steps == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1));
    return r;
  }
};

/// `VAR=lo:hi:steps` or `VAR=v1,v2,...`.
struct Sweep {
  std::string variable;
  Range range;
};

inline double parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParameterError("cannot parse " + what + " '" + s + "' as a number");
  }
}

inline Sweep parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  require(eq != std::string::npos && eq > 0, "sweep must look like VAR=lo:hi:steps or VAR=v1,v2,...");
  Sweep s;
  s.variable = text.substr(0, eq);
  const std::string body = text.substr(eq + 1);
  std::vector<std::string> parts;
  const char sep = body.find(':') != std::string::npos ? ':' : ',';
  std::stringstream ss(body);
  for (std::string item; std::getline(ss, item, sep);) parts.push_back(item);
  if (sep == ':') {
    require(parts.size() == 3, "sweep range must be lo:hi:steps");
    const double steps = parse_number(parts[2], "sweep steps");
    require(steps >= 1 && std::floor(steps) == steps, "sweep steps must be a positive integer");
    s.range = Range::linear(parse_number(parts[0], "sweep bound"), parse_number(parts[1], "sweep bound"),
                            static_cast<std::size_t>(steps));
  } else {
    for (const auto& p : parts) s.range.values.push_back(parse_number(p, "sweep value"));
    require(!s.range.values.empty(), "sweep list is empty");
  }
  return s;
}

inline std::string to_string(const Sweep& s) {
  std::ostringstream os;
  os.precision(10);
  os << s.variable << '=';
  for (std::size_t i = 0; i < s.range.values.size(); ++i) os << (i ? "," : "") << s.range.values[i];
  return os.str();
}

struct SimulationSettings {
  std::uint64_t pulses = 10'000'000;
  std::uint64_t seed = 1;
  std::uint64_t batch_size = std::uint64_t{1} << 16;
  std::size_t workers = 1;
  double hiding_loss_db = 35.0;
  bool event_log = false;
};

struct NumericsSettings {
  std::size_t grid = 1024;  ///< points per axis for sampled amplitudes
  std::string mode = "1d";  ///< 1d or 2d transverse model
  std::size_t schmidt_dimension = 16;
  std::string schmidt_model = "auto";  ///< auto, grid or gaussian
};

struct RunConfig {
  SourceParams source = default_source();
  double refractive_index = default_refractive_index;
  DetectorArrayParams detector;
  ChannelParams channel;
  AttackParams attack;
  SimulationSettings simulation;
  NumericsSettings numerics;
  Range throughput = Range::linear(0.01, 0.99, 99);
  Range loss_db = Range::linear(0.0, 50.0, 26);
  Range lambda = Range::linear(0.0, 1.0, 11);
  std::vector<Sweep> sweeps;
  std::string output_directory = "out";
  std::vector<std::string> formats = {"csv", "json"};

  void validate() const {
    source.validate();
    detector.validate();
    channel.validate();
    attack.validate();
    require(numerics.mode == "1d" || numerics.mode == "2d", "mode must be 1d or 2d");
    require(numerics.schmidt_model == "auto" || numerics.schmidt_model == "grid" ||
                numerics.schmidt_model == "gaussian",
            "schmidt_model must be auto, grid or gaussian");
    require(is_power_of_two(numerics.grid) && numerics.grid >= 64, "grid must be a power of two >= 64");
    require(numerics.schmidt_dimension >= 1, "schmidt_dimension must be positive");
    require(simulation.batch_size >= 1, "batch_size must be positive");
    for (const auto* r : {&throughput, &loss_db, &lambda}) require(!r->values.empty(), "scan ranges must be nonempty");
    for (const auto& s : sweeps) require(!s.range.values.empty(), "sweep ranges must be nonempty");
    for (const auto& f : formats) require(f == "csv" || f == "json", "output formats are csv and json");
  }
};

namespace detail {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config key '") + key + "': " + e.what());
  }
}

inline Range read_range(const json& j) {
  if (j.is_array()) return Range{j.get<std::vector<double>>()};
  require(j.is_object() && j.contains("lo") && j.contains("hi") && j.contains("steps"),
          "ranges are {lo, hi, steps} objects or arrays of values");
  return Range::linear(j["lo"].get<double>(), j["hi"].get<double>(), j["steps"].get<std::size_t>());
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& section) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ParameterError("unknown config key '" + section + "." + k + "'");
  }
}

}  // namespace detail

/// Applies a parsed configuration document on top of `cfg`.
inline void apply_json(RunConfig& cfg, const json& doc) {
  using detail::read;
  require(doc.is_object(), "config document must be an object");
  detail::check_keys(doc, {"source", "detector", "channel", "attack", "simulation", "numerics", "scan", "sweeps", "output"},
                     "");
  try {
    if (doc.contains("source")) {
      const json& s = doc["source"];
      detail::check_keys(s, {"pump_wavelength_nm", "pump_waist_mm", "pump_waist_fwhm_mm", "crystal_length_mm",
                             "wavenumber_per_mm", "refractive_index", "collinear_mismatch_per_mm", "pair_probability"},
                         "source");
      require(!(s.contains("pump_waist_mm") && s.contains("pump_waist_fwhm_mm")),
              "give either source.pump_waist_mm or source.pump_waist_fwhm_mm, not both");
      require(!(s.contains("wavenumber_per_mm") && s.contains("refractive_index")),
              "give either source.wavenumber_per_mm or source.refractive_index, not both");
      read(s, "pump_wavelength_nm", cfg.source.pump_wavelength_nm);
      read(s, "crystal_length_mm", cfg.source.crystal_length_mm);
      read(s, "collinear_mismatch_per_mm", cfg.source.collinear_mismatch_per_mm);
      read(s, "pair_probability", cfg.source.pair_probability);
      read(s, "pump_waist_mm", cfg.source.pump_waist_mm);
      if (s.contains("pump_waist_fwhm_mm")) cfg.source.pump_waist_mm = waist_from_fwhm(s["pump_waist_fwhm_mm"].get<double>());
      if (s.contains("wavenumber_per_mm")) {
        read(s, "wavenumber_per_mm", cfg.source.wavenumber_per_mm);
      } else {
        read(s, "refractive_index", cfg.refractive_index);
        cfg.source.wavenumber_per_mm = degenerate_wavenumber(cfg.source.pump_wavelength_nm, cfg.refractive_index);
      }
    }
    if (doc.contains("detector")) {
      const json& d = doc["detector"];
      detail::check_keys(d, {"pixels", "efficiency", "dark_count", "coverage"}, "detector");
      read(d, "pixels", cfg.detector.pixels);
      read(d, "efficiency", cfg.detector.efficiency);
      read(d, "dark_count", cfg.detector.dark_count);
      read(d, "coverage", cfg.detector.coverage);
    }
    if (doc.contains("channel")) {
      const json& c = doc["channel"];
      detail::check_keys(c, {"alice_throughput", "bob_throughput", "loss_db", "extinction_db_per_km"}, "channel");
      read(c, "alice_throughput", cfg.channel.alice_throughput);
      read(c, "bob_throughput", cfg.channel.bob_throughput);
      read(c, "extinction_db_per_km", cfg.channel.extinction_db_per_km);
      require(!(c.contains("bob_throughput") && c.contains("loss_db")), "give either channel.bob_throughput or channel.loss_db");
      if (c.contains("loss_db")) cfg.channel.bob_throughput = std::pow(10.0, -c["loss_db"].get<double>() / 10.0);
    }
    if (doc.contains("attack")) {
      const json& a = doc["attack"];
      detail::check_keys(a, {"ratio", "eve_pixels"}, "attack");
      read(a, "ratio", cfg.attack.ratio);
      read(a, "eve_pixels", cfg.attack.eve_pixels);
    }
    if (doc.contains("simulation")) {
      const json& s = doc["simulation"];
      detail::check_keys(s, {"pulses", "seed", "batch_size", "workers", "hiding_loss_db", "event_log"}, "simulation");
      if (s.contains("pulses")) {
        const double p = s["pulses"].get<double>();
        require(p >= 0.0 && std::floor(p) == p, "simulation.pulses must be a non-negative integer");
        cfg.simulation.pulses = static_cast<std::uint64_t>(p);
      }
      read(s, "seed", cfg.simulation.seed);
      read(s, "batch_size", cfg.simulation.batch_size);
      read(s, "workers", cfg.simulation.workers);
      read(s, "hiding_loss_db", cfg.simulation.hiding_loss_db);
      read(s, "event_log", cfg.simulation.event_log);
    }
    if (doc.contains("numerics")) {
      const json& n = doc["numerics"];
      detail::check_keys(n, {"grid", "mode", "schmidt_dimension", "schmidt_model"}, "numerics");
      read(n, "grid", cfg.numerics.grid);
      read(n, "mode", cfg.numerics.mode);
      read(n, "schmidt_dimension", cfg.numerics.schmidt_dimension);
      read(n, "schmidt_model", cfg.numerics.schmidt_model);
    }
    if (doc.contains("scan")) {
      const json& s = doc["scan"];
      detail::check_keys(s, {"throughput", "loss_db", "lambda"}, "scan");
      if (s.contains("throughput")) cfg.throughput = detail::read_range(s["throughput"]);
      if (s.contains("loss_db")) cfg.loss_db = detail::read_range(s["loss_db"]);
      if (s.contains("lambda")) cfg.lambda = detail::read_range(s["lambda"]);
    }
    if (doc.contains("sweeps")) {
      cfg.sweeps.clear();
      for (const auto& s : doc["sweeps"]) cfg.sweeps.push_back(parse_sweep(s.get<std::string>()));
    }
    if (doc.contains("output")) {
      const json& o = doc["output"];
      detail::check_keys(o, {"directory", "formats"}, "output");
      read(o, "directory", cfg.output_directory);
      read(o, "formats", cfg.formats);
    }
  } catch (const json::exception& e) {
    throw ParameterError(std::string("malformed config: ") + e.what());
  }
}

/// Parses a JSON document; `//` and `/* */` comments are allowed.
inline json parse_config_text(const std::string& text) {
  try {
    return json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ParameterError(std::string("config parse error: ") + e.what());
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg;
  apply_json(cfg, parse_config_text(ss.str()));
  return cfg;
}

inline json range_json(const Range& r) { return r.values; }

/// Fully resolved configuration, echoed into every output.
inline json to_json(const RunConfig& c) {
  json j;
  j["source"] = {{"pump_wavelength_nm", c.source.pump_wavelength_nm},
                 {"pump_waist_mm", c.source.pump_waist_mm},
                 {"crystal_length_mm", c.source.crystal_length_mm},
                 {"wavenumber_per_mm", c.source.wavenumber_per_mm},
                 {"collinear_mismatch_per_mm", c.source.collinear_mismatch_per_mm},
                 {"pair_probability", c.source.pair_probability}};
  j["detector"] = {{"pixels", c.detector.pixels},
                   {"efficiency", c.detector.efficiency},
                   {"dark_count", c.detector.dark_count},
                   {"coverage", c.detector.coverage}};
  j["channel"] = {{"alice_throughput", c.channel.alice_throughput},
                  {"bob_throughput", c.channel.bob_throughput},
                  {"extinction_db_per_km", c.channel.extinction_db_per_km}};
  j["attack"] = {{"ratio", c.attack.ratio}, {"eve_pixels", c.attack.eve_pixels}};
  j["simulation"] = {{"pulses", c.simulation.pulses},
                     {"seed", c.simulation.seed},
                     {"batch_size", c.simulation.batch_size},
                     {"workers", c.simulation.workers},
                     {"hiding_loss_db", c.simulation.hiding_loss_db},
                     {"event_log", c.simulation.event_log}};
  j["numerics"] = {{"grid", c.numerics.grid},
                   {"mode", c.numerics.mode},
                   {"schmidt_dimension", c.numerics.schmidt_dimension},
                   {"schmidt_model", c.numerics.schmidt_model}};
  j["scan"] = {{"throughput", range_json(c.throughput)}, {"loss_db", range_json(c.loss_db)}, {"lambda", range_json(c.lambda)}};
  json sw = json::array();
  for (const auto& s : c.sweeps) sw.push_back(to_string(s));
  j["sweeps"] = sw;
  j["output"] = {{"directory", c.output_directory}, {"formats", c.formats}};
  return j;
}

}  // namespace sqkd::cli
