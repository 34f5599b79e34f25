#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "commands.hpp"

namespace sqkd::cli {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SQKD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sqkd_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

TEST(Sweep, ParsesRangesAndLists) {
  const auto r = parse_sweep("pump_waist_mm=0.5:2:4");
  EXPECT_EQ(r.variable, "pump_waist_mm");
  ASSERT_EQ(r.range.values.size(), 4u);
  EXPECT_DOUBLE_EQ(r.range.values[1], 1.0);
  EXPECT_DOUBLE_EQ(r.range.values[3], 2.0);
  const auto l = parse_sweep("pixels=64,128");
  EXPECT_EQ(l.range.values, (std::vector<double>{64, 128}));
  for (const char* bad : {"pixels", "=1,2", "x=1:2", "x=1:2:0", "x=2:1:3", "x=a,b", "x=1:2:2.5"})
    EXPECT_THROW(parse_sweep(bad), ParameterError) << bad;
}

TEST(Sweep, CartesianExpansionInOrder) {
  RunConfig c;
  c.sweeps = {parse_sweep("pump_waist_mm=1,2"), parse_sweep("crystal_length_mm=1,5,10")};
  const auto pts = expand_sweeps(c);
  ASSERT_EQ(pts.size(), 6u);
  EXPECT_EQ(pts[0].config.source.pump_waist_mm, 1.0);
  EXPECT_EQ(pts[0].config.source.crystal_length_mm, 1.0);
  EXPECT_EQ(pts[1].config.source.crystal_length_mm, 5.0);
  EXPECT_EQ(pts[5].config.source.pump_waist_mm, 2.0);
  EXPECT_EQ(pts[5].config.source.crystal_length_mm, 10.0);
}

TEST(Sweep, UnknownVariableRejected) {
  RunConfig c;
  EXPECT_THROW(set_variable(c, "temperature", 1.0), ParameterError);
  set_variable(c, "loss_db", 10.0);
  EXPECT_NEAR(c.channel.bob_throughput, 0.1, 1e-15);
}

TEST(Config, UnknownKeysRejected) {
  RunConfig c;
  EXPECT_THROW(apply_json(c, parse_config_text(R"({"detectors": {}})")), ParameterError);
  EXPECT_THROW(apply_json(c, parse_config_text(R"({"detector": {"pixel": 64}})")), ParameterError);
  EXPECT_THROW(apply_json(c, parse_config_text(R"({"detector": {"pixels": "many"}})")), ParameterError);
  EXPECT_THROW(parse_config_text("{"), ParameterError);
}

TEST(Config, WaistAndWavenumberConventions) {
  RunConfig c;
  apply_json(c, parse_config_text(R"({"source": {"pump_waist_fwhm_mm": 2.0, "refractive_index": 1.66}})"));
  EXPECT_NEAR(c.source.pump_waist_mm, 2.0 / std::sqrt(2.0 * std::log(2.0)), 1e-12);
  EXPECT_NEAR(c.source.wavenumber_per_mm, 2.0 * std::numbers::pi * 1.66 / 800e-6, 1e-6);
  EXPECT_THROW(apply_json(c, parse_config_text(R"({"source": {"pump_waist_fwhm_mm": 2, "pump_waist_mm": 1}})")),
               ParameterError);
  EXPECT_THROW(apply_json(c, parse_config_text(R"({"channel": {"bob_throughput": 0.5, "loss_db": 3}})")),
               ParameterError);
}

TEST(Config, CommentsAndRangesAccepted) {
  RunConfig c;
  apply_json(c, parse_config_text(R"({
    // comment
    "scan": {"lambda": [0, 1], /* inline */ "loss_db": {"lo": 0, "hi": 10, "steps": 3}}
  })"));
  EXPECT_EQ(c.lambda.values, (std::vector<double>{0, 1}));
  EXPECT_EQ(c.loss_db.values, (std::vector<double>{0, 5, 10}));
}

TEST(Config, AnnotatedExampleMatchesDefaults) {
  const RunConfig example = load_config(SQKD_EXAMPLE_CONFIG);
  const RunConfig defaults;
  const json a = to_json(example), b = to_json(defaults);
  for (const auto& section : {"detector", "channel", "attack", "simulation", "numerics", "output", "sweeps"})
    EXPECT_EQ(a[section], b[section]) << section;
  for (const auto& [k, v] : b["source"].items()) EXPECT_NEAR(a["source"][k].get<double>(), v.get<double>(), 1e-9) << k;
  for (const auto& [k, v] : b["scan"].items()) {
    ASSERT_EQ(a["scan"][k].size(), v.size());
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(a["scan"][k][i].get<double>(), v[i].get<double>(), 1e-12);
  }
}

TEST(Csv, QuotingAndNumbers) {
  EXPECT_EQ(csv_escape("plain"), "plain");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_escape("two\nlines"), "\"two\nlines\"");
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1e-6), "1e-06");
  EXPECT_EQ(format_number(-INFINITY), "-inf");
  CsvTable t({"name", "value"});
  t.add_meta("k", "v");
  t.add_row({std::string("x,y"), 2.5});
  t.add_row({std::string("z"), 3LL});
  std::ostringstream os;
  t.write(os);
  EXPECT_EQ(os.str(), "# k: v\nname,value\n\"x,y\",2.5\nz,3\n");
}

TEST(Commands, SourceInfoTrends) {
  RunConfig c;
  c.sweeps = {parse_sweep("pump_waist_mm=0.5,1,2,4")};
  const auto w = cmd_source_info(c);
  ASSERT_EQ(w.summary["points"].size(), 4u);
  for (std::size_t i = 1; i < 4; ++i)
    EXPECT_GT(w.summary["points"][i]["mi_symmetric"].get<double>(), w.summary["points"][i - 1]["mi_symmetric"].get<double>());
  c.sweeps = {parse_sweep("crystal_length_mm=1,2,5,10")};
  const auto l = cmd_source_info(c);
  for (std::size_t i = 1; i < 4; ++i)
    EXPECT_LT(l.summary["points"][i]["mi_symmetric"].get<double>(), l.summary["points"][i - 1]["mi_symmetric"].get<double>());
  c.sweeps.clear();
  const auto one = cmd_source_info(c);
  EXPECT_EQ(one.table.rows(), 1u);
  EXPECT_GT(one.summary["points"][0]["mi_momentum"].get<double>(), 0.0);
}

TEST(Commands, WitnessWithoutDarkCounts) {
  RunConfig c;
  c.detector.dark_count = 0.0;
  c.throughput = Range::linear(0.1, 0.9, 9);
  const auto out = cmd_witness(c);
  const std::string status = out.summary["points"][0]["status"].get<std::string>();
  EXPECT_EQ(status.rfind("no threshold", 0), 0u) << status;
}

TEST(Commands, KeyrateLosslessRow) {
  RunConfig c;
  c.loss_db = Range{{0.0, 20.0}};
  const auto out = cmd_keyrate(c);
  ASSERT_EQ(out.table.rows(), 2u);
  EXPECT_EQ(std::get<double>(out.table.row(0).at(out.table.column("lambda_max"))), 0.0);
  EXPECT_GT(std::get<double>(out.table.row(1).at(out.table.column("lambda_max"))), 0.0);
}

TEST(Commands, NegativityEndpoints) {
  RunConfig c;
  c.lambda = Range{{0.0, 1.0}};
  const auto out = cmd_negativity(c);
  const auto& pts = out.summary["points"];
  EXPECT_NEAR(pts[0]["log_negativity"].get<double>(), out.summary["pure_state_value"].get<double>(), 1e-6);
  EXPECT_NEAR(pts[1]["log_negativity"].get<double>(), 0.0, 1e-9);
}

TEST(Commands, SchmidtListingSumsToOne) {
  RunConfig c;
  const auto out = cmd_schmidt(c);
  EXPECT_NEAR(out.summary["listed_weight"].get<double>(), 1.0, 1e-6);
}

TEST(Binary, ExitCodes) {
  const auto out = scratch("exit");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("--version"), 0);
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("--out " + out.string() + " --pulses 0 simulate"), 1);
  EXPECT_EQ(run_cli("--config /nonexistent.json source-info"), 1);
  EXPECT_EQ(run_cli("--out " + out.string() + " --sweep bogus=1,2 source-info"), 1);
  const fs::path cfg = out / "grid.json";
  fs::create_directories(out);
  std::ofstream(cfg) << R"({"numerics": {"schmidt_model": "grid"}})";
  EXPECT_EQ(run_cli("--config " + cfg.string() + " --out " + out.string() + " schmidt"), 2);
}

TEST(Binary, RerunIsByteIdentical) {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  const std::string args = " --pulses 200000 --pixels 32 --seed 9 simulate";
  ASSERT_EQ(run_cli("--out " + a.string() + args), 0);
  ASSERT_EQ(run_cli("--out " + b.string() + args), 0);
  const std::string csv = slurp(a / "simulate.csv");
  EXPECT_FALSE(csv.empty());
  // The output directory is part of the echoed config.
  auto strip = [](std::string s, const std::string& dir) {
    for (auto p = s.find(dir); p != std::string::npos; p = s.find(dir)) s.erase(p, dir.size());
    return s;
  };
  EXPECT_EQ(strip(csv, a.string()), strip(slurp(b / "simulate.csv"), b.string()));
  EXPECT_EQ(strip(slurp(a / "simulate.json"), a.string()), strip(slurp(b / "simulate.json"), b.string()));
  ASSERT_EQ(run_cli("--out " + a.string() + args), 0);
  EXPECT_EQ(slurp(a / "simulate.csv"), csv);
}

TEST(Binary, MetadataHeader) {
  const auto out = scratch("meta");
  ASSERT_EQ(run_cli("--out " + out.string() + " source-info"), 0);
  const std::string csv = slurp(out / "source_info.csv");
  for (const char* key : {"# tool: sqkd ", "# config: {", "# grid: ", "# wall_time: "})
    EXPECT_NE(csv.find(key), std::string::npos) << key;
  EXPECT_TRUE(fs::exists(out / "source_info.timing.json"));
  EXPECT_TRUE(fs::exists(out / "source_info.json"));
}

}  // namespace
}  // namespace sqkd::cli
