#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <unistd.h>

#include "ofdmtoa/cli.hpp"
#include "ofdmtoa/config.hpp"
#include "ofdmtoa/errors.hpp"
#include "ofdmtoa/io.hpp"

using namespace ofdmtoa;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = OFDMTOA_CONFIG_DIR;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("ofdmtoa_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

// Runs the CLI with stdout and stderr captured.
int run(const std::vector<std::string>& args, std::string* err = nullptr) {
  std::ostringstream cap, out;
  auto* old = std::cerr.rdbuf(cap.rdbuf());
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  const int rc = run_cli(args);
  std::cerr.rdbuf(old);
  std::cout.rdbuf(old_out);
  if (err) *err = cap.str();
  return rc;
}

json small_grid() {
  return {{"K", 16}, {"delta_f", 15e3}, {"t_a", 4.0 / (16 * 15e3)}, {"pilot_subcarriers", {1, 5, 6, 12}}};
}

json small_mc() {
  return {{"schema_version", 1},
          {"kind", "mc"},
          {"grid", small_grid()},
          {"snr_db", {0, 10}},
          {"modes", {"pilot", "pilot+data", "dd"}},
          {"n_channel", 3},
          {"n_noise", 4},
          {"seed", 7},
          {"write_ccdf", true},
          {"channel", {{"mode", "tapped"}, {"n_taps", 2}, {"rician_k_db", 6.0}, {"rms_delay_s", 50e-9}}}};
}

std::vector<std::string> data_rows(const std::string& csv) {
  std::vector<std::string> rows;
  std::istringstream in(csv);
  std::string line;
  int n = 0;
  while (std::getline(in, line))
    if (n++ >= 2) rows.push_back(line);
  return rows;
}

std::string config_error_path(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("format_number uses 12 significant digits") {
  CHECK(format_number(1.0 / 3.0) == "0.333333333333");
  CHECK(format_number(123456789.123456789) == "123456789.123");
  CHECK(format_number(2.5e-12) == "2.5e-12");
  CHECK(format_number(-4.0) == "-4");
  CHECK(format_number(std::nan("")) == "nan");
  CHECK(format_number(-INFINITY) == "-inf");
}

TEST_CASE("CsvTable") {
  CsvTable t({"abc", 9, "1.2.3"}, {"x", "name"});
  t.add(0.5).add(std::string("a,b"));
  t.end_row();
  CHECK(t.str() == "# config_hash=abc,seed=9,tool_version=1.2.3\nx,name\n0.5,\"a,b\"\n");
  t.add(1.0);
  CHECK_THROWS_AS(t.end_row(), std::logic_error);
}

TEST_CASE("config schema errors name the field") {
  json doc = json::parse(slurp(kConfigs / "pilots8_mc.json"));
  CHECK_NOTHROW(parse_config(doc));

  json d = doc;
  d["grid"].erase("delta_f");
  CHECK(config_error_path(d) == "grid.delta_f");

  d = doc;
  d["grid"]["spacing"] = 1;
  CHECK(config_error_path(d) == "grid.spacing");

  d = doc;
  d["n_trials"] = 10;
  CHECK(config_error_path(d) == "n_trials");

  d = doc;
  d["estimator"]["delta"] = 0.1;
  CHECK(config_error_path(d) == "estimator.delta");

  d = doc;
  d["schema_version"] = 2;
  CHECK(config_error_path(d) == "schema_version");

  d = doc;
  d["snr_db"] = "high";
  CHECK(config_error_path(d) == "snr_db");

  d = doc;
  d["grid"]["pilot_subcarriers"] = {3, 64};
  CHECK(config_error_path(d) == "grid.pilot_subcarriers[1]");

  d = doc;
  d["modes"] = {"pilot", "blind"};
  CHECK(config_error_path(d) == "modes[1]");

  d = doc;
  d["kind"] = "plot";
  CHECK(config_error_path(d) == "kind");

  d = doc;
  d["grid"]["K"] = 63;
  CHECK(config_error_path(d) == "grid");
}

TEST_CASE("grid cell runs and pilot tables") {
  json g = {{"K", 8},
            {"n_sym", 2},
            {"delta_f", 15e3},
            {"t_a", 1e-5},
            {"cells", json::array({json::array({json::array({"pilot", 2}), json::array({"data", 6})}),
                                   json::array({json::array({"empty", 4}), json::array({"pilot", 1}),
                                                json::array({"data", 3})})})},
            {"pilot_table", {{1, 0}, {0, 1}, {-1, 0}}}};
  const auto grid = parse_grid(g);
  CHECK(grid.count(CellState::Pilot) == 3);
  CHECK(grid.count(CellState::Data) == 9);
  CHECK(grid.count(CellState::Empty) == 4);
  CHECK(grid.at(std::size_t{1}).pilot == cdouble(0.0, 1.0));
  CHECK(grid.at(std::size_t{12}).pilot == cdouble(-1.0, 0.0));

  json bad = g;
  bad["cells"][1] = json::array({json::array({"empty", 4}), json::array({"pilot", 1})});
  CHECK_THROWS_AS(parse_grid(bad), ConfigError);
  bad = g;
  bad["pilot_table"] = {{1, 0}};
  CHECK_THROWS_AS(parse_grid(bad), ConfigError);
}

TEST_CASE("layout grid JSON round-trips") {
  const OfdmParams p{240, 4, 240e3, 156.25e-9};
  BlockLayout l;
  l.prs_blocks = {2, 7, 11};
  const auto direct = layout_to_grid(l, p, 3);
  const auto parsed = parse_grid(layout_grid_json(p, l, 3, "qpsk"));
  REQUIRE(parsed.params().cell_count() == direct.params().cell_count());
  for (std::size_t f = 0; f < direct.params().cell_count(); ++f) {
    CHECK(parsed.at(f).state == direct.at(f).state);
    CHECK(parsed.at(f).pilot == direct.at(f).pilot);
  }
}

TEST_CASE("overrides and hashing") {
  const json doc = small_mc();
  const std::string h = config_hash(doc);
  CHECK(h.size() == 16);
  CHECK(config_hash(doc) == h);

  Overrides o;
  o.seed = 11;
  o.z_step = 0.03125;
  o.gh_order = 24;
  const json d = apply_overrides(doc, o);
  CHECK(config_hash(d) != h);
  const auto c = parse_config(d);
  const auto& mc = std::get<McConfig>(c.body);
  CHECK(mc.spec.seed == 11);
  CHECK(mc.spec.zzb.z_step == 0.03125);
  CHECK(mc.spec.zzb.gh_order == 24);
  CHECK(mc.spec.crlb_gh_order == 24);
  CHECK(config_hash(apply_overrides(doc, Overrides{})) == h);
}

TEST_CASE("cli exit codes") {
  TempDir tmp("codes");
  CHECK(run({"frobnicate"}) == kExitUsage);
  CHECK(run({}) == kExitUsage);
  CHECK(run({"--help"}) == kExitOk);
  CHECK(run({"mc", "--config", (tmp.path / "missing.json").string()}) == kExitUsage);
  CHECK(run({"validate", "--config", (kConfigs / "pilots8_mc.json").string()}) == kExitOk);

  json bad = json::parse(slurp(kConfigs / "pilots8_mc.json"));
  bad["grid"].erase("delta_f");
  write(tmp.path / "bad.json", bad);
  std::string err;
  CHECK(run({"validate", "--config", (tmp.path / "bad.json").string()}, &err) == kExitConfig);
  CHECK(err.find("grid.delta_f") != std::string::npos);

  std::ofstream(tmp.path / "syntax.json") << "{\"schema_version\": 1,";
  CHECK(run({"validate", "--config", (tmp.path / "syntax.json").string()}) == kExitConfig);

  // Subcommand must match the config kind.
  CHECK(run({"bounds", "--config", (kConfigs / "pilots8_mc.json").string(), "--out", tmp.path.string()}, &err) ==
        kExitConfig);
  CHECK(err.find("kind") != std::string::npos);
}

TEST_CASE("bounds writes one row per SNR") {
  TempDir tmp("bounds");
  json doc = json::parse(slurp(kConfigs / "alldata_qpsk_bounds.json"));
  doc["snr_db"] = {-10, 0, 7, 20};
  write(tmp.path / "b.json", doc);
  REQUIRE(run({"bounds", "--config", (tmp.path / "b.json").string(), "--out", (tmp.path / "o").string()}) ==
          kExitOk);
  const std::string csv = slurp(tmp.path / "o" / "bounds.csv");
  CHECK(csv.rfind("# config_hash=" + config_hash(doc) + ",seed=0,tool_version=" + tool_version() + "\n", 0) == 0);
  const auto rows = data_rows(csv);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].rfind("-10,nan,", 0) == 0);  // no pilots: pilot CRLB unbounded
  CHECK(rows[3].rfind("20,nan,", 0) == 0);
}

TEST_CASE("mc outputs are deterministic across worker counts") {
  TempDir tmp("mc");
  write(tmp.path / "mc.json", small_mc());
  const std::string cfg = (tmp.path / "mc.json").string();
  REQUIRE(run({"mc", "--config", cfg, "--out", (tmp.path / "a").string(), "--workers", "1"}) == kExitOk);
  REQUIRE(run({"mc", "--config", cfg, "--out", (tmp.path / "b").string(), "--workers", "3"}) == kExitOk);
  for (const char* f : {"sweep.csv", "ccdf_pilot.csv", "ccdf_pilot_plus_data.csv", "ccdf_dd.csv"}) {
    CAPTURE(f);
    const std::string a = slurp(tmp.path / "a" / f);
    CHECK(!a.empty());
    CHECK(a == slurp(tmp.path / "b" / f));
  }
  CHECK(data_rows(slurp(tmp.path / "a" / "sweep.csv")).size() == 6);
  CHECK(!fs::exists(tmp.path / "a" / "ccdf_data.csv"));

  REQUIRE(run({"mc", "--config", cfg, "--out", (tmp.path / "c").string(), "--seed", "8"}) == kExitOk);
  const std::string c = slurp(tmp.path / "c" / "sweep.csv");
  CHECK(c != slurp(tmp.path / "a" / "sweep.csv"));
  CHECK(c.find(",seed=8,") != std::string::npos);
}

TEST_CASE("grid references resolve through best.json") {
  TempDir tmp("ref");
  json search = {{"schema_version", 1},
                 {"kind", "prs-search"},
                 {"ofdm", {{"K", 24}, {"n_sym", 2}, {"delta_f", 15e3}, {"t_a", 8.0 / (24 * 15e3)}}},
                 {"layout", {{"n_blocks", 4}, {"block_size", 6}, {"comb", 2}, {"comb_shift", 1}}},
                 {"n_prs", {1, 2}},
                 {"snr_db", {5}},
                 {"top", 2}};
  write(tmp.path / "search.json", search);
  REQUIRE(run({"prs-search", "--config", (tmp.path / "search.json").string(), "--out",
               (tmp.path / "s").string()}) == kExitOk);
  const json best = json::parse(slurp(tmp.path / "s" / "best.json"));
  REQUIRE(best["best"].size() == 2);
  CHECK(best["config_hash"] == config_hash(search));
  CHECK(data_rows(slurp(tmp.path / "s" / "prs_search.csv")).size() == 4 + 6);

  json est = {{"schema_version", 1}, {"kind", "estimate"}, {"grid", "s/best.json"},
              {"snr_db", {10}},      {"n_noise", 3},       {"modes", {"pilot"}}};
  write(tmp.path / "est.json", est);
  REQUIRE(run({"estimate", "--config", (tmp.path / "est.json").string(), "--out", (tmp.path / "e").string()}) ==
          kExitOk);
  const auto rows = data_rows(slurp(tmp.path / "e" / "estimate.csv"));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].rfind("10,pilot,", 0) == 0);
  CHECK(rows[0].substr(rows[0].rfind(',')) == ",3");

  est["grid"] = "s/nothing.json";
  write(tmp.path / "est2.json", est);
  CHECK(run({"validate", "--config", (tmp.path / "est2.json").string()}) == kExitConfig);
}

TEST_CASE("bundled configs validate") {
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    CAPTURE(entry.path().string());
    CHECK(run({"validate", "--config", entry.path().string()}) == kExitOk);
  }
}
