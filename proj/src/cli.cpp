#include "ofdmtoa/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include "ofdmtoa/bounds.hpp"
#include "ofdmtoa/config.hpp"
#include "ofdmtoa/errors.hpp"
#include "ofdmtoa/io.hpp"
#include "ofdmtoa/parallel.hpp"

#ifndef OFDMTOA_VERSION
#define OFDMTOA_VERSION "0.0.0"
#endif

namespace ofdmtoa {

namespace fs = std::filesystem;
using nlohmann::json;

const char* tool_version() { return OFDMTOA_VERSION; }

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  int workers = 1;
  Overrides overrides;
};

struct Context {
  Config config;
  RunStamp stamp;
  fs::path out;
  int workers = 1;
};

std::string file_mode(Mode m) {
  switch (m) {
    case Mode::PilotOnly: return "pilot";
    case Mode::DataOnly: return "data";
    case Mode::PilotPlusData: return "pilot_plus_data";
    case Mode::DecisionDirected: return "dd";
  }
  return "unknown";
}

json stamp_json(const RunStamp& s) {
  return json{{"config_hash", s.config_hash}, {"seed", s.seed}, {"tool_version", s.tool_version}};
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path.string(), j.dump(2) + "\n"); }

// Replaces a "grid" given as a file path (relative to the config) by that file's grid object.
// A prs-search best.json contributes its first entry.
json resolve_grid_reference(json doc, const fs::path& config_dir) {
  if (!doc.is_object() || !doc.contains("grid") || !doc["grid"].is_string()) return doc;
  fs::path ref = doc["grid"].get<std::string>();
  if (ref.is_relative()) ref = config_dir / ref;
  json g;
  try {
    g = read_json_file(ref.string());
  } catch (const ConfigError& e) {
    throw ConfigError("grid", e.what());
  }
  if (g.is_object() && g.contains("best")) {
    if (!g["best"].is_array() || g["best"].empty() || !g["best"][0].contains("grid"))
      throw ConfigError("grid", "referenced file has no best layout");
    g = g["best"][0]["grid"];
  }
  doc["grid"] = g;
  return doc;
}

Context load(const Options& o) {
  const json raw = read_json_file(o.config);
  json doc = resolve_grid_reference(raw, fs::path(o.config).parent_path());
  doc = apply_overrides(std::move(doc), o.overrides);
  Context c;
  c.config = parse_config(doc);
  c.stamp = {config_hash(doc), c.config.seed, tool_version()};
  c.out = o.out;
  c.workers = o.workers;
  return c;
}

void prepare_out(const Context& c) {
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + c.out.string() + ": " + ec.message());
}

template <class F>
double or_nan(F&& f) {
  try {
    return f();
  } catch (const UnboundedVarianceError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

void run_bounds(const Context& c) {
  const auto& b = std::get<BoundsConfig>(c.config.body);
  struct Row {
    double pilot, mcrlb, data, zzb;
    std::vector<std::string> warnings;
  };
  std::vector<Row> rows(b.snr_db.size());
  const bool has_data = b.grid.count(CellState::Data) > 0;
  auto table = has_data ? std::make_shared<MomentTable>(b.constellation, b.zzb.gh_order) : nullptr;
  parallel_for(rows.size(), c.workers, [&](std::size_t i) {
    const auto chan = make_flat_channel(b.grid, 1.0, {0.0, 0.0}, 1.0 / db_to_linear(b.snr_db[i]));
    Row& r = rows[i];
    r.pilot = or_nan([&] { return crlb_pilot(b.grid, chan).rmse_m; });
    r.mcrlb = or_nan([&] { return crlb_mcrlb(b.grid, chan).rmse_m; });
    r.data = or_nan([&] {
      auto res = crlb_data_exact(b.grid, chan, b.constellation, b.crlb_gh_order);
      r.warnings = res.warnings;
      return res.rmse_m;
    });
    r.zzb = zzb_variance(b.grid, chan, b.constellation, b.zzb_mode, b.zzb, table).rmse_m;
  });
  CsvTable csv(c.stamp, {"snr_db", "crlb_pilot_m", "mcrlb_m", "crlb_data_m", "zzb_m"});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& w : rows[i].warnings)
      std::cerr << "warning: " << format_number(b.snr_db[i]) << " dB: " << w << "\n";
    csv.add(b.snr_db[i]).add(rows[i].pilot).add(rows[i].mcrlb).add(rows[i].data).add(rows[i].zzb);
    csv.end_row();
  }
  write_file_atomic((c.out / "bounds.csv").string(), csv.str());
}

void run_zzb(const Context& c) {
  const auto& z = std::get<ZzbConfig>(c.config.body);
  std::vector<double> snrs = z.snr_db;
  for (double s : z.profile_snr_db)
    if (std::find(snrs.begin(), snrs.end(), s) == snrs.end()) snrs.push_back(s);
  const std::size_t nm = z.modes.size();
  std::vector<ZzbResult> res(snrs.size() * nm);
  const bool has_data = z.grid.count(CellState::Data) > 0;
  auto table = has_data ? std::make_shared<MomentTable>(z.constellation, z.zzb.gh_order) : nullptr;
  parallel_for(res.size(), c.workers, [&](std::size_t i) {
    const auto chan = make_flat_channel(z.grid, 1.0, {0.0, 0.0}, 1.0 / db_to_linear(snrs[i / nm]));
    res[i] = zzb_variance(z.grid, chan, z.constellation, z.modes[i % nm], z.zzb, table);
  });
  CsvTable csv(c.stamp, {"snr_db", "mode", "zzb_rmse_m"});
  for (std::size_t s = 0; s < z.snr_db.size(); ++s)
    for (std::size_t m = 0; m < nm; ++m) {
      csv.add(snrs[s]).add(to_string(z.modes[m])).add(res[s * nm + m].rmse_m);
      csv.end_row();
    }
  write_file_atomic((c.out / "zzb.csv").string(), csv.str());
  if (z.profile_snr_db.empty()) return;
  CsvTable prof(c.stamp, {"snr_db", "mode", "z1", "max_phi_pmin"});
  for (double p : z.profile_snr_db) {
    const std::size_t s = static_cast<std::size_t>(std::find(snrs.begin(), snrs.end(), p) - snrs.begin());
    for (std::size_t m = 0; m < nm; ++m) {
      const auto& r = res[s * nm + m];
      for (std::size_t i = 0; i < r.z.size(); ++i) {
        prof.add(p).add(to_string(z.modes[m])).add(r.z[i]).add(r.pmin[i]);
        prof.end_row();
      }
    }
  }
  write_file_atomic((c.out / "zzb_profile.csv").string(), prof.str());
}

void run_estimate(const Context& c) {
  ExperimentSpec spec = std::get<EstimateConfig>(c.config.body).spec;
  spec.workers = c.workers;
  const auto r = run_sweep(spec);
  CsvTable csv(c.stamp, {"snr_db", "mode", "rmse_m", "mean_bias_m", "trials"});
  for (const auto& pt : r.points)
    for (const auto& m : pt.modes) {
      csv.add(pt.snr_db).add(to_string(m.mode)).add(m.rmse_m).add(m.bias_m).add(std::uint64_t{m.trials});
      csv.end_row();
    }
  write_file_atomic((c.out / "estimate.csv").string(), csv.str());
}

void run_mc(const Context& c) {
  const auto& mc = std::get<McConfig>(c.config.body);
  ExperimentSpec spec = mc.spec;
  spec.workers = c.workers;
  const auto r = run_sweep(spec);
  CsvTable csv(c.stamp, {"snr_db", "mode", "rmse_m", "rmse_se_m", "bias_m", "trials", "failures", "zzb_m",
                         "crlb_pilot_m", "mcrlb_m", "crlb_data_m"});
  for (const auto& pt : r.points)
    for (const auto& m : pt.modes) {
      csv.add(pt.snr_db).add(to_string(m.mode)).add(m.rmse_m).add(m.rmse_se_m).add(m.bias_m);
      csv.add(std::uint64_t{m.trials}).add(std::uint64_t{m.failures}).add(m.zzb_m);
      csv.add(pt.crlb_pilot_m).add(pt.mcrlb_m).add(pt.crlb_data_m);
      csv.end_row();
    }
  write_file_atomic((c.out / "sweep.csv").string(), csv.str());
  if (!mc.write_ccdf) return;
  for (Mode mode : spec.modes) {
    CsvTable cc(c.stamp, {"snr_db", "rmse_m", "exceed"});
    for (double snr : spec.snr_db) {
      std::vector<double> v;
      for (const auto& rs : r.realizations)
        if (rs.mode == mode && rs.snr_db == snr && !std::isnan(rs.rmse_m)) v.push_back(rs.rmse_m);
      if (v.empty()) continue;
      const auto cd = ccdf(v);
      for (std::size_t i = 0; i < cd.x.size(); ++i) {
        cc.add(snr).add(cd.x[i]).add(cd.exceed[i]);
        cc.end_row();
      }
    }
    write_file_atomic((c.out / ("ccdf_" + file_mode(mode) + ".csv")).string(), cc.str());
  }
}

std::string block_list(const std::vector<int>& blocks) {
  std::string s;
  for (std::size_t i = 0; i < blocks.size(); ++i) s += (i ? " " : "") + std::to_string(blocks[i]);
  return s;
}

void run_prs(const Context& c) {
  const auto& p = std::get<PrsSearchConfig>(c.config.body);
  CsvTable csv(c.stamp, {"snr_db", "n_prs", "rank", "bitmask", "prs_blocks", "pilot_zzb_m",
                         "pilot_plus_data_zzb_m"});
  json best = json::array();
  for (double snr : p.snr_db)
    for (int n : p.n_prs) {
      AllocationSearch s;
      s.base = p.base;
      s.n_prs = n;
      s.snr_db = snr;
      s.top = p.top;
      s.zzb = p.zzb;
      s.constellation = p.constellation;
      s.workers = c.workers;
      s.pilot_seed = p.pilot_seed;
      const auto res = search_allocations(p.ofdm, s);
      for (std::size_t i = 0; i < res.size(); ++i) {
        csv.add(snr).add(std::uint64_t{static_cast<std::uint64_t>(n)}).add(std::uint64_t{i + 1});
        csv.add(res[i].layout.bitmask()).add(block_list(res[i].layout.prs_blocks));
        csv.add(res[i].pilot_zzb_m).add(res[i].pilot_plus_data_zzb_m);
        csv.end_row();
      }
      best.push_back({{"snr_db", snr},
                      {"n_prs", n},
                      {"pilot_zzb_m", res[0].pilot_zzb_m},
                      {"pilot_plus_data_zzb_m", res[0].pilot_plus_data_zzb_m},
                      {"grid", layout_grid_json(p.ofdm, res[0].layout, p.pilot_seed, p.constellation.name())}});
    }
  write_file_atomic((c.out / "prs_search.csv").string(), csv.str());
  json doc = stamp_json(c.stamp);
  doc["best"] = best;
  write_json(c.out / "best.json", doc);
}

std::vector<double> finite(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v)
    if (std::isfinite(x)) out.push_back(x);
  return out;
}

json ellipse_json(const Ellipse& e) {
  return json{{"semi_major_m", e.semi_major_m},
              {"semi_minor_m", e.semi_minor_m},
              {"orientation_rad", e.orientation_rad}};
}

void write_leo_ccdf(const Context& c, const std::string& name, const std::vector<double>& emp,
                    const std::vector<double>& zzb) {
  CsvTable csv(c.stamp, {"source", "rmse_m", "exceed"});
  for (const auto& [label, values] : {std::pair{"empirical", &emp}, std::pair{"zzb", &zzb}}) {
    const auto v = finite(*values);
    if (v.empty()) continue;
    const auto cd = ccdf(v);
    for (std::size_t i = 0; i < cd.x.size(); ++i) {
      csv.add(std::string(label)).add(cd.x[i]).add(cd.exceed[i]);
      csv.end_row();
    }
  }
  write_file_atomic((c.out / name).string(), csv.str());
}

void run_leo(const Context& c) {
  LeoCampaignSpec spec = std::get<LeoCampaignSpec>(c.config.body);
  spec.workers = c.workers;
  const auto r = leo_campaign(spec);
  json run = stamp_json(c.stamp);
  json sats = json::array();
  for (std::size_t i = 0; i < r.satellites.size(); ++i)
    sats.push_back({{"index", r.satellites[i]},
                    {"elevation_deg", r.elevation_deg[i]},
                    {"mean_snr_db", r.mean_snr_db[i]}});
  run["satellites"] = sats;
  json modes = json::array();
  auto p90 = [](const std::vector<double>& v) {
    const auto f = finite(v);
    return f.empty() ? json(nullptr) : json(percentile(f, 0.9));
  };
  for (const auto& m : r.modes) {
    const std::string fm = file_mode(m.mode);
    write_leo_ccdf(c, "ccdf_horizontal_" + fm + ".csv", m.horizontal_rmse_m, m.zzb_horizontal_m);
    write_leo_ccdf(c, "ccdf_vertical_" + fm + ".csv", m.vertical_rmse_m, m.zzb_vertical_m);
    json e = stamp_json(c.stamp);
    e["mode"] = to_string(m.mode);
    e["center_m"] = {m.center_e_m, m.center_n_m};
    e["empirical"] = ellipse_json(m.empirical);
    e["zzb"] = ellipse_json(m.predicted);
    e["confidence"] = 0.95;
    write_json(c.out / ("ellipse_" + fm + ".json"), e);
    modes.push_back({{"mode", to_string(m.mode)},
                     {"horizontal_p90_m", p90(m.horizontal_rmse_m)},
                     {"vertical_p90_m", p90(m.vertical_rmse_m)},
                     {"zzb_horizontal_p90_m", p90(m.zzb_horizontal_m)},
                     {"zzb_vertical_p90_m", p90(m.zzb_vertical_m)},
                     {"failures", m.failures}});
  }
  run["modes"] = modes;
  run["n_channel"] = spec.n_channel;
  run["n_noise"] = spec.n_noise;
  write_json(c.out / "leo_run.json", run);
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"TOA bounds, estimators and LEO positioning experiments for OFDM signals", "ofdmtoa"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);
  Options o;
  std::optional<std::uint64_t> seed;
  std::optional<double> zstep, phistep;
  std::optional<int> gh;

  auto add_common = [&](CLI::App* sub, bool run_flags) {
    sub->add_option("--config", o.config, "Config JSON")->required()->check(CLI::ExistingFile);
    if (!run_flags) return;
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Master seed override");
    sub->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--zstep", zstep, "ZZB z1 grid step [samples]")->check(CLI::PositiveNumber);
    sub->add_option("--phistep", phistep, "ZZB phi1 grid step [rad]")->check(CLI::PositiveNumber);
    sub->add_option("--gh-order", gh, "Gauss-Hermite order (ZZB and data CRLB)")->check(CLI::PositiveNumber);
  };
  const std::map<std::string, void (*)(const Context&)> runners{
      {"bounds", run_bounds}, {"zzb", run_zzb},           {"estimate", run_estimate},
      {"mc", run_mc},         {"prs-search", run_prs},     {"leo", run_leo}};
  const std::map<std::string, std::string> help{
      {"bounds", "CRLB, MCRLB, data CRLB and ZZB over an SNR sweep"},
      {"zzb", "ZZB per mode, optional max-phase Pmin profiles"},
      {"estimate", "ML estimator RMSE on a flat channel"},
      {"mc", "Monte Carlo sweep with bounds and per-realization CCDFs"},
      {"prs-search", "Exhaustive PRS block allocation search"},
      {"leo", "LEO pseudorange positioning campaign"}};
  for (const auto& [name, text] : help) add_common(app.add_subcommand(name, text), true);
  add_common(app.add_subcommand("validate", "Check a config against the schema"), false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  o.overrides = {seed, zstep, phistep, gh};
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    Context c = load(o);
    if (sub == "validate") {
      std::cout << "ok kind=" << c.config.kind << " config_hash=" << c.stamp.config_hash << "\n";
      return kExitOk;
    }
    if (c.config.kind != sub)
      throw ConfigError("kind", "config kind '" + c.config.kind + "' does not match subcommand '" + sub + "'");
    prepare_out(c);
    runners.at(sub)(c);
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParameterError& e) {
    std::cerr << "invalid parameter: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"ofdmtoa"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace ofdmtoa
