#include "ofdmtoa/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ofdmtoa/errors.hpp"

namespace ofdmtoa {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Field access on one JSON object; finish() rejects keys that were never read.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(join(path_, key), "missing required field");
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(join(path_, key), "expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : mark(key, fallback); }

  int integer(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(join(path_, key), "expected an integer");
    const auto x = v.get<std::int64_t>();
    if (x < -(1LL << 31) || x > (1LL << 31) - 1) throw ConfigError(join(path_, key), "integer out of range");
    return static_cast<int>(x);
  }
  int integer(const std::string& key, int fallback) { return has(key) ? integer(key) : mark(key, fallback); }

  std::uint64_t unsigned64(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_unsigned()) throw ConfigError(join(path_, key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  std::uint64_t unsigned64(const std::string& key, std::uint64_t fallback) {
    return has(key) ? unsigned64(key) : mark(key, fallback);
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return mark(key, fallback);
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(join(path_, key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(join(path_, key), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : mark(key, fallback);
  }

  std::vector<double> numbers(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(join(path_, key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number())
        throw ConfigError(join(path_, key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::vector<int> integers(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(join(path_, key), "expected an array of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer())
        throw ConfigError(join(path_, key) + "[" + std::to_string(i) + "]", "expected an integer");
      out.push_back(v[i].get<int>());
    }
    return out;
  }

  std::vector<Mode> modes(const std::string& key, std::vector<Mode> fallback) {
    if (!has(key)) return mark(key, std::move(fallback));
    const json& v = raw(key);
    if (!v.is_array() || v.empty()) throw ConfigError(join(path_, key), "expected a non-empty array of modes");
    std::vector<Mode> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string p = join(path_, key) + "[" + std::to_string(i) + "]";
      if (!v[i].is_string()) throw ConfigError(p, "expected a mode name");
      try {
        out.push_back(parse_mode(v[i].get<std::string>()));
      } catch (const std::exception& e) {
        throw ConfigError(p, e.what());
      }
    }
    return out;
  }

  Reader child(const std::string& key) { return Reader(raw(key), join(path_, key)); }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw ConfigError(join(path_, k), "unknown field");
  }

 private:
  template <class T>
  T mark(const std::string& key, T value) {
    used_.insert(key);
    return value;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

// Runs a library validation and reports its failure against `path`.
template <class F>
void checked(const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path.empty() ? "<root>" : path, e.what());
  }
}

Constellation constellation_field(Reader& r, const std::string& key) {
  const std::string name = r.string(key, "qpsk");
  try {
    return Constellation::by_name(name);
  } catch (const std::exception& e) {
    throw ConfigError(join(r.path(), key), e.what());
  }
}

OfdmParams ofdm_fields(Reader& r) {
  OfdmParams p;
  p.K = r.integer("K");
  p.n_sym = r.integer("n_sym", 1);
  p.delta_f = r.number("delta_f");
  p.t_a = r.number("t_a");
  checked(r.path(), [&] { p.validate(); });
  return p;
}

BlockLayout layout_fields(Reader& r, bool blocks_required) {
  BlockLayout l;
  l.n_blocks = r.integer("n_blocks", l.n_blocks);
  l.block_size = r.integer("block_size", l.block_size);
  l.comb = r.integer("comb", l.comb);
  l.comb_shift = r.integer("comb_shift", l.comb_shift);
  if (blocks_required || r.has("prs_blocks")) l.prs_blocks = r.integers("prs_blocks");
  checked(r.path(), [&] { l.validate(); });
  return l;
}

ZzbSettings zzb_fields(Reader& top) {
  ZzbSettings z;
  if (!top.has("zzb")) return z;
  Reader r = top.child("zzb");
  z.z_step = r.number("z_step", z.z_step);
  z.phi_step = r.number("phi_step", z.phi_step);
  z.gh_order = r.integer("gh_order", z.gh_order);
  z.refine_phi = r.boolean("refine_phi", z.refine_phi);
  z.refine_z = r.boolean("refine_z", z.refine_z);
  z.pmin_jump = r.number("pmin_jump", z.pmin_jump);
  z.integral_tol = r.number("integral_tol", z.integral_tol);
  z.max_bisect_depth = r.integer("max_bisect_depth", z.max_bisect_depth);
  z.max_exact_rows = r.integer("max_exact_rows", z.max_exact_rows);
  r.finish();
  checked(r.path(), [&] { z.validate(); });
  return z;
}

void estimator_fields(Reader& top, double& delta_z, double& delta_phi) {
  if (!top.has("estimator")) return;
  Reader r = top.child("estimator");
  delta_z = r.number("delta_z", delta_z);
  delta_phi = r.number("delta_phi", delta_phi);
  r.finish();
}

MultipathProfile multipath_fields(Reader& r) {
  MultipathProfile m;
  m.n_taps = r.integer("n_taps", m.n_taps);
  m.rician_k_db = r.number("rician_k_db", m.rician_k_db);
  m.rms_delay_s = r.number("rms_delay_s", m.rms_delay_s);
  m.drift_rad = r.number("drift_rad", m.drift_rad);
  checked(r.path(), [&] { m.validate(); });
  return m;
}

std::vector<double> snr_list(Reader& r, const std::string& key = "snr_db") {
  auto v = r.numbers(key);
  if (v.empty()) throw ConfigError(join(r.path(), key), "must not be empty");
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw ConfigError(join(r.path(), key) + "[" + std::to_string(i) + "]", "must be finite");
  return v;
}

BoundsConfig parse_bounds(Reader& r) {
  BoundsConfig c;
  c.grid = parse_grid(r.raw("grid"), &c.constellation);
  c.snr_db = snr_list(r);
  const std::string mode = r.string("zzb_mode", "pilot+data");
  try {
    c.zzb_mode = parse_mode(mode);
  } catch (const std::exception& e) {
    throw ConfigError("zzb_mode", e.what());
  }
  c.crlb_gh_order = r.integer("crlb_gh_order", c.crlb_gh_order);
  if (c.crlb_gh_order < 10) throw ConfigError("crlb_gh_order", "must be >= 10");
  c.zzb = zzb_fields(r);
  return c;
}

ZzbConfig parse_zzb(Reader& r) {
  ZzbConfig c;
  c.grid = parse_grid(r.raw("grid"), &c.constellation);
  c.snr_db = snr_list(r);
  c.modes = r.modes("modes", {Mode::PilotOnly, Mode::DataOnly, Mode::PilotPlusData});
  if (r.has("profile_snr_db")) c.profile_snr_db = r.numbers("profile_snr_db");
  c.zzb = zzb_fields(r);
  return c;
}

void sweep_common(Reader& r, ExperimentSpec& s) {
  s.grid = parse_grid(r.raw("grid"), &s.constellation);
  s.snr_db = snr_list(r);
  s.modes = r.modes("modes", s.modes);
  estimator_fields(r, s.delta_z, s.delta_phi);
  s.n_noise = r.integer("n_noise");
  s.seed = r.unsigned64("seed", s.seed);
  s.zzb = zzb_fields(r);
}

EstimateConfig parse_estimate(Reader& r) {
  EstimateConfig c;
  sweep_common(r, c.spec);
  c.spec.compute_bounds = false;
  c.spec.n_channel = 1;
  checked("", [&] { c.spec.validate(); });
  return c;
}

McConfig parse_mc(Reader& r) {
  McConfig c;
  sweep_common(r, c.spec);
  c.spec.n_channel = r.integer("n_channel", 1);
  c.spec.compute_bounds = r.boolean("compute_bounds", true);
  c.spec.crlb_gh_order = r.integer("crlb_gh_order", c.spec.crlb_gh_order);
  if (c.spec.crlb_gh_order < 10) throw ConfigError("crlb_gh_order", "must be >= 10");
  c.write_ccdf = r.boolean("write_ccdf", false);
  if (r.has("channel")) {
    Reader ch = r.child("channel");
    const std::string mode = ch.string("mode", "flat");
    if (mode == "flat") {
      c.spec.channel = MultipathProfile{};
    } else if (mode == "tapped") {
      c.spec.channel = multipath_fields(ch);
      if (c.spec.channel.n_taps < 1) throw ConfigError("channel.n_taps", "tapped mode needs n_taps >= 1");
    } else {
      throw ConfigError("channel.mode", "expected flat or tapped");
    }
    ch.finish();
  }
  checked("", [&] { c.spec.validate(); });
  return c;
}

PrsSearchConfig parse_prs(Reader& r) {
  PrsSearchConfig c;
  {
    Reader o = r.child("ofdm");
    c.ofdm = ofdm_fields(o);
    o.finish();
  }
  {
    Reader l = r.child("layout");
    c.base = layout_fields(l, false);
    l.finish();
  }
  c.n_prs = r.integers("n_prs");
  if (c.n_prs.empty()) throw ConfigError("n_prs", "must not be empty");
  for (std::size_t i = 0; i < c.n_prs.size(); ++i)
    if (c.n_prs[i] < 1 || c.n_prs[i] > c.base.n_blocks)
      throw ConfigError("n_prs[" + std::to_string(i) + "]", "must be in [1, n_blocks]");
  c.snr_db = snr_list(r);
  c.top = r.integer("top", c.top);
  if (c.top < 0) throw ConfigError("top", "must be >= 0");
  c.constellation = constellation_field(r, "constellation");
  c.pilot_seed = r.unsigned64("pilot_seed", c.pilot_seed);
  c.zzb = zzb_fields(r);
  if (c.ofdm.K != c.base.n_blocks * c.base.block_size)
    throw ConfigError("ofdm.K", "must equal layout.n_blocks * layout.block_size");
  return c;
}

LeoCampaignSpec parse_leo(Reader& r) {
  LeoCampaignSpec s;
  if (r.has("walker")) {
    Reader w = r.child("walker");
    s.walker.altitude_m = w.number("altitude_m", s.walker.altitude_m);
    s.walker.inclination_deg = w.number("inclination_deg", s.walker.inclination_deg);
    s.walker.total = w.integer("total", s.walker.total);
    s.walker.planes = w.integer("planes", s.walker.planes);
    s.walker.phasing = w.integer("phasing", s.walker.phasing);
    w.finish();
    checked(w.path(), [&] { s.walker.validate(); });
  }
  if (r.has("site")) {
    Reader w = r.child("site");
    s.site.lat_deg = w.number("lat_deg", s.site.lat_deg);
    s.site.lon_deg = w.number("lon_deg", s.site.lon_deg);
    s.site.height_m = w.number("height_m", s.site.height_m);
    w.finish();
  }
  s.epoch_s = r.number("epoch_s", s.epoch_s);
  s.mask_deg = r.number("mask_deg", s.mask_deg);
  s.n_sats = r.integer("n_sats", s.n_sats);
  s.burst_interval_s = r.number("burst_interval_s", s.burst_interval_s);
  s.clock_offset_s = r.number("clock_offset_s", s.clock_offset_s);
  if (r.has("ofdm")) {
    Reader o = r.child("ofdm");
    s.ofdm = ofdm_fields(o);
    o.finish();
  }
  if (r.has("layout")) {
    Reader l = r.child("layout");
    s.layout = layout_fields(l, true);
    l.finish();
  }
  s.pilot_seed = r.unsigned64("pilot_seed", s.pilot_seed);
  s.constellation = constellation_field(r, "constellation");
  if (r.has("channel")) {
    Reader ch = r.child("channel");
    if (ch.has("link")) {
      Reader l = ch.child("link");
      auto& lb = s.channel.link;
      lb.eirp_dbw_per_4khz = l.number("eirp_dbw_per_4khz", lb.eirp_dbw_per_4khz);
      lb.rx_gain_db = l.number("rx_gain_db", lb.rx_gain_db);
      lb.carrier_hz = l.number("carrier_hz", lb.carrier_hz);
      lb.noise_dbm_per_hz = l.number("noise_dbm_per_hz", lb.noise_dbm_per_hz);
      lb.extra_loss_db = l.number("extra_loss_db", lb.extra_loss_db);
      l.finish();
      if (!(lb.carrier_hz > 0.0)) throw ConfigError("channel.link.carrier_hz", "must be > 0");
    }
    s.channel.shadowing_db = ch.number("shadowing_db", s.channel.shadowing_db);
    if (ch.has("multipath")) {
      Reader m = ch.child("multipath");
      s.channel.multipath = multipath_fields(m);
      m.finish();
    }
    ch.finish();
  }
  s.modes = r.modes("modes", s.modes);
  estimator_fields(r, s.delta_z, s.delta_phi);
  s.n_channel = r.integer("n_channel", s.n_channel);
  s.n_noise = r.integer("n_noise", s.n_noise);
  s.seed = r.unsigned64("seed", s.seed);
  s.zzb = zzb_fields(r);
  checked("", [&] { s.validate(); });
  return s;
}

}  // namespace

ResourceGrid parse_grid(const json& j, Constellation* constellation) {
  Reader r(j, "grid");
  const OfdmParams p = ofdm_fields(r);
  const Constellation c = constellation_field(r, "constellation");
  if (constellation) *constellation = c;
  const std::uint64_t pilot_seed = r.unsigned64("pilot_seed", 1);

  const int sources = r.has("cells") + r.has("layout") + r.has("pilot_subcarriers");
  if (sources > 1)
    throw ConfigError("grid", "give at most one of cells, layout, pilot_subcarriers");

  ResourceGrid g(p);
  if (r.has("layout")) {
    Reader l = r.child("layout");
    const BlockLayout layout = layout_fields(l, true);
    l.finish();
    checked("grid.layout", [&] { g = layout_to_grid(layout, p, pilot_seed); });
  } else if (r.has("cells")) {
    const json& cells = r.raw("cells");
    if (!cells.is_array() || static_cast<int>(cells.size()) != p.n_sym)
      throw ConfigError("grid.cells", "expected one run-length list per symbol");
    for (int m = 0; m < p.n_sym; ++m) {
      const std::string sp = "grid.cells[" + std::to_string(m) + "]";
      if (!cells[m].is_array()) throw ConfigError(sp, "expected a list of [state, count] runs");
      int k = 0;
      for (std::size_t i = 0; i < cells[m].size(); ++i) {
        const json& run = cells[m][i];
        const std::string rp = sp + "[" + std::to_string(i) + "]";
        if (!run.is_array() || run.size() != 2 || !run[0].is_string() || !run[1].is_number_integer() ||
            run[1].get<int>() < 1)
          throw ConfigError(rp, "expected [\"pilot\"|\"data\"|\"empty\", count >= 1]");
        const std::string state = run[0].get<std::string>();
        if (state != "pilot" && state != "data" && state != "empty")
          throw ConfigError(rp, "unknown cell state '" + state + "'");
        const int n = run[1].get<int>();
        if (k + n > p.K) throw ConfigError(rp, "runs exceed K subcarriers");
        for (int t = 0; t < n; ++t, ++k) {
          if (state == "pilot") g.set_pilot(m, k, {1.0, 0.0});
          if (state == "data") g.set_data(m, k);
        }
      }
      if (k != p.K) throw ConfigError(sp, "runs must cover exactly K subcarriers");
    }
  } else {
    const std::string fill = r.string("fill", "data");
    if (fill != "data" && fill != "empty") throw ConfigError("grid.fill", "expected data or empty");
    std::vector<int> pilots;
    if (r.has("pilot_subcarriers")) pilots = r.integers("pilot_subcarriers");
    for (std::size_t i = 0; i < pilots.size(); ++i)
      if (pilots[i] < 0 || pilots[i] >= p.K)
        throw ConfigError("grid.pilot_subcarriers[" + std::to_string(i) + "]", "out of range");
    for (int m = 0; m < p.n_sym; ++m)
      for (int k = 0; k < p.K; ++k) {
        if (std::find(pilots.begin(), pilots.end(), k) != pilots.end())
          g.set_pilot(m, k, {1.0, 0.0});
        else if (fill == "data")
          g.set_data(m, k);
      }
  }

  // Pilot values: explicit table in flat order, else the seeded QPSK sequence.
  if (!r.has("layout")) {
    const auto seq = qpsk_pilot_sequence(p.cell_count(), pilot_seed);
    std::vector<cdouble> table;
    if (r.has("pilot_table")) {
      const json& t = r.raw("pilot_table");
      if (!t.is_array()) throw ConfigError("grid.pilot_table", "expected a list of [re, im]");
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (!t[i].is_array() || t[i].size() != 2 || !t[i][0].is_number() || !t[i][1].is_number())
          throw ConfigError("grid.pilot_table[" + std::to_string(i) + "]", "expected [re, im]");
        table.emplace_back(t[i][0].get<double>(), t[i][1].get<double>());
      }
      if (table.size() != g.count(CellState::Pilot))
        throw ConfigError("grid.pilot_table", "needs one entry per pilot cell");
    }
    std::size_t n = 0;
    for (std::size_t f = 0; f < p.cell_count(); ++f)
      if (g.at(f).state == CellState::Pilot) {
        const cdouble v = table.empty() ? seq[f] : table[n];
        if (!(std::abs(v) > 0.0)) throw ConfigError("grid.pilot_table", "pilot symbols must be nonzero");
        g.set_pilot(static_cast<int>(f) / p.K, static_cast<int>(f) % p.K, v);
        ++n;
      }
  } else if (r.has("pilot_table")) {
    throw ConfigError("grid.pilot_table", "not supported with layout; use pilot_seed");
  }
  if (g.count(CellState::Pilot) + g.count(CellState::Data) == 0)
    throw ConfigError("grid", "grid has no occupied cells");
  r.finish();
  return g;
}

json layout_grid_json(const OfdmParams& p, const BlockLayout& l, std::uint64_t pilot_seed,
                      const std::string& constellation) {
  return json{{"K", p.K},
              {"n_sym", p.n_sym},
              {"delta_f", p.delta_f},
              {"t_a", p.t_a},
              {"constellation", constellation},
              {"pilot_seed", pilot_seed},
              {"layout",
               {{"n_blocks", l.n_blocks},
                {"block_size", l.block_size},
                {"comb", l.comb},
                {"comb_shift", l.comb_shift},
                {"prs_blocks", l.prs_blocks}}}};
}

json apply_overrides(json doc, const Overrides& o) {
  if (!doc.is_object()) return doc;
  const std::string kind = doc.value("kind", std::string());
  if (o.seed && (kind == "estimate" || kind == "mc" || kind == "leo")) doc["seed"] = *o.seed;
  auto zzb = [&]() -> json& {
    if (!doc.contains("zzb")) doc["zzb"] = json::object();
    return doc["zzb"];
  };
  const bool has_zzb = kind == "bounds" || kind == "zzb" || kind == "mc" || kind == "prs-search" ||
                       kind == "leo" || kind == "estimate";
  if (has_zzb) {
    if (o.z_step) zzb()["z_step"] = *o.z_step;
    if (o.phi_step) zzb()["phi_step"] = *o.phi_step;
    if (o.gh_order) {
      zzb()["gh_order"] = *o.gh_order;
      if (kind == "bounds" || kind == "mc") doc["crlb_gh_order"] = *o.gh_order;
    }
  }
  return doc;
}

Config parse_config(const json& doc) {
  Reader r(doc, "");
  const json& sv = r.raw("schema_version");
  if (!sv.is_number_integer() || sv.get<int>() != kSchemaVersion)
    throw ConfigError("schema_version", "unsupported schema version (expected " +
                                            std::to_string(kSchemaVersion) + ")");
  Config c;
  c.kind = r.string("kind");
  if (c.kind == "bounds") {
    c.body = parse_bounds(r);
  } else if (c.kind == "zzb") {
    c.body = parse_zzb(r);
  } else if (c.kind == "estimate") {
    auto e = parse_estimate(r);
    c.seed = e.spec.seed;
    c.body = std::move(e);
  } else if (c.kind == "mc") {
    auto m = parse_mc(r);
    c.seed = m.spec.seed;
    c.body = std::move(m);
  } else if (c.kind == "prs-search") {
    c.body = parse_prs(r);
  } else if (c.kind == "leo") {
    auto l = parse_leo(r);
    c.seed = l.seed;
    c.body = std::move(l);
  } else {
    throw ConfigError("kind", "unknown kind '" + c.kind +
                                  "' (expected bounds, zzb, estimate, mc, prs-search or leo)");
  }
  if (r.has("description")) r.string("description");
  r.finish();
  return c;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
}

std::string config_hash(const json& doc) {
  const std::string s = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ofdmtoa
