#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ofdmtoa/alloc.hpp"
#include "ofdmtoa/leo.hpp"
#include "ofdmtoa/montecarlo.hpp"

namespace ofdmtoa {

constexpr int kSchemaVersion = 1;

struct BoundsConfig {
  ResourceGrid grid{OfdmParams{}};
  Constellation constellation = Constellation::qpsk();
  std::vector<double> snr_db;
  Mode zzb_mode = Mode::PilotPlusData;
  ZzbSettings zzb;
  int crlb_gh_order = 30;
};

struct ZzbConfig {
  ResourceGrid grid{OfdmParams{}};
  Constellation constellation = Constellation::qpsk();
  std::vector<double> snr_db;
  std::vector<Mode> modes;
  ZzbSettings zzb;
  std::vector<double> profile_snr_db;  ///< SNRs that also get a (z1, max Pmin) profile
};

struct EstimateConfig {
  ExperimentSpec spec;  ///< flat channel, one realization, no bounds
};

struct McConfig {
  ExperimentSpec spec;
  bool write_ccdf = false;
};

struct PrsSearchConfig {
  OfdmParams ofdm;
  BlockLayout base;
  std::vector<int> n_prs;
  std::vector<double> snr_db;
  int top = 10;
  ZzbSettings zzb;
  Constellation constellation = Constellation::qpsk();
  std::uint64_t pilot_seed = 1;
};

using ConfigBody =
    std::variant<BoundsConfig, ZzbConfig, EstimateConfig, McConfig, PrsSearchConfig, LeoCampaignSpec>;

struct Config {
  std::string kind;   ///< bounds | zzb | estimate | mc | prs-search | leo
  std::uint64_t seed = 0;
  ConfigBody body;
};

/// Command-line overrides folded into the document before parsing and hashing.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> z_step;
  std::optional<double> phi_step;
  std::optional<int> gh_order;
};

/// Applies overrides to a raw document; fields land where the document's kind reads them.
nlohmann::json apply_overrides(nlohmann::json doc, const Overrides& o);

/// Parses and validates a document. Throws ConfigError naming the offending field for schema
/// violations (missing, mistyped, unknown or out-of-range fields).
Config parse_config(const nlohmann::json& doc);

/// Reads a JSON file; ConfigError on I/O or syntax errors.
nlohmann::json read_json_file(const std::string& path);

/// Grid object as accepted under a config's "grid" field.
ResourceGrid parse_grid(const nlohmann::json& j, Constellation* constellation = nullptr);

/// Grid object describing a block layout, suitable for the "grid" field of other configs.
nlohmann::json layout_grid_json(const OfdmParams& params, const BlockLayout& layout,
                                std::uint64_t pilot_seed, const std::string& constellation);

/// 64-bit FNV-1a of the compact serialization, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

}  // namespace ofdmtoa
