#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "ofdmtoa/channel.hpp"
#include "ofdmtoa/estimators.hpp"
#include "ofdmtoa/grid.hpp"
#include "ofdmtoa/mode.hpp"
#include "ofdmtoa/zzb.hpp"

namespace ofdmtoa {

struct ExperimentSpec {
  ResourceGrid grid{OfdmParams{}};
  Constellation constellation = Constellation::qpsk();
  MultipathProfile channel;  ///< n_taps = 0 for a flat channel
  std::vector<double> snr_db;
  std::vector<Mode> modes{Mode::PilotOnly, Mode::DataOnly, Mode::PilotPlusData,
                          Mode::DecisionDirected};
  double delta_z = 1.0 / 8.0;
  double delta_phi = kPi / 12.0;
  int n_channel = 1;
  int n_noise = 1000;
  std::uint64_t seed = 1;
  int workers = 1;
  bool compute_bounds = true;
  ZzbSettings zzb;
  int crlb_gh_order = 30;

  void validate() const;
};

struct ModeStats {
  Mode mode = Mode::PilotOnly;
  double rmse_m = 0.0;
  double rmse_se_m = 0.0;  ///< delta-method standard error of the RMSE
  double bias_m = 0.0;
  std::size_t trials = 0;
  std::size_t failures = 0;
  double zzb_m = std::numeric_limits<double>::quiet_NaN();
};

struct SnrPoint {
  double snr_db = 0.0;
  std::vector<ModeStats> modes;  ///< in ExperimentSpec::modes order
  // RMS over channel realizations; NaN when not computed or unbounded.
  double crlb_pilot_m = std::numeric_limits<double>::quiet_NaN();
  double mcrlb_m = std::numeric_limits<double>::quiet_NaN();
  double crlb_data_m = std::numeric_limits<double>::quiet_NaN();
};

struct RealizationStats {
  double snr_db = 0.0;
  int realization = 0;
  Mode mode = Mode::PilotOnly;
  double rmse_m = 0.0;
  double zzb_m = std::numeric_limits<double>::quiet_NaN();
};

struct SweepResult {
  std::vector<SnrPoint> points;
  std::vector<RealizationStats> realizations;
};

/// Truth is drawn uniformly over z in [0, N_a) and phi in [0, 2 pi) per trial. All
/// randomness derives from (seed, snr index, realization, trial), so results do not
/// depend on the worker count.
SweepResult run_sweep(const ExperimentSpec& spec);

/// Aggregates per-trial errors into RMSE, its standard error and bias. NaN entries count
/// as failures and are excluded.
ModeStats summarize_errors(Mode mode, const std::vector<double>& errors_m);

/// Empirical complementary CDF: x sorted ascending, exceed[i] = fraction of values > x[i].
struct Ccdf {
  std::vector<double> x;
  std::vector<double> exceed;
  /// Fraction of samples strictly greater than v.
  double at(double v) const;
};

Ccdf ccdf(std::vector<double> values);

/// Linear interpolation between order statistics; p in [0, 1].
double percentile(std::vector<double> values, double p);

}  // namespace ofdmtoa
