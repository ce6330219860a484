#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ofdmtoa/grid.hpp"

namespace ofdmtoa {

enum class GainProfile { Flat, Tapped };

struct Tap {
  double delay_s = 0.0;  ///< delay relative to the LOS TOA
  cdouble amp{1.0, 0.0};
};

/// Per-resource complex gains alpha_m[k] (including the TOA/phase ramp of `truth`)
/// and the per-resource noise power.
struct ChannelRealization {
  int K = 0;
  int n_sym = 0;
  std::vector<cdouble> alpha;  ///< row-major over (m, k)
  double sigma2 = 1.0;
  ThetaParams truth;
  GainProfile profile = GainProfile::Flat;
  std::vector<Tap> taps;
  double drift = 0.0;  ///< per-symbol phase rate [rad/symbol]

  /// |alpha_m[k]|^2 / sigma^2, excluding the cell's amplitude weight.
  double snr(std::size_t flat_index) const { return std::norm(alpha[flat_index]) / sigma2; }
  double snr(int m, int k) const { return snr(static_cast<std::size_t>(m) * K + k); }
  /// Mean |alpha|^2 over all cells; the gain a flat-model receiver would assume.
  double mean_gain() const;
};

ChannelRealization make_flat_channel(const ResourceGrid& grid, double g, const ThetaParams& theta,
                                     double sigma2);

ChannelRealization make_tapped_channel(const ResourceGrid& grid, std::span<const Tap> taps,
                                       const ThetaParams& theta, double sigma2,
                                       double per_symbol_drift = 0.0);

/// Random multipath: a LOS tap plus Rayleigh taps with an exponential power-delay profile.
struct MultipathProfile {
  int n_taps = 0;              ///< non-LOS taps; 0 gives a flat channel
  double rician_k_db = 10.0;   ///< LOS to total non-LOS power ratio
  double rms_delay_s = 50e-9;  ///< mean excess delay of the non-LOS taps
  double drift_rad = 0.0;      ///< per-symbol phase drift applied to all taps

  void validate() const;
};

/// Taps with unit total expected power, deterministic in `seed`. LOS tap first, delay 0.
std::vector<Tap> draw_taps(const MultipathProfile& profile, std::uint64_t seed);

/// y = alpha * w * x + v, v ~ CN(0, sigma^2) drawn independently per cell in row-major order.
std::vector<cdouble> apply_channel(const ResourceGrid& grid, const Payload& payload,
                                   const ChannelRealization& chan, std::uint64_t noise_seed);

/// Free-space link budget from per-4-kHz EIRP to per-resource SNR.
struct LinkBudget {
  double eirp_dbw_per_4khz = -15.0;
  double rx_gain_db = 30.0;
  double carrier_hz = 10.7e9;
  double noise_dbm_per_hz = -173.8;
  double extra_loss_db = 0.0;
};

/// Per-resource SNR [dB] for subcarrier spacing `delta_f` at slant range `range_m`.
double link_budget_snr_db(const LinkBudget& lb, double delta_f, double range_m);

}  // namespace ofdmtoa
