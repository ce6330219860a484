#pragma once

#include <memory>
#include <vector>

#include "ofdmtoa/channel.hpp"
#include "ofdmtoa/grid.hpp"
#include "ofdmtoa/llr.hpp"
#include "ofdmtoa/mode.hpp"

namespace ofdmtoa {

struct ZzbSettings {
  double z_step = 1.0 / 16.0;          ///< base z1 grid step [samples]
  double phi_step = kPi / 12.0;        ///< phi1 scan step [rad]
  int gh_order = 20;
  /// Golden-section polish of the phase maximum around the best scan point.
  bool refine_phi = true;
  /// Extra z1 samples: geometric toward z1 = 0 and bisection where max Pmin jumps.
  bool refine_z = true;
  double pmin_jump = 0.005;
  /// Bisect an interval when its trapezoid share of the integral can move it by more than this.
  double integral_tol = 2e-4;
  int max_bisect_depth = 12;
  /// Above this many distinct data-cell SNRs, moment rows are interpolated on a dB lattice.
  int max_exact_rows = 32;

  void validate() const;
};

struct ZzbResult {
  double variance = 0.0;  ///< [s^2]
  double rmse_s = 0.0;
  double rmse_m = 0.0;
  std::vector<double> z;     ///< ascending z1 samples [samples]
  std::vector<double> pmin;  ///< max over phi1 of Pmin at each z
  double z_step = 0.0;
  double phi_step = 0.0;
};

/// Q(mean / sqrt(var)); exactly 0.5 when var is zero.
double pmin_from_moments(const LlrMoments& total);

/// Reverse running maximum. Throws ParameterError on empty input.
std::vector<double> valley_fill(std::span<const double> samples);

/// Summed LLR moments and Pmin at arbitrary (z1, phi1) for a grid, channel and mode.
/// Data moments are read from `table` rows; pilots use the closed form.
class PminModel {
 public:
  PminModel(const ResourceGrid& grid, const ChannelRealization& chan, Mode mode,
            std::shared_ptr<const MomentTable> table, const ZzbSettings& settings);

  LlrMoments moments(double z1, double phi1) const;
  double pmin(double z1, double phi1) const { return pmin_from_moments(moments(z1, phi1)); }
  /// max over phi1 of Pmin(z1, phi1).
  double max_phi(double z1) const;

  int K() const { return K_; }
  bool has_data() const { return !groups_.empty(); }

 private:
  struct PilotTerm {
    double a;  // snr |c|^2
    int d;
  };
  struct DataGroup {
    int d;
    double multiplicity;
    std::shared_ptr<const MomentRow> row;
  };

  int K_;
  ZzbSettings settings_;
  std::vector<PilotTerm> pilots_;
  std::vector<DataGroup> groups_;
  double pilot_total_ = 0.0;
  double phi_period_ = kTwoPi;
};

/// Pmin with moments evaluated directly by quadrature (no tables).
double pmin(const ResourceGrid& grid, const ChannelRealization& chan,
            const Constellation& constellation, const ThetaParams& theta1,
            const GaussHermiteRule& rule, Mode mode = Mode::PilotPlusData);

/// Ziv-Zakai bound on TOA error variance. DecisionDirected is bounded as PilotPlusData.
/// A shared `table` may be passed to reuse moment rows across calls.
ZzbResult zzb_variance(const ResourceGrid& grid, const ChannelRealization& chan,
                       const Constellation& constellation, Mode mode,
                       const ZzbSettings& settings = {},
                       std::shared_ptr<const MomentTable> table = nullptr);

/// Integrates a max-Pmin profile into a variance in s^2.
double zzb_integral(std::span<const double> z, std::span<const double> pmin, double n_a,
                    double sample_period);

}  // namespace ofdmtoa
