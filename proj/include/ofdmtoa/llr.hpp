#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "ofdmtoa/channel.hpp"
#include "ofdmtoa/grid.hpp"
#include "ofdmtoa/quadrature.hpp"

namespace ofdmtoa {

/// Mean and variance of a per-resource log-likelihood ratio under the null hypothesis.
struct LlrMoments {
  double mean = 0.0;
  double var = 0.0;

  LlrMoments& operator+=(const LlrMoments& o) {
    mean += o.mean;
    var += o.var;
    return *this;
  }
};

// Kernels in normalized form. `snr` is |alpha|^2 w^2 / sigma^2 for the cell and `psi`
// is the phase of nu_k(theta1), i.e. phi1 - 2 pi z1 d[k] / K.

/// Pilot LLR: mean = 2 snr |c|^2 (1 - cos psi), var = 2 mean.
LlrMoments pilot_llr_moments(double snr, double pilot_power, double psi);

/// Data LLR moments by symbol averaging and 2-D Gauss-Hermite expectations.
LlrMoments data_llr_moments(double snr, double psi, const Constellation& constellation,
                            const GaussHermiteRule& rule);

/// Cell-level wrappers that read snr and d[k] from the grid and channel.
LlrMoments llr_moments_pilot(const ResourceGrid& grid, const ChannelRealization& chan,
                             CellIndex cell, const ThetaParams& theta1);
LlrMoments llr_moments_data(const ResourceGrid& grid, const ChannelRealization& chan,
                            CellIndex cell, const Constellation& constellation,
                            const ThetaParams& theta1, const GaussHermiteRule& rule);

/// Effective per-cell SNR including the amplitude weight.
double cell_snr(const ResourceGrid& grid, const ChannelRealization& chan, std::size_t flat);

/// Data LLR moments sampled over one rotational period of psi at a fixed SNR.
class MomentRow {
 public:
  MomentRow() = default;
  MomentRow(double snr, double period, std::vector<double> mean, std::vector<double> var);

  double snr() const { return snr_; }
  double period() const { return period_; }
  std::size_t size() const { return mean_.size(); }
  const std::vector<double>& means() const { return mean_; }
  const std::vector<double>& vars() const { return var_; }

  /// Periodic four-point Lagrange interpolation.
  LlrMoments operator()(double psi) const;

 private:
  double snr_ = 0.0;
  double period_ = 0.0;
  double inv_step_ = 0.0;
  std::vector<double> mean_;
  std::vector<double> var_;
};

/// Direct evaluation of one row; shares the null-hypothesis work across psi samples.
MomentRow compute_moment_row(double snr, const Constellation& constellation,
                             const GaussHermiteRule& rule, int samples);

/// Cache of moment rows for one constellation and quadrature order. Rows are either exact
/// (keyed by SNR value) or interpolated across a lattice in SNR dB. Thread safe.
class MomentTable {
 public:
  MomentTable(Constellation constellation, int gh_order, int samples = 256,
              double lattice_db = 0.25);

  const Constellation& constellation() const { return constellation_; }
  const GaussHermiteRule& rule() const { return rule_; }
  int samples() const { return samples_; }

  std::shared_ptr<const MomentRow> exact(double snr) const;
  /// Cubic interpolation in dB between lattice rows, with moments scaled by snr.
  std::shared_ptr<const MomentRow> interpolated(double snr) const;

 private:
  std::shared_ptr<const MomentRow> lattice(int index) const;

  Constellation constellation_;
  GaussHermiteRule rule_;
  int samples_;
  double lattice_db_;
  mutable std::mutex mu_;
  mutable std::map<double, std::shared_ptr<const MomentRow>> exact_;
  mutable std::map<int, std::shared_ptr<const MomentRow>> lattice_;
};

}  // namespace ofdmtoa
