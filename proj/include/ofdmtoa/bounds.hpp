#pragma once

#include <string>
#include <vector>

#include "ofdmtoa/channel.hpp"
#include "ofdmtoa/grid.hpp"
#include "ofdmtoa/quadrature.hpp"

namespace ofdmtoa {

enum class CrlbKind { Pilot, Mcrlb, DataExact };

struct CrlbResult {
  double variance = 0.0;  ///< [s^2]
  double rmse_m = 0.0;
  double fisher = 0.0;    ///< [1/s^2]
  CrlbKind kind = CrlbKind::Pilot;
  std::vector<std::string> warnings;
};

/// Fisher information 8 pi^2 df^2 sum d^2 snr |c|^2 over pilot cells.
/// Throws UnboundedVarianceError when it is zero.
CrlbResult crlb_pilot(const ResourceGrid& grid, const ChannelRealization& chan);

/// Same sum over data cells (symbols conditioned on, unit average power).
CrlbResult crlb_mcrlb(const ResourceGrid& grid, const ChannelRealization& chan);

/// Fisher information of the Gaussian-mixture likelihood over data cells, with the
/// squared-score expectation evaluated by Gauss-Hermite quadrature. A warning is attached
/// when order gh_order + 10 disagrees by more than 1e-3 relative.
CrlbResult crlb_data_exact(const ResourceGrid& grid, const ChannelRealization& chan,
                           const Constellation& constellation, int gh_order = 30);

/// Ratio of the mixture Fisher information to the known-symbol value at one cell:
/// 2 E[(sum_c p_c Im{conj(y) c})^2] for y = sqrt(snr) c0 + n, n ~ CN(0,1),
/// p_c the symbol posterior. Tends to 1 at high SNR and is 1 for a single symbol.
double data_fisher_factor(double snr, const Constellation& constellation,
                          const GaussHermiteRule& rule);

}  // namespace ofdmtoa
