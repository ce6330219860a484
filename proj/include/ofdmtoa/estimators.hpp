#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ofdmtoa/grid.hpp"
#include "ofdmtoa/mode.hpp"

namespace ofdmtoa {

/// Gain and noise power the receiver conditions on.
struct ChannelModel {
  double g = 1.0;
  double sigma2 = 1.0;
};

struct EstimatorConfig {
  double delta_z = 1.0 / 8.0;      ///< z grid step [samples]
  double delta_phi = kPi / 12.0;   ///< phase grid step [rad]
  Mode mode = Mode::PilotPlusData;

  /// Throws ParameterError unless 0 < delta_z <= n_a and 0 < delta_phi <= 2 pi.
  void validate(double n_a) const;
};

struct Estimate {
  ThetaParams theta_hat;
  double loglik_at_peak = 0.0;  ///< objective at the discrete argmax
  std::size_t z_index = 0;
  std::size_t phi_index = 0;
  bool interpolated = false;    ///< false when the peak sits on the z boundary
  /// Decoded symbol per data cell in row-major order; set by the decision-directed mode.
  std::optional<std::vector<cdouble>> decoded;
};

/// Log-likelihood of one occupied cell at theta, dropping theta-independent constants.
/// Pilot: (2/s2) Re{conj(y) mu nu}. Data: log-sum-exp over symbols of
/// (2 Re{conj(y) sqrt(g) w c nu} - g w^2 |c|^2) / s2. Empty cells contribute 0.
double loglik_cell(cdouble y, const Cell& cell, int k, int K, const ChannelModel& model,
                   const Constellation& constellation, const ThetaParams& theta);

/// Grid search over z in [0, N_a] and phi in [0, 2 pi) with parabolic refinement in z.
///
/// When both grid steps divide a common phase lattice, per-cell data likelihoods are
/// tabulated once on that lattice and reused across the grid; otherwise every grid point
/// is evaluated directly. Both paths give the same objective.
class GridSearch {
 public:
  GridSearch(const ResourceGrid& grid, Constellation constellation, double delta_z,
             double delta_phi);

  std::size_t z_count() const { return nz_; }
  std::size_t phi_count() const { return nphi_; }
  double delta_z() const { return dz_; }
  double delta_phi() const { return dphi_; }
  bool uses_lattice() const { return lattice_ > 0; }

  /// Objective surface, row-major over (z index, phi index).
  std::vector<double> objective(std::span<const cdouble> y, const ChannelModel& model,
                                Mode mode) const;
  std::vector<double> objective_direct(std::span<const cdouble> y, const ChannelModel& model,
                                       Mode mode) const;

  Estimate estimate(std::span<const cdouble> y, const ChannelModel& model, Mode mode) const;

  /// Estimates for several modes from one received grid, sharing the data tables.
  std::vector<Estimate> estimate_all(std::span<const cdouble> y, const ChannelModel& model,
                                     std::span<const Mode> modes) const;

  /// Nearest-symbol decisions for every data cell after removing the hypothesized ramp.
  std::vector<cdouble> decode(std::span<const cdouble> y, const ChannelModel& model,
                              const ThetaParams& theta) const;

  /// Argmax (lowest z, then lowest phi on ties) and z refinement of a surface.
  Estimate pick_peak(std::span<const double> surface) const;

 private:
  struct KnownCell {
    std::size_t flat;
    int d;
    cdouble symbol;
    double weight;
  };

  std::vector<double> pilot_surface(std::span<const cdouble> y, const ChannelModel& model,
                                    std::span<const KnownCell> cells) const;
  std::vector<double> data_surface(std::span<const cdouble> y, const ChannelModel& model) const;
  void data_table(cdouble y, double weight, const ChannelModel& model, double* out) const;
  Estimate decision_directed(std::span<const cdouble> y, const ChannelModel& model,
                             const Estimate& pilot_estimate) const;
  void check_input(std::span<const cdouble> y) const;

  ResourceGrid grid_;
  Constellation constellation_;
  double dz_, dphi_;
  std::size_t nz_, nphi_;
  int K_;
  std::vector<KnownCell> pilots_;
  std::vector<std::size_t> data_;  // flat indices
  std::vector<int> data_d_;

  // Phase lattice: psi = 2 pi n / lattice_. Zero when the steps are incommensurate.
  long lattice_ = 0;
  long period_ = 0;    // lattice entries per rotational period of the constellation
  long phi_step_ = 0;  // lattice entries per phase grid step
  long z_step_ = 0;    // lattice entries per z grid step and unit |d|
  std::vector<double> cos_, sin_;
  std::vector<int> data_groups_;  // per data cell, index into distinct d values
  std::vector<int> group_d_;

  // Product-constellation structure: c = re + j im with re in levels_re_, im in levels_im_.
  bool separable_ = false;
  std::vector<double> levels_re_, levels_im_;
};

/// Convenience wrappers that build a GridSearch for one call.
Estimate ml_estimate(std::span<const cdouble> y, const ResourceGrid& grid,
                     const ChannelModel& model, const Constellation& constellation,
                     const EstimatorConfig& cfg);
Estimate dd_estimate(std::span<const cdouble> y, const ResourceGrid& grid,
                     const ChannelModel& model, const Constellation& constellation,
                     const EstimatorConfig& cfg);

}  // namespace ofdmtoa
