#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ofdmtoa/numeric.hpp"

namespace ofdmtoa {

/// OFDM numerology and a-priori TOA window.
struct OfdmParams {
  int K = 64;              ///< subcarrier count (even)
  int n_sym = 1;           ///< OFDM symbols
  double delta_f = 15e3;   ///< subcarrier spacing [Hz]
  double t_a = 6.25e-6;    ///< a-priori TOA window [s]

  double sample_period() const { return 1.0 / (static_cast<double>(K) * delta_f); }
  /// Window length in samples, t_a / T_s.
  double window_samples() const { return t_a * static_cast<double>(K) * delta_f; }
  std::size_t cell_count() const { return static_cast<std::size_t>(K) * n_sym; }

  /// Throws ParameterError when K is odd or < 2, n_sym < 1, or a duration is non-positive.
  void validate() const;
};

/// Finite symbol alphabet with unit average power and a uniform prior.
class Constellation {
 public:
  Constellation(std::string name, std::vector<cdouble> symbols);

  static Constellation qpsk();
  static Constellation qam16();
  /// Degenerate one-point alphabet; used to collapse the mixture likelihood onto the pilot case.
  static Constellation single(cdouble symbol = {1.0, 0.0});
  /// "qpsk" or "16qam" (case-insensitive).
  static Constellation by_name(std::string_view name);

  std::span<const cdouble> symbols() const { return symbols_; }
  std::size_t size() const { return symbols_.size(); }
  const std::string& name() const { return name_; }
  cdouble operator[](std::size_t i) const { return symbols_[i]; }

  /// Largest R in {4, 2, 1} such that the alphabet is invariant under rotation by 2*pi/R.
  int rotational_order() const { return rotational_order_; }

  /// Index of the symbol closest to `v`.
  std::size_t nearest(cdouble v) const;

 private:
  std::string name_;
  std::vector<cdouble> symbols_;
  int rotational_order_ = 1;
};

enum class CellState : std::uint8_t { Empty, Pilot, Data };

struct Cell {
  CellState state = CellState::Empty;
  cdouble pilot{0.0, 0.0};  ///< known symbol when state == Pilot
  double weight = 1.0;      ///< amplitude weight applied on transmission
};

struct CellIndex {
  int m = 0;
  int k = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Per-(symbol, subcarrier) allocation of pilot, data and empty resources.
class ResourceGrid {
 public:
  explicit ResourceGrid(OfdmParams params);

  const OfdmParams& params() const { return params_; }
  int K() const { return params_.K; }
  int n_sym() const { return params_.n_sym; }

  const Cell& at(int m, int k) const { return cells_[flat(m, k)]; }
  const Cell& at(std::size_t flat_index) const { return cells_[flat_index]; }
  std::size_t flat(int m, int k) const;

  void set_empty(int m, int k);
  void set_pilot(int m, int k, cdouble symbol, double weight = 1.0);
  void set_data(int m, int k, double weight = 1.0);

  std::vector<CellIndex> cells(CellState state) const;
  std::size_t count(CellState state) const;

  /// Copy where every data cell becomes a pilot carrying `symbols[i]` for the i-th data
  /// cell in row-major order.
  ResourceGrid with_data_as_pilots(std::span<const cdouble> symbols) const;

 private:
  OfdmParams params_;
  std::vector<Cell> cells_;
};

/// Delay (in samples) and carrier phase. Phase is stored modulo 2*pi.
struct ThetaParams {
  double z = 0.0;
  double phi = 0.0;

  ThetaParams() = default;
  ThetaParams(double z_, double phi_) : z(z_), phi(wrap_phase(phi_)) {}
};

/// Signed frequency offset of subcarrier k: k for k < K/2, k - K otherwise.
int freq_index_map(int k, int K);

/// exp(-j 2 pi z d[k] / K + j phi).
cdouble phase_ramp(const ThetaParams& theta, int k, int K);

/// Realized transmit symbols, row-major over (m, k). Empty cells hold zero.
struct Payload {
  std::vector<cdouble> symbols;
  std::vector<int> data_index;  ///< constellation index per data cell, -1 elsewhere
};

Payload generate_payload(const ResourceGrid& grid, const Constellation& constellation,
                         std::uint64_t seed);

/// Unit-modulus QPSK pilot values drawn from a seeded sequence.
std::vector<cdouble> qpsk_pilot_sequence(std::size_t n, std::uint64_t seed);

}  // namespace ofdmtoa
