#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "ofdmtoa/grid.hpp"
#include "ofdmtoa/zzb.hpp"

namespace ofdmtoa {

/// Resource blocks that each carry either a comb PRS block or only data.
struct BlockLayout {
  int n_blocks = 20;
  int block_size = 12;
  int comb = 4;
  /// Comb offset in symbol m is (m * comb_shift) mod comb.
  int comb_shift = 1;
  std::vector<int> prs_blocks;  ///< sorted, distinct

  void validate() const;
  /// Bit b set when block b carries PRS.
  std::uint64_t bitmask() const;
};

/// PRS blocks get comb pilots (values from qpsk_pilot_sequence(K * n_sym, pilot_seed)) and
/// data elsewhere in the block; other blocks are all data. Throws if K != n_blocks * block_size.
ResourceGrid layout_to_grid(const BlockLayout& layout, const OfdmParams& params,
                            std::uint64_t pilot_seed = 1);

struct AllocationResult {
  BlockLayout layout;
  double pilot_zzb_m = 0.0;
  double pilot_plus_data_zzb_m = std::numeric_limits<double>::quiet_NaN();
};

struct AllocationSearch {
  BlockLayout base;  ///< block geometry; prs_blocks ignored
  int n_prs = 2;
  double snr_db = 10.0;
  int top = 10;  ///< layouts that also get the pilot-plus-data bound
  ZzbSettings zzb;
  Constellation constellation = Constellation::qpsk();
  int workers = 1;
  std::uint64_t pilot_seed = 1;

  void validate() const;
};

/// Number of candidate layouts, C(n_blocks, n_prs).
std::uint64_t allocation_count(int n_blocks, int n_prs);

/// Exhaustive search ranked by pilot-only ZZB (ties by block list), pilot-plus-data ZZB
/// evaluated for the first `top`. Flat channel at the given per-resource SNR.
std::vector<AllocationResult> search_allocations(const OfdmParams& params,
                                                 const AllocationSearch& search);

/// Pilot subcarrier positions for a single-symbol grid with all other cells data, chosen by
/// single exchanges to minimize the pilot-only ZZB at `snr_db`. The first start is an even
/// spread, further starts are random draws from `seed`; the best local optimum is returned.
std::vector<int> optimize_pilot_positions(const OfdmParams& params, int n_pilots, double snr_db,
                                          const ZzbSettings& settings = {}, int restarts = 1,
                                          std::uint64_t seed = 1, int workers = 1);

}  // namespace ofdmtoa
