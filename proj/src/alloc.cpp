#include "ofdmtoa/alloc.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "ofdmtoa/channel.hpp"
#include "ofdmtoa/errors.hpp"
#include "ofdmtoa/parallel.hpp"

namespace ofdmtoa {

void BlockLayout::validate() const {
  if (n_blocks < 1 || n_blocks > 64) throw ParameterError("n_blocks must be in [1, 64]");
  if (block_size < 1) throw ParameterError("block_size must be >= 1");
  if (comb < 1 || block_size % comb != 0) throw ParameterError("comb must divide block_size");
  if (comb_shift < 0) throw ParameterError("comb_shift must be >= 0");
  for (std::size_t i = 0; i < prs_blocks.size(); ++i) {
    if (prs_blocks[i] < 0 || prs_blocks[i] >= n_blocks)
      throw ParameterError("PRS block index out of range");
    if (i > 0 && prs_blocks[i] <= prs_blocks[i - 1])
      throw ParameterError("PRS blocks must be sorted and distinct");
  }
}

std::uint64_t BlockLayout::bitmask() const {
  std::uint64_t m = 0;
  for (int b : prs_blocks) m |= std::uint64_t{1} << b;
  return m;
}

ResourceGrid layout_to_grid(const BlockLayout& layout, const OfdmParams& params,
                            std::uint64_t pilot_seed) {
  layout.validate();
  params.validate();
  if (params.K != layout.n_blocks * layout.block_size)
    throw ParameterError("K must equal n_blocks * block_size");
  ResourceGrid g(params);
  const auto seq = qpsk_pilot_sequence(params.cell_count(), pilot_seed);
  std::vector<bool> prs(layout.n_blocks, false);
  for (int b : layout.prs_blocks) prs[b] = true;
  for (int m = 0; m < params.n_sym; ++m) {
    const int offset = (m * layout.comb_shift) % layout.comb;
    for (int k = 0; k < params.K; ++k) {
      const int b = k / layout.block_size;
      const int j = k % layout.block_size;
      if (prs[b] && j % layout.comb == offset)
        g.set_pilot(m, k, seq[g.flat(m, k)]);
      else
        g.set_data(m, k);
    }
  }
  return g;
}

void AllocationSearch::validate() const {
  base.validate();
  if (n_prs < 0 || n_prs > base.n_blocks) throw ParameterError("n_prs must be in [0, n_blocks]");
  if (top < 0) throw ParameterError("top must be >= 0");
  if (!std::isfinite(snr_db)) throw ParameterError("snr_db must be finite");
  zzb.validate();
}

std::uint64_t allocation_count(int n_blocks, int n_prs) {
  if (n_prs < 0 || n_prs > n_blocks) return 0;
  std::uint64_t c = 1;
  for (int i = 1; i <= n_prs; ++i) c = c * static_cast<std::uint64_t>(n_blocks - n_prs + i) / i;
  return c;
}

namespace {

constexpr std::uint64_t kMaxCandidates = 200000;

// All n-element subsets of [0, n_blocks) in lexicographic order.
std::vector<std::vector<int>> combinations(int n_blocks, int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> c(n);
  std::iota(c.begin(), c.end(), 0);
  for (;;) {
    out.push_back(c);
    int i = n - 1;
    while (i >= 0 && c[i] == n_blocks - n + i) --i;
    if (i < 0) break;
    ++c[i];
    for (int j = i + 1; j < n; ++j) c[j] = c[j - 1] + 1;
  }
  return out;
}

}  // namespace

std::vector<AllocationResult> search_allocations(const OfdmParams& params,
                                                 const AllocationSearch& search) {
  search.validate();
  if (search.n_prs == 0) throw ParameterError("pilot-only search needs n_prs >= 1");
  if (allocation_count(search.base.n_blocks, search.n_prs) > kMaxCandidates)
    throw ParameterError("too many candidate layouts for exhaustive search");
  const auto combos = combinations(search.base.n_blocks, search.n_prs);
  const double sigma2 = 1.0 / db_to_linear(search.snr_db);

  std::vector<AllocationResult> results(combos.size());
  parallel_for(combos.size(), search.workers, [&](std::size_t i) {
    BlockLayout layout = search.base;
    layout.prs_blocks = combos[i];
    const auto grid = layout_to_grid(layout, params, search.pilot_seed);
    const auto chan = make_flat_channel(grid, 1.0, {0.0, 0.0}, sigma2);
    results[i].layout = layout;
    results[i].pilot_zzb_m =
        zzb_variance(grid, chan, search.constellation, Mode::PilotOnly, search.zzb).rmse_m;
  });
  std::stable_sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
    if (a.pilot_zzb_m != b.pilot_zzb_m) return a.pilot_zzb_m < b.pilot_zzb_m;
    return a.layout.prs_blocks < b.layout.prs_blocks;
  });

  const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(search.top), results.size());
  auto table = std::make_shared<MomentTable>(search.constellation, search.zzb.gh_order);
  parallel_for(top, search.workers, [&](std::size_t i) {
    const auto grid = layout_to_grid(results[i].layout, params, search.pilot_seed);
    const auto chan = make_flat_channel(grid, 1.0, {0.0, 0.0}, sigma2);
    results[i].pilot_plus_data_zzb_m =
        zzb_variance(grid, chan, search.constellation, Mode::PilotPlusData, search.zzb, table).rmse_m;
  });
  return results;
}

std::vector<int> optimize_pilot_positions(const OfdmParams& params, int n_pilots, double snr_db,
                                          const ZzbSettings& settings, int restarts,
                                          std::uint64_t seed, int workers) {
  params.validate();
  if (n_pilots < 1 || n_pilots >= params.K) throw ParameterError("n_pilots must be in [1, K)");
  if (restarts < 1) throw ParameterError("restarts must be >= 1");
  OfdmParams one = params;
  one.n_sym = 1;
  const double sigma2 = 1.0 / db_to_linear(snr_db);
  auto cost = [&](const std::vector<int>& pos) {
    ResourceGrid g(one);
    for (int k : pos) g.set_pilot(0, k, {1.0, 0.0});
    const auto chan = make_flat_channel(g, 1.0, {0.0, 0.0}, sigma2);
    try {
      return zzb_variance(g, chan, Constellation::qpsk(), Mode::PilotOnly, settings).variance;
    } catch (const ParameterError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  std::vector<int> overall;
  double overall_cost = std::numeric_limits<double>::infinity();
  for (int start = 0; start < restarts; ++start) {
    std::vector<int> pos(n_pilots);
    if (start == 0) {
      for (int i = 0; i < n_pilots; ++i) pos[i] = (i * params.K) / n_pilots;
    } else {
      std::vector<int> all(params.K);
      std::iota(all.begin(), all.end(), 0);
      std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(start)));
      std::shuffle(all.begin(), all.end(), rng);
      pos.assign(all.begin(), all.begin() + n_pilots);
    }
    double best = cost(pos);
    for (bool improved = true; improved;) {
      improved = false;
      // Every (pilot, free subcarrier) swap; take the best one per pass.
      std::vector<std::pair<int, int>> moves;
      for (int i = 0; i < n_pilots; ++i)
        for (int k = 0; k < params.K; ++k)
          if (std::find(pos.begin(), pos.end(), k) == pos.end()) moves.emplace_back(i, k);
      std::vector<double> costs(moves.size());
      parallel_for(moves.size(), workers, [&](std::size_t m) {
        auto trial = pos;
        trial[moves[m].first] = moves[m].second;
        costs[m] = cost(trial);
      });
      std::size_t arg = moves.size();
      for (std::size_t m = 0; m < moves.size(); ++m)
        if (costs[m] < best * (1.0 - 1e-9) && (arg == moves.size() || costs[m] < costs[arg]))
          arg = m;
      if (arg < moves.size()) {
        pos[moves[arg].first] = moves[arg].second;
        best = costs[arg];
        improved = true;
      }
    }
    std::sort(pos.begin(), pos.end());
    if (best < overall_cost * (1.0 - 1e-12)) {
      overall_cost = best;
      overall = pos;
    }
  }
  return overall;
}

}  // namespace ofdmtoa
